#include "drag/gateway.hpp"

#include <fstream>

#ifdef DRAG_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"
#include "json.hpp"

namespace drag {

namespace {

std::size_t whitespace_token_count(const std::string& text) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!ws && !in_token) ++count;
        in_token = !ws;
    }
    return count;
}

const char* role_name(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

}  // namespace

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::retrieval: return "retrieval";
        case Stage::response: return "response";
        case Stage::baseline: return "baseline";
    }
    return "baseline";
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules)
    : rules_(std::move(rules)) {}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls_seen_;

    const std::string* last_user = nullptr;
    for (const auto& m : request.messages) {
        if (m.role == Role::user) last_user = &m.content;
    }
    for (const auto& rule : rules_) {
        bool hit = rule.ordinal > 0
                       ? calls_seen_ == rule.ordinal
                       : last_user != nullptr &&
                             last_user->find(rule.match) != std::string::npos;
        if (hit) {
            ChatResponse r;
            r.content = rule.reply;
            r.prompt_tokens =
                last_user ? static_cast<std::int64_t>(whitespace_token_count(*last_user)) : 0;
            r.completion_tokens =
                static_cast<std::int64_t>(whitespace_token_count(rule.reply));
            return r;
        }
    }
    std::string head = last_user ? last_user->substr(0, 120) : std::string{"<no user message>"};
    throw std::runtime_error("scripted backend: no rule matches call " +
                             std::to_string(calls_seen_) + ", prompt starts: " + head);
}

std::vector<ScriptRule> ScriptedBackend::load_script_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read script file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("script file " + path + ": " + e.what());
    }
    if (!j.is_array()) throw std::runtime_error("script file " + path + ": expected a JSON array");
    std::vector<ScriptRule> rules;
    for (const auto& e : j) {
        ScriptRule rule;
        rule.match = e.value("match", std::string{});
        rule.reply = e.at("reply").get<std::string>();
        rule.ordinal = e.value("ordinal", std::uint64_t{0});
        if (rule.match.empty() && rule.ordinal == 0) {
            throw std::runtime_error("script file " + path +
                                     ": rule needs a \"match\" substring or an \"ordinal\"");
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

ApiBackend::ApiBackend(ApiBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw std::runtime_error("api backend: base URL not set (--api-base or DRAG_API_BASE)");
    }
    // Split scheme://host[:port] from any path prefix.
    auto scheme_end = config_.base_url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto slash = config_.base_url.find('/', host_start);
    if (slash == std::string::npos) {
        host_ = config_.base_url;
    } else {
        host_ = config_.base_url.substr(0, slash);
        path_prefix_ = config_.base_url.substr(slash);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

std::string ApiBackend::request_body(const ChatRequest& request) {
    nlohmann::json body;
    body["model"] = request.model_id;
    auto& messages = body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    return body.dump();
}

ChatResponse ApiBackend::complete(const ChatRequest& request) {
    const std::string body = request_body(request);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    const std::string path = path_prefix_ + "/v1/chat/completions";

    httplib::Result res;
    for (int attempt = 0; attempt < 2; ++attempt) {
        httplib::Client client(host_);
        client.set_connection_timeout(config_.connect_timeout_sec, 0);
        client.set_read_timeout(config_.read_timeout_sec, 0);
        res = client.Post(path, headers, body, "application/json");
        bool transport_fault = !res || res->status >= 500;
        if (!transport_fault) break;
    }
    if (!res) {
        throw std::runtime_error("api backend: transport error: " +
                                 httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw std::runtime_error("api backend: HTTP " + std::to_string(res->status) + ": " +
                                 res->body.substr(0, 200));
    }

    nlohmann::json payload;
    try {
        payload = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("api backend: malformed payload: " + res->body.substr(0, 200));
    }
    if (!payload.contains("choices") || payload["choices"].empty() ||
        !payload["choices"][0].contains("message")) {
        throw std::runtime_error("api backend: malformed payload: missing choices[0].message");
    }
    ChatResponse out;
    out.content = payload["choices"][0]["message"].value("content", std::string{});
    if (payload.contains("usage")) {
        out.prompt_tokens = payload["usage"].value("prompt_tokens", std::int64_t{0});
        out.completion_tokens = payload["usage"].value("completion_tokens", std::int64_t{0});
    }
    return out;
}

void CallLog::merge(const CallLog& other) {
    for (std::size_t i = 0; i < llm_by_stage.size(); ++i) {
        llm_by_stage[i] += other.llm_by_stage[i];
    }
    retriever_calls += other.retriever_calls;
}

Gateway::Gateway(std::shared_ptr<LlmBackend> backend, std::int64_t call_budget,
                 RequestDefaults defaults)
    : backend_(std::move(backend)), call_budget_(call_budget), defaults_(std::move(defaults)) {}

ChatResponse Gateway::complete(ChatRequest request) {
    if (request.messages.empty() || request.messages.front().role == Role::assistant) {
        throw std::runtime_error("chat request must start with a system or user message");
    }
    for (const auto& m : request.messages) {
        if (m.role != Role::assistant && m.content.empty()) {
            throw std::runtime_error("user/system message content must be non-empty");
        }
    }
    if (log_.llm_total() >= call_budget_) {
        throw BudgetExceeded("LLM call budget exceeded (" + std::to_string(call_budget_) +
                             " calls per question)");
    }
    request.model_id = defaults_.model_id;
    request.temperature = defaults_.temperature;
    request.max_tokens = defaults_.max_tokens;
    ++log_.llm_by_stage[static_cast<std::size_t>(request.stage)];
    return backend_->complete(request);
}

void Gateway::record_retriever_call() { ++log_.retriever_calls; }

}  // namespace drag
