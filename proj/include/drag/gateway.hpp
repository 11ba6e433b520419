#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace drag {

enum class Stage { retrieval, response, baseline };

const char* stage_name(Stage stage);

enum class Role { system, user, assistant };

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 512;
    std::string model_id;
    Stage stage = Stage::baseline;
};

struct ChatResponse {
    std::string content;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Chat-completion backend. Implementations must be safe to call from
/// concurrent question runs.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// One scripted rule: either a substring matched against the most recent
/// user message, or (when ordinal > 0) the 1-based index of the backend
/// call it answers. Rules are checked in declaration order; first match wins.
struct ScriptRule {
    std::string match;
    std::string reply;
    std::uint64_t ordinal = 0;
};

/// Deterministic test backend driven by an ordered rule list.
/// Throws when no rule matches, so unscripted prompts fail loudly.
class ScriptedBackend : public LlmBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptRule> rules);

    ChatResponse complete(const ChatRequest& request) override;

    /// Parses a script file: a JSON array of {"match": string, "reply":
    /// string} objects (or {"ordinal": N, "reply": string}).
    static std::vector<ScriptRule> load_script_file(const std::string& path);

private:
    std::vector<ScriptRule> rules_;
    std::uint64_t calls_seen_ = 0;
    std::mutex mutex_;
};

struct ApiBackendConfig {
    std::string base_url;  // e.g. "http://localhost:8000" or "https://api.example.com/v7"
    std::string api_key;
    int connect_timeout_sec = 15;
    int read_timeout_sec = 120;
};

/// OpenAI-compatible wire client: POST {base_url}/v1/chat/completions with
/// bearer auth; answer read from choices[0].message.content. Retries once on
/// timeout/transport error; a well-formed but unparseable payload is not
/// retried.
class ApiBackend : public LlmBackend {
public:
    explicit ApiBackend(ApiBackendConfig config);

    ChatResponse complete(const ChatRequest& request) override;

    /// Request body as sent on the wire (exposed for the wire-contract tests).
    static std::string request_body(const ChatRequest& request);

private:
    ApiBackendConfig config_;
    std::string host_;  // scheme://host[:port]
    std::string path_prefix_;
};

struct CallLog {
    std::array<std::int64_t, 3> llm_by_stage{0, 0, 0};
    std::int64_t retriever_calls = 0;

    std::int64_t llm_calls(Stage stage) const {
        return llm_by_stage[static_cast<std::size_t>(stage)];
    }
    std::int64_t llm_total() const {
        return llm_by_stage[0] + llm_by_stage[1] + llm_by_stage[2];
    }
    void merge(const CallLog& other);
};

/// Decoding settings stamped onto every request the gateway sends.
struct RequestDefaults {
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 512;
};

/// Per-question facade over a shared backend: stage-tagged call accounting
/// plus the per-question LLM call budget. Each logical complete() counts
/// exactly once, also when the backend retries internally or finally fails.
class Gateway {
public:
    Gateway(std::shared_ptr<LlmBackend> backend, std::int64_t call_budget,
            RequestDefaults defaults = {});

    ChatResponse complete(ChatRequest request);
    void record_retriever_call();

    const CallLog& log() const { return log_; }

private:
    std::shared_ptr<LlmBackend> backend_;
    std::int64_t call_budget_;
    RequestDefaults defaults_;
    CallLog log_;
};

}  // namespace drag
