#include "drag/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace drag {

namespace {

using nlohmann::json;

ChatRequest single_user_request(std::string prompt, Stage stage) {
    ChatRequest req;
    req.messages.push_back(ChatMessage{Role::user, std::move(prompt)});
    req.stage = stage;
    return req;
}

json queries_to_json(const std::vector<Query>& queries) {
    json arr = json::array();
    for (const auto& q : queries) {
        arr.push_back({{"text", q.text},
                       {"origin", query_origin_name(q.origin)},
                       {"round_added", q.round_added}});
    }
    return arr;
}

json op_to_json(const RefinementOp& op) {
    json j;
    j["kind"] = op.kind == RefinementKind::keep_all ? "keep_all" : "revise";
    j["fallback"] = op.fallback;
    if (op.kind == RefinementKind::revise) {
        j["retained"] = op.retained;
        json opts = json::array();
        for (const auto& [old_q, new_q] : op.optimizations) opts.push_back({old_q, new_q});
        j["optimizations"] = std::move(opts);
        j["expansions"] = op.expansions;
    }
    return j;
}

json ret_transcript_to_json(const RetTranscript& transcript) {
    json j;
    json rounds = json::array();
    for (const auto& r : transcript.rounds) {
        rounds.push_back({{"pool_before", queries_to_json(r.pool_before)},
                          {"proponent_argument", r.proponent_argument},
                          {"challenger_argument", r.challenger_argument},
                          {"op", op_to_json(r.parsed_op)},
                          {"judge_raw", r.judge_raw},
                          {"judge_verdict",
                           r.judge_verdict == Verdict::proponent ? "proponent" : "challenger"},
                          {"judge_flagged", r.judge_flagged},
                          {"pool_after", queries_to_json(r.pool_after)}});
    }
    j["rounds"] = std::move(rounds);
    j["termination_reason"] = ret_termination_name(transcript.termination_reason);
    return j;
}

json res_transcript_to_json(const ResTranscript& transcript) {
    json j;
    json rounds = json::array();
    for (const auto& r : transcript.rounds) {
        rounds.push_back({{"proponent_prompt", r.proponent_prompt},
                          {"proponent_reply", r.proponent_reply},
                          {"challenger_prompt", r.challenger_prompt},
                          {"challenger_reply", r.challenger_reply}});
    }
    j["rounds"] = std::move(rounds);
    j["judge_prompt"] = transcript.judge_prompt;
    j["judge_reply"] = transcript.judge_reply;
    j["final_answer"] = transcript.final_answer;
    j["asymmetry_violations"] = transcript.asymmetry_violations;
    j["judge_novel_answer"] = transcript.judge_novel_answer;
    return j;
}

json evidence_to_json(const EvidenceSet& evidence) {
    json arr = json::array();
    for (const auto& e : evidence.entries) {
        json passages = json::array();
        for (const auto& sp : e.passages) {
            passages.push_back({{"doc_id", sp.passage.doc_id},
                                {"title", sp.passage.title},
                                {"text", sp.passage.text},
                                {"score", sp.score}});
        }
        arr.push_back({{"query", e.query_text}, {"passages", std::move(passages)}});
    }
    return arr;
}

json calls_to_json(const CallLog& calls) {
    return json{{"llm_by_stage",
                 {{"retrieval", calls.llm_calls(Stage::retrieval)},
                  {"response", calls.llm_calls(Stage::response)},
                  {"baseline", calls.llm_calls(Stage::baseline)}}},
                {"llm_total", calls.llm_total()},
                {"retriever_calls", calls.retriever_calls}};
}

std::string two_decimals(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

json config_to_json(const PipelineConfig& config) {
    // Snapshot of everything that shapes a run; the API key stays out.
    return json{{"mode", run_mode_name(config.mode)},
                {"k", config.k},
                {"ret_rounds", config.ret_rounds},
                {"res_rounds", config.res_rounds},
                {"epsilon", config.epsilon},
                {"max_pool_size", config.max_pool_size},
                {"backend", config.backend},
                {"script", config.script_path},
                {"api_base", config.api_base},
                {"model", config.model},
                {"temperature", config.temperature},
                {"max_tokens", config.max_tokens},
                {"corpus", config.corpus_path},
                {"index", config.index_path},
                {"dataset", config.dataset_path},
                {"templates", config.templates_dir},
                {"limit", config.limit},
                {"seed", config.seed},
                {"parallel", config.parallel},
                {"call_budget", config.call_budget}};
}

std::string extract_for(const QAInstance& instance, const std::string& raw_output) {
    if (instance.answer_type == AnswerType::yes_no) {
        switch (extract_yesno(raw_output)) {
            case YesNo::yes: return "yes";
            case YesNo::no: return "no";
            case YesNo::unknown: return "";
        }
    }
    return extract_answer(raw_output);
}

InstanceStats stats_for(const QuestionRecord& record) {
    InstanceStats s;
    s.em = record.em;
    s.f1 = record.f1;
    s.ret_rounds = record.has_ret_debate ? record.ret_transcript.rounds.size() : 0;
    s.query_count = record.has_retrieval ? record.final_pool.size() : 0;
    s.llm_calls = record.calls.llm_total();
    s.retriever_calls = record.calls.retriever_calls;
    return s;
}

}  // namespace

const char* run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::naive_gen: return "naive_gen";
        case RunMode::naive_rag: return "naive_rag";
        case RunMode::mad: return "mad";
        case RunMode::drag: return "drag";
        case RunMode::drag_ret_only: return "drag_ret_only";
        case RunMode::drag_res_only: return "drag_res_only";
        case RunMode::drag_no_asymmetry: return "drag_no_asymmetry";
    }
    return "drag";
}

RunMode parse_run_mode(const std::string& name) {
    for (RunMode m : {RunMode::naive_gen, RunMode::naive_rag, RunMode::mad, RunMode::drag,
                      RunMode::drag_ret_only, RunMode::drag_res_only,
                      RunMode::drag_no_asymmetry}) {
        if (name == run_mode_name(m)) return m;
    }
    throw std::runtime_error("unknown run mode: " + name);
}

bool mode_uses_retrieval(RunMode mode) {
    switch (mode) {
        case RunMode::naive_gen:
        case RunMode::mad:
            return false;
        default:
            return true;
    }
}

std::vector<QAInstance> load_dataset(const std::string& path, std::int64_t limit,
                                     std::int64_t seed) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read dataset file: " + path);

    std::vector<QAInstance> instances;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error("dataset file " + path + " line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("question") || !j["question"].is_string()) {
            throw std::runtime_error("dataset file " + path + " line " +
                                     std::to_string(line_no) + ": missing \"question\"");
        }
        if (!j.contains("golden_answers") || !j["golden_answers"].is_array() ||
            j["golden_answers"].empty()) {
            throw std::runtime_error("dataset file " + path + " line " +
                                     std::to_string(line_no) +
                                     ": missing non-empty \"golden_answers\"");
        }
        QAInstance inst;
        inst.id = j.value("id", "q" + std::to_string(line_no));
        inst.question = j["question"].get<std::string>();
        for (const auto& g : j["golden_answers"]) {
            inst.golden_answers.push_back(g.get<std::string>());
        }
        if (j.value("answer_type", std::string{}) == "yes_no") {
            inst.answer_type = AnswerType::yes_no;
            for (const auto& g : inst.golden_answers) {
                if (g != "yes" && g != "no") {
                    throw std::runtime_error("dataset file " + path + " line " +
                                             std::to_string(line_no) +
                                             ": yes_no golden answers must be yes/no");
                }
            }
        }
        instances.push_back(std::move(inst));
    }

    if (seed >= 0) {
        // Hand-rolled Fisher-Yates: byte-identical shuffles on every platform.
        std::mt19937_64 engine(static_cast<std::uint64_t>(seed));
        for (std::size_t i = instances.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(engine() % i);
            std::swap(instances[i - 1], instances[j]);
        }
    }
    if (limit >= 0 && static_cast<std::size_t>(limit) < instances.size()) {
        instances.resize(static_cast<std::size_t>(limit));
    }
    return instances;
}

QuestionRecord run_question(const QAInstance& instance, const PipelineConfig& config,
                            const CorpusIndex* index, std::shared_ptr<LlmBackend> backend,
                            const PromptTemplates& templates) {
    QuestionRecord record;
    record.instance = instance;
    record.mode_name = run_mode_name(config.mode);

    Gateway gateway(std::move(backend), config.call_budget,
                    RequestDefaults{config.model, config.temperature, config.max_tokens});

    try {
        if (mode_uses_retrieval(config.mode) && index == nullptr) {
            throw std::runtime_error("mode requires a corpus or index");
        }
        switch (config.mode) {
            case RunMode::naive_gen: {
                auto prompt = render_template(templates.res_challenger_init,
                                              {{"question", instance.question}});
                record.raw_output =
                    gateway.complete(single_user_request(std::move(prompt), Stage::baseline))
                        .content;
                break;
            }
            case RunMode::naive_rag: {
                auto pool = init_pool(instance.question);
                EvidenceCache cache(*index, config.k);
                record.evidence = cache.gather(pool, gateway);
                record.final_pool = pool.queries;
                record.has_retrieval = true;
                auto prompt = render_template(
                    templates.res_proponent_init,
                    {{"question", instance.question},
                     {"documents", format_evidence_blocks(record.evidence.blocks())}});
                record.raw_output =
                    gateway.complete(single_user_request(std::move(prompt), Stage::baseline))
                        .content;
                break;
            }
            case RunMode::mad: {
                ResDebateConfig res_cfg{config.res_rounds, /*asymmetric=*/true,
                                        /*knowledge_only=*/true};
                auto res =
                    run_response_debate(instance.question, EvidenceSet{}, gateway, res_cfg,
                                        templates);
                record.raw_output = res.answer.text;
                record.res_transcript = std::move(res.transcript);
                record.has_res_debate = true;
                break;
            }
            case RunMode::drag:
            case RunMode::drag_no_asymmetry: {
                RetDebateConfig ret_cfg{config.ret_rounds, config.epsilon, config.max_pool_size,
                                        config.k};
                auto ret = run_retrieval_debate(instance.question, *index, gateway, ret_cfg,
                                                templates);
                record.ret_transcript = std::move(ret.transcript);
                record.final_pool = ret.pool.queries;
                record.evidence = std::move(ret.evidence);
                record.has_retrieval = true;
                record.has_ret_debate = true;

                ResDebateConfig res_cfg{config.res_rounds,
                                        config.mode != RunMode::drag_no_asymmetry,
                                        /*knowledge_only=*/false};
                auto res = run_response_debate(instance.question, record.evidence, gateway,
                                               res_cfg, templates);
                record.raw_output = res.answer.text;
                record.res_transcript = std::move(res.transcript);
                record.has_res_debate = true;
                break;
            }
            case RunMode::drag_ret_only: {
                RetDebateConfig ret_cfg{config.ret_rounds, config.epsilon, config.max_pool_size,
                                        config.k};
                auto ret = run_retrieval_debate(instance.question, *index, gateway, ret_cfg,
                                                templates);
                record.ret_transcript = std::move(ret.transcript);
                record.final_pool = ret.pool.queries;
                record.evidence = std::move(ret.evidence);
                record.has_retrieval = true;
                record.has_ret_debate = true;

                auto prompt = render_template(
                    templates.res_proponent_init,
                    {{"question", instance.question},
                     {"documents", format_evidence_blocks(record.evidence.blocks())}});
                record.raw_output =
                    gateway.complete(single_user_request(std::move(prompt), Stage::baseline))
                        .content;
                break;
            }
            case RunMode::drag_res_only: {
                auto pool = init_pool(instance.question);
                EvidenceCache cache(*index, config.k);
                record.evidence = cache.gather(pool, gateway);
                record.final_pool = pool.queries;
                record.has_retrieval = true;

                ResDebateConfig res_cfg{config.res_rounds, /*asymmetric=*/true,
                                        /*knowledge_only=*/false};
                auto res = run_response_debate(instance.question, record.evidence, gateway,
                                               res_cfg, templates);
                record.raw_output = res.answer.text;
                record.res_transcript = std::move(res.transcript);
                record.has_res_debate = true;
                break;
            }
        }
        record.extracted = extract_for(instance, record.raw_output);
        record.em = exact_match(record.extracted, instance.golden_answers);
        record.f1 = token_f1(record.extracted, instance.golden_answers);
    } catch (const std::exception& e) {
        record.failed = true;
        record.failure_reason = e.what();
        record.raw_output.clear();
        record.extracted.clear();
        record.em = 0.0;
        record.f1 = 0.0;
    }
    record.calls = gateway.log();
    return record;
}

RunResult run_pipeline(const PipelineConfig& config) {
    const PromptTemplates templates = config.templates_dir.empty()
                                          ? PromptTemplates::defaults()
                                          : PromptTemplates::load_dir(config.templates_dir);
    auto dataset = load_dataset(config.dataset_path, config.limit, config.seed);

    std::shared_ptr<LlmBackend> backend;
    if (config.backend == "scripted") {
        if (config.script_path.empty()) {
            throw std::runtime_error("scripted backend requires --script FILE");
        }
        backend = std::make_shared<ScriptedBackend>(
            ScriptedBackend::load_script_file(config.script_path));
    } else if (config.backend == "api") {
        backend = std::make_shared<ApiBackend>(ApiBackendConfig{config.api_base, config.api_key});
    } else {
        throw std::runtime_error("unknown backend: " + config.backend +
                                 " (expected scripted or api)");
    }

    std::optional<CorpusIndex> index;
    if (mode_uses_retrieval(config.mode)) {
        if (!config.index_path.empty()) {
            index = CorpusIndex::load(config.index_path);
        } else if (!config.corpus_path.empty()) {
            RetrieverConfig rcfg;
            rcfg.k_default = config.k;
            index = CorpusIndex::ingest(read_corpus_file(config.corpus_path), rcfg);
        } else {
            throw std::runtime_error("mode " + std::string(run_mode_name(config.mode)) +
                                     " requires --corpus or --index");
        }
    }
    const CorpusIndex* index_ptr = index ? &*index : nullptr;

    RunResult result;
    result.records.resize(dataset.size());
    if (config.parallel <= 1) {
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            result.records[i] = run_question(dataset[i], config, index_ptr, backend, templates);
        }
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                auto i = next.fetch_add(1);
                if (i >= dataset.size()) return;
                result.records[i] =
                    run_question(dataset[i], config, index_ptr, backend, templates);
            }
        };
        std::vector<std::thread> threads;
        auto n_threads = std::min(config.parallel, dataset.size());
        threads.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::vector<InstanceStats> stats;
    stats.reserve(result.records.size());
    for (const auto& r : result.records) stats.push_back(stats_for(r));
    result.report = aggregate(stats);
    return result;
}

std::string question_record_to_json_line(const QuestionRecord& record) {
    json j;
    j["id"] = record.instance.id;
    j["question"] = record.instance.question;
    j["golden_answers"] = record.instance.golden_answers;
    j["answer_type"] =
        record.instance.answer_type == AnswerType::yes_no ? "yes_no" : "free_text";
    j["mode"] = record.mode_name;
    j["failed"] = record.failed;
    j["failure_reason"] = record.failure_reason;
    j["raw_output"] = record.raw_output;
    j["extracted"] = record.extracted;
    j["em"] = record.em;
    j["f1"] = record.f1;
    j["calls"] = calls_to_json(record.calls);
    j["retrieval_debate"] =
        record.has_ret_debate ? ret_transcript_to_json(record.ret_transcript) : json(nullptr);
    j["response_debate"] =
        record.has_res_debate ? res_transcript_to_json(record.res_transcript) : json(nullptr);
    j["final_pool"] = record.has_retrieval ? queries_to_json(record.final_pool) : json(nullptr);
    j["evidence"] = record.has_retrieval ? evidence_to_json(record.evidence) : json(nullptr);
    return j.dump();
}

std::string format_report_json(const MetricReport& report, const PipelineConfig& config) {
    // Metric numbers are emitted as fixed two-decimal text (EM/F1 on the
    // 0-100 scale), which nlohmann's double serialization cannot promise.
    std::ostringstream out;
    out << "{\n";
    out << "  \"config\": " << config_to_json(config).dump() << ",\n";
    out << "  \"metrics\": {\n";
    out << "    \"em\": " << two_decimals(report.em * 100.0) << ",\n";
    out << "    \"f1\": " << two_decimals(report.f1 * 100.0) << ",\n";
    out << "    \"n\": " << report.n << ",\n";
    out << "    \"avg_ret_rounds\": " << two_decimals(report.avg_ret_rounds) << ",\n";
    out << "    \"avg_query_count\": " << two_decimals(report.avg_query_count) << ",\n";
    out << "    \"avg_llm_calls\": " << two_decimals(report.avg_llm_calls) << ",\n";
    out << "    \"avg_retriever_calls\": " << two_decimals(report.avg_retriever_calls) << "\n";
    out << "  }\n";
    out << "}\n";
    return out.str();
}

void write_outputs(const RunResult& result, const PipelineConfig& config,
                   const std::string& out_dir) {
    std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("cannot create output directory: " + out_dir);
    }

    {
        std::ofstream out(dir / "transcripts.jsonl", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write transcripts file in " + out_dir);
        for (const auto& r : result.records) {
            out << question_record_to_json_line(r) << "\n";
        }
    }
    {
        std::ofstream out(dir / "report.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report file in " + out_dir);
        out << format_report_json(result.report, config);
    }
}

namespace {

std::vector<json> read_transcript_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read transcripts file: " + path);
    std::vector<json> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            lines.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw std::runtime_error("transcripts file " + path + " line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
    }
    return lines;
}

InstanceStats stats_from_line(const json& j) {
    InstanceStats s;
    // Metrics are recomputed from raw output and gold answers, not trusted
    // from the file.
    QAInstance inst;
    inst.question = j.value("question", std::string{});
    for (const auto& g : j.at("golden_answers")) inst.golden_answers.push_back(g.get<std::string>());
    inst.answer_type =
        j.value("answer_type", std::string{}) == "yes_no" ? AnswerType::yes_no
                                                          : AnswerType::free_text;
    const auto raw = j.value("raw_output", std::string{});
    const bool failed = j.value("failed", false);
    const auto extracted = failed ? std::string{} : extract_for(inst, raw);
    s.em = failed ? 0.0 : exact_match(extracted, inst.golden_answers);
    s.f1 = failed ? 0.0 : token_f1(extracted, inst.golden_answers);

    if (j.contains("retrieval_debate") && !j["retrieval_debate"].is_null()) {
        s.ret_rounds = j["retrieval_debate"]["rounds"].size();
    }
    if (j.contains("final_pool") && !j["final_pool"].is_null()) {
        s.query_count = j["final_pool"].size();
    }
    if (j.contains("calls")) {
        s.llm_calls = j["calls"].value("llm_total", std::int64_t{0});
        s.retriever_calls = j["calls"].value("retriever_calls", std::int64_t{0});
    }
    return s;
}

}  // namespace

MetricReport score_transcripts(const std::string& transcripts_path) {
    std::vector<InstanceStats> stats;
    const auto lines = read_transcript_lines(transcripts_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            stats.push_back(stats_from_line(lines[i]));
        } catch (const json::exception& e) {
            throw std::runtime_error("transcripts file " + transcripts_path + " record " +
                                     std::to_string(i + 1) + ": " + e.what());
        }
    }
    if (stats.empty()) throw std::runtime_error("transcripts file has no records");
    return aggregate(stats);
}

TranscriptStats stats_from_transcripts(const std::string& transcripts_path) {
    auto report = score_transcripts(transcripts_path);
    TranscriptStats s;
    s.n = report.n;
    s.avg_ret_rounds = report.avg_ret_rounds;
    s.avg_query_count = report.avg_query_count;
    s.avg_llm_calls = report.avg_llm_calls;
    s.avg_retriever_calls = report.avg_retriever_calls;
    return s;
}

}  // namespace drag
