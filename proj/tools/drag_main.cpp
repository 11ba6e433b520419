#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "drag/pipeline.hpp"
#include "drag/retriever.hpp"

namespace {

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string{};
}

// Overlays config-file values, then environment, onto the defaults. CLI
// flags are applied last by the caller, so precedence is
// flag > env > config file > default.
void apply_config_file(drag::PipelineConfig& cfg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read config file: " + path);
    nlohmann::json j;
    in >> j;
    if (j.contains("mode")) cfg.mode = drag::parse_run_mode(j["mode"].get<std::string>());
    cfg.k = j.value("k", cfg.k);
    cfg.ret_rounds = j.value("ret_rounds", cfg.ret_rounds);
    cfg.res_rounds = j.value("res_rounds", cfg.res_rounds);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.max_pool_size = j.value("max_pool_size", cfg.max_pool_size);
    cfg.backend = j.value("backend", cfg.backend);
    cfg.script_path = j.value("script", cfg.script_path);
    cfg.api_base = j.value("api_base", cfg.api_base);
    cfg.model = j.value("model", cfg.model);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
    cfg.corpus_path = j.value("corpus", cfg.corpus_path);
    cfg.index_path = j.value("index", cfg.index_path);
    cfg.dataset_path = j.value("dataset", cfg.dataset_path);
    cfg.out_dir = j.value("out", cfg.out_dir);
    cfg.templates_dir = j.value("templates", cfg.templates_dir);
    cfg.limit = j.value("limit", cfg.limit);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.parallel = j.value("parallel", cfg.parallel);
    cfg.call_budget = j.value("budget", cfg.call_budget);
}

int cmd_ingest(const std::string& corpus_path, const std::string& out_path, std::size_t k,
               double k1, double b) {
    drag::RetrieverConfig cfg;
    cfg.k_default = k;
    cfg.k1 = k1;
    cfg.b = b;
    auto index = drag::CorpusIndex::ingest(drag::read_corpus_file(corpus_path), cfg);
    index.save(out_path);
    std::cout << "indexed " << index.doc_count() << " documents (avg length "
              << index.avg_doc_len() << " tokens) -> " << out_path << "\n";
    return 0;
}

int cmd_run(const drag::PipelineConfig& cfg) {
    auto result = drag::run_pipeline(cfg);
    drag::write_outputs(result, cfg, cfg.out_dir);

    std::size_t failures = 0;
    for (const auto& r : result.records) failures += r.failed ? 1 : 0;
    const auto& m = result.report;
    std::printf("mode=%s n=%zu em=%.2f f1=%.2f", drag::run_mode_name(cfg.mode), m.n,
                m.em * 100.0, m.f1 * 100.0);
    std::printf(" avg_rounds=%.2f avg_queries=%.2f avg_llm=%.2f avg_retriever=%.2f",
                m.avg_ret_rounds, m.avg_query_count, m.avg_llm_calls, m.avg_retriever_calls);
    if (failures > 0) std::printf(" failures=%zu", failures);
    std::printf("\noutputs: %s\n",
                (std::filesystem::path(cfg.out_dir) / "transcripts.jsonl").string().c_str());
    return 0;
}

int cmd_score(const std::string& transcripts, const std::string& out_path) {
    auto report = drag::score_transcripts(transcripts);
    std::ostringstream body;
    char buf[64];
    auto two = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };
    body << "{\n  \"metrics\": {\n";
    body << "    \"em\": " << two(report.em * 100.0) << ",\n";
    body << "    \"f1\": " << two(report.f1 * 100.0) << ",\n";
    body << "    \"n\": " << report.n << ",\n";
    body << "    \"avg_ret_rounds\": " << two(report.avg_ret_rounds) << ",\n";
    body << "    \"avg_query_count\": " << two(report.avg_query_count) << ",\n";
    body << "    \"avg_llm_calls\": " << two(report.avg_llm_calls) << ",\n";
    body << "    \"avg_retriever_calls\": " << two(report.avg_retriever_calls) << "\n";
    body << "  }\n}\n";
    if (out_path.empty()) {
        std::cout << body.str();
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << body.str();
    }
    return 0;
}

int cmd_stats(const std::string& transcripts) {
    auto s = drag::stats_from_transcripts(transcripts);
    std::printf("%-22s %zu\n", "n", s.n);
    std::printf("%-22s %.2f\n", "avg_debate_rounds", s.avg_ret_rounds);
    std::printf("%-22s %.2f\n", "avg_query_count", s.avg_query_count);
    std::printf("%-22s %.2f\n", "avg_llm_calls", s.avg_llm_calls);
    std::printf("%-22s %.2f\n", "avg_retriever_calls", s.avg_retriever_calls);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drag: debate-augmented retrieval QA engine"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Build a retrieval index from a corpus file");
    std::string ingest_corpus, ingest_out;
    std::size_t ingest_k = 3;
    double ingest_k1 = 1.2, ingest_b = 0.75;
    ingest->add_option("--corpus", ingest_corpus, "Corpus file (JSONL: id/title/contents)")
        ->required();
    ingest->add_option("--out", ingest_out, "Output index file")->required();
    ingest->add_option("--k", ingest_k, "Default passages per query");
    ingest->add_option("--k1", ingest_k1, "Term-frequency saturation");
    ingest->add_option("--b", ingest_b, "Length normalization in [0,1]");

    // run
    auto* run = app.add_subcommand("run", "Run an experiment over a dataset");
    drag::PipelineConfig cfg;
    std::string mode_name = "drag";
    std::string config_path;
    run->add_option("--config", config_path, "JSON config file (lowest precedence)");
    run->add_option("--mode", mode_name,
                    "naive_gen|naive_rag|mad|drag|drag_ret_only|drag_res_only|drag_no_asymmetry");
    run->add_option("--dataset", cfg.dataset_path, "Dataset file (JSONL)");
    run->add_option("--corpus", cfg.corpus_path, "Corpus file (ingested in memory)");
    run->add_option("--index", cfg.index_path, "Prebuilt index file");
    run->add_option("--k", cfg.k, "Passages per query");
    run->add_option("--ret-rounds", cfg.ret_rounds, "Max retrieval debate rounds");
    run->add_option("--res-rounds", cfg.res_rounds, "Response debate rounds");
    run->add_option("--epsilon", cfg.epsilon, "Pool convergence threshold");
    run->add_option("--max-pool-size", cfg.max_pool_size, "Query pool cap");
    run->add_option("--limit", cfg.limit, "Keep only the first N instances");
    run->add_option("--seed", cfg.seed, "Deterministic shuffle seed before --limit");
    run->add_option("--backend", cfg.backend, "scripted|api");
    run->add_option("--script", cfg.script_path, "Scripted backend rule file");
    run->add_option("--api-base", cfg.api_base, "OpenAI-compatible endpoint base URL");
    run->add_option("--model", cfg.model, "Model id for the api backend");
    run->add_option("--temperature", cfg.temperature, "Sampling temperature");
    run->add_option("--max-tokens", cfg.max_tokens, "Max generated tokens per call");
    run->add_option("--templates", cfg.templates_dir, "Prompt template directory");
    run->add_option("--out", cfg.out_dir, "Output directory")->required();
    run->add_option("--parallel", cfg.parallel, "Concurrent question workers");
    run->add_option("--budget", cfg.call_budget, "Max LLM calls per question");

    // score
    auto* score = app.add_subcommand("score", "Recompute the report from a transcripts file");
    std::string score_transcripts_path, score_out;
    score->add_option("--transcripts", score_transcripts_path, "transcripts.jsonl path")
        ->required();
    score->add_option("--out", score_out, "Write report here instead of stdout");

    // stats
    auto* stats = app.add_subcommand("stats", "Round/query/call averages from transcripts");
    std::string stats_transcripts_path;
    stats->add_option("--transcripts", stats_transcripts_path, "transcripts.jsonl path")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            return cmd_ingest(ingest_corpus, ingest_out, ingest_k, ingest_k1, ingest_b);
        }
        if (run->parsed()) {
            // Precedence: flag > environment > config file > default. Flags
            // already landed in cfg, so rebuild the low layers and re-apply
            // only the flags the user actually passed.
            drag::PipelineConfig layered;
            if (!config_path.empty()) apply_config_file(layered, config_path);
            if (auto v = env_or_empty("DRAG_API_BASE"); !v.empty()) layered.api_base = v;
            if (auto v = env_or_empty("DRAG_API_KEY"); !v.empty()) layered.api_key = v;

            layered.mode = run->count("--mode") ? drag::parse_run_mode(mode_name) : layered.mode;
            auto overlay = [&](const char* flag, auto& dst, const auto& src) {
                if (run->count(flag)) dst = src;
            };
            overlay("--dataset", layered.dataset_path, cfg.dataset_path);
            overlay("--corpus", layered.corpus_path, cfg.corpus_path);
            overlay("--index", layered.index_path, cfg.index_path);
            overlay("--k", layered.k, cfg.k);
            overlay("--ret-rounds", layered.ret_rounds, cfg.ret_rounds);
            overlay("--res-rounds", layered.res_rounds, cfg.res_rounds);
            overlay("--epsilon", layered.epsilon, cfg.epsilon);
            overlay("--max-pool-size", layered.max_pool_size, cfg.max_pool_size);
            overlay("--limit", layered.limit, cfg.limit);
            overlay("--seed", layered.seed, cfg.seed);
            overlay("--backend", layered.backend, cfg.backend);
            overlay("--script", layered.script_path, cfg.script_path);
            overlay("--api-base", layered.api_base, cfg.api_base);
            overlay("--model", layered.model, cfg.model);
            overlay("--temperature", layered.temperature, cfg.temperature);
            overlay("--max-tokens", layered.max_tokens, cfg.max_tokens);
            overlay("--templates", layered.templates_dir, cfg.templates_dir);
            overlay("--out", layered.out_dir, cfg.out_dir);
            overlay("--parallel", layered.parallel, cfg.parallel);
            overlay("--budget", layered.call_budget, cfg.call_budget);
            return cmd_run(layered);
        }
        if (score->parsed()) return cmd_score(score_transcripts_path, score_out);
        if (stats->parsed()) return cmd_stats(stats_transcripts_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
