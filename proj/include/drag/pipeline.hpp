#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drag/evaluation.hpp"
#include "drag/gateway.hpp"
#include "drag/response_debate.hpp"
#include "drag/retrieval_debate.hpp"
#include "drag/retriever.hpp"

namespace drag {

enum class RunMode {
    naive_gen,
    naive_rag,
    mad,
    drag,
    drag_ret_only,
    drag_res_only,
    drag_no_asymmetry,
};

const char* run_mode_name(RunMode mode);
RunMode parse_run_mode(const std::string& name);
bool mode_uses_retrieval(RunMode mode);

struct PipelineConfig {
    RunMode mode = RunMode::drag;
    std::size_t k = 3;
    std::size_t ret_rounds = 3;
    std::size_t res_rounds = 3;
    std::size_t epsilon = 0;
    std::size_t max_pool_size = 5;

    std::string backend = "scripted";  // "scripted" | "api"
    std::string script_path;
    std::string api_base;
    std::string api_key;
    std::string model;
    double temperature = 0.0;
    int max_tokens = 512;

    std::string corpus_path;
    std::string index_path;
    std::string dataset_path;
    std::string out_dir;
    std::string templates_dir;

    std::int64_t limit = -1;  // < 0: whole dataset
    std::int64_t seed = -1;   // >= 0: deterministic shuffle before the limit cut
    std::size_t parallel = 1;
    std::int64_t call_budget = 40;
};

struct QuestionRecord {
    QAInstance instance;
    std::string mode_name;
    bool failed = false;
    std::string failure_reason;
    std::string raw_output;
    std::string extracted;
    double em = 0.0;
    double f1 = 0.0;
    CallLog calls;

    bool has_retrieval = false;
    bool has_ret_debate = false;
    RetTranscript ret_transcript;
    std::vector<Query> final_pool;
    EvidenceSet evidence;

    bool has_res_debate = false;
    ResTranscript res_transcript;
};

struct RunResult {
    std::vector<QuestionRecord> records;
    MetricReport report;
};

/// Line-delimited {"id", "question", "golden_answers", ["answer_type"]}
/// records. Errors name the offending line. seed >= 0 shuffles with a
/// platform-stable Fisher-Yates before the limit cut; limit >= 0 keeps the
/// first `limit` instances.
std::vector<QAInstance> load_dataset(const std::string& path, std::int64_t limit = -1,
                                     std::int64_t seed = -1);

/// Runs one question in the configured mode. Gateway failures are recorded
/// on the returned record, not thrown.
QuestionRecord run_question(const QAInstance& instance, const PipelineConfig& config,
                            const CorpusIndex* index, std::shared_ptr<LlmBackend> backend,
                            const PromptTemplates& templates);

/// Full experiment: dataset load, per-question orchestration (bounded
/// worker pool when parallel > 1), aggregation.
RunResult run_pipeline(const PipelineConfig& config);

/// Writes transcripts.jsonl (one question per line) and report.json into
/// out_dir. Byte-stable for identical inputs.
void write_outputs(const RunResult& result, const PipelineConfig& config,
                   const std::string& out_dir);

std::string question_record_to_json_line(const QuestionRecord& record);
std::string format_report_json(const MetricReport& report, const PipelineConfig& config);

/// Recomputes the metric report from a transcripts file alone.
MetricReport score_transcripts(const std::string& transcripts_path);

struct TranscriptStats {
    std::size_t n = 0;
    double avg_ret_rounds = 0.0;
    double avg_query_count = 0.0;
    double avg_llm_calls = 0.0;
    double avg_retriever_calls = 0.0;
};

/// Round/query/call averages from a transcripts file.
TranscriptStats stats_from_transcripts(const std::string& transcripts_path);

}  // namespace drag
