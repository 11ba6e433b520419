#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "drag/gateway.hpp"
#include "drag/prompts.hpp"
#include "drag/retriever.hpp"

namespace drag {

enum class QueryOrigin { original, optimized, expanded };

const char* query_origin_name(QueryOrigin origin);

/// Case-folded, trimmed form used for query identity.
std::string normalize_query_text(const std::string& text);

struct Query {
    std::string text;
    QueryOrigin origin = QueryOrigin::original;
    std::size_t round_added = 0;
};

/// The evolving retrieval query pool. Non-empty at all times; entries
/// unique by normalized text; keeps the original question for the
/// never-empty guard.
struct QueryPool {
    std::vector<Query> queries;
    std::string original_question;

    bool contains(const std::string& text) const;
    std::vector<std::string> texts() const;
    std::vector<std::string> normalized_texts() const;
};

struct EvidenceEntry {
    std::string query_text;
    std::string normalized_text;
    std::vector<ScoredPassage> passages;
};

/// Top-k passages per pool query, in pool order.
struct EvidenceSet {
    std::vector<EvidenceEntry> entries;

    const EvidenceEntry* find(const std::string& query_text) const;
    std::vector<std::pair<std::string, std::vector<ScoredPassage>>> blocks() const;
    std::vector<std::string> all_passage_texts() const;
};

enum class RefinementKind { keep_all, revise };

/// The round outcome applied to the pool: keep it unchanged, or revise it
/// by retaining a subset, rewriting queries, and/or adding new ones.
struct RefinementOp {
    RefinementKind kind = RefinementKind::keep_all;
    std::vector<std::string> retained;
    std::vector<std::pair<std::string, std::string>> optimizations;  // (old, new)
    std::vector<std::string> expansions;
    bool fallback = false;  // set when malformed agent output forced keep_all
};

struct RetDebateConfig {
    std::size_t max_rounds = 3;
    std::size_t epsilon = 0;
    std::size_t max_pool_size = 5;
    std::size_t k = 3;
};

enum class RetTermination { judge_keep, converged, round_cap };

const char* ret_termination_name(RetTermination reason);

enum class Verdict { proponent, challenger };

struct RetRound {
    std::vector<Query> pool_before;
    std::string proponent_argument;
    std::string challenger_argument;
    RefinementOp parsed_op;
    std::string judge_raw;
    Verdict judge_verdict = Verdict::proponent;
    bool judge_flagged = false;  // verdict defaulted because reply named both/neither agent
    std::vector<Query> pool_after;
};

struct RetTranscript {
    std::vector<RetRound> rounds;
    RetTermination termination_reason = RetTermination::round_cap;
};

/// Per-question retrieval cache: one retrieve call per distinct normalized
/// query text for the whole run.
class EvidenceCache {
public:
    EvidenceCache(const CorpusIndex& index, std::size_t k) : index_(index), k_(k) {}

    /// Retrieves any pool queries not yet cached (recording each retriever
    /// invocation on the gateway) and returns evidence covering the pool.
    EvidenceSet gather(const QueryPool& pool, Gateway& gateway);

private:
    const CorpusIndex& index_;
    std::size_t k_;
    std::map<std::string, std::vector<ScoredPassage>> cache_;
};

QueryPool init_pool(const std::string& question);

std::string build_proponent_prompt(const PromptTemplates& templates, const std::string& question,
                                   const QueryPool& pool, const EvidenceSet& evidence);
std::string build_challenger_prompt(const PromptTemplates& templates, const std::string& question,
                                    const QueryPool& pool, const EvidenceSet& evidence);
std::string build_judge_prompt(const PromptTemplates& templates, const std::string& question,
                               const QueryPool& pool, const EvidenceSet& evidence,
                               const std::string& proponent_argument,
                               const std::string& challenger_argument);

/// The last well-formed action line wins:
///   Query Optimization: [A] -> [B]   (A must be a pool member, normalized)
///   Query Expansion: [B]
/// Both the paper's arrow and ASCII "->" are accepted. A reply with no
/// well-formed action falls back to keep_all with the fallback flag set.
RefinementOp parse_challenger_move(const std::string& reply, const QueryPool& pool);

/// Case-insensitive substring match on the agent names; both or neither
/// present defaults to proponent and sets `flagged`.
Verdict parse_judge_verdict(const std::string& reply, bool* flagged = nullptr);

/// Applies the round outcome. Revise keeps (retained ∩ pool) in pool order,
/// then appends optimization rewrites and expansions, dedupes by normalized
/// text, truncates to max_pool_size keeping the oldest entries, and
/// reinstates the original question if everything was dropped.
QueryPool apply_refinement(const QueryPool& pool, const RefinementOp& op, std::size_t round,
                           std::size_t max_pool_size);

/// Cardinality of the symmetric difference of the normalized query-text sets.
std::size_t pool_distance(const QueryPool& a, const QueryPool& b);

struct RetDebateResult {
    QueryPool pool;
    EvidenceSet evidence;
    RetTranscript transcript;
};

/// Stage-1 debate: per round, gather evidence, let proponent and challenger
/// argue, parse the challenger's move, let the judge pick, and apply the
/// winning refinement. Terminates on a proponent verdict, on pool distance
/// <= epsilon after a challenger win, or at max_rounds. Exactly 3
/// retrieval-stage LLM calls per executed round.
RetDebateResult run_retrieval_debate(const std::string& question, const CorpusIndex& index,
                                     Gateway& gateway, const RetDebateConfig& config,
                                     const PromptTemplates& templates);

}  // namespace drag
