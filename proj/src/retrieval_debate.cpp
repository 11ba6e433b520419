#include "drag/retrieval_debate.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace drag {

namespace {

std::string ascii_fold(const std::string& text) {
    std::string out = text;
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 0x20);
    }
    return out;
}

std::string trim(const std::string& text) {
    auto begin = text.find_first_not_of(" \t\r\n\f\v");
    if (begin == std::string::npos) return {};
    auto end = text.find_last_not_of(" \t\r\n\f\v");
    return text.substr(begin, end - begin + 1);
}

ChatRequest make_request(std::string prompt, Stage stage) {
    ChatRequest req;
    req.messages.push_back(ChatMessage{Role::user, std::move(prompt)});
    req.stage = stage;
    return req;
}

struct ParsedAction {
    std::size_t position = 0;
    bool is_optimization = false;
    std::string old_query;
    std::string new_query;
};

// Extracts "[...]" starting at or after `from`; returns false when the next
// non-space character is not '['.
bool read_bracketed(const std::string& text, std::size_t from, std::string* content,
                    std::size_t* end) {
    std::size_t i = from;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i >= text.size() || text[i] != '[') return false;
    auto close = text.find(']', i + 1);
    if (close == std::string::npos) return false;
    *content = text.substr(i + 1, close - i - 1);
    *end = close + 1;
    return true;
}

// Accepts the paper's arrow (U+2192) or ASCII "->" between the brackets.
bool read_arrow(const std::string& text, std::size_t from, std::size_t* end) {
    std::size_t i = from;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (text.compare(i, 3, "\xE2\x86\x92") == 0) {
        *end = i + 3;
        return true;
    }
    if (text.compare(i, 2, "->") == 0) {
        *end = i + 2;
        return true;
    }
    return false;
}

}  // namespace

const char* query_origin_name(QueryOrigin origin) {
    switch (origin) {
        case QueryOrigin::original: return "original";
        case QueryOrigin::optimized: return "optimized";
        case QueryOrigin::expanded: return "expanded";
    }
    return "original";
}

const char* ret_termination_name(RetTermination reason) {
    switch (reason) {
        case RetTermination::judge_keep: return "judge_keep";
        case RetTermination::converged: return "converged";
        case RetTermination::round_cap: return "round_cap";
    }
    return "round_cap";
}

std::string normalize_query_text(const std::string& text) {
    return ascii_fold(trim(text));
}

bool QueryPool::contains(const std::string& text) const {
    auto norm = normalize_query_text(text);
    return std::any_of(queries.begin(), queries.end(), [&](const Query& q) {
        return normalize_query_text(q.text) == norm;
    });
}

std::vector<std::string> QueryPool::texts() const {
    std::vector<std::string> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(q.text);
    return out;
}

std::vector<std::string> QueryPool::normalized_texts() const {
    std::vector<std::string> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(normalize_query_text(q.text));
    return out;
}

const EvidenceEntry* EvidenceSet::find(const std::string& query_text) const {
    auto norm = normalize_query_text(query_text);
    for (const auto& e : entries) {
        if (e.normalized_text == norm) return &e;
    }
    return nullptr;
}

std::vector<std::pair<std::string, std::vector<ScoredPassage>>> EvidenceSet::blocks() const {
    std::vector<std::pair<std::string, std::vector<ScoredPassage>>> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.emplace_back(e.query_text, e.passages);
    return out;
}

std::vector<std::string> EvidenceSet::all_passage_texts() const {
    std::vector<std::string> out;
    for (const auto& e : entries) {
        for (const auto& sp : e.passages) out.push_back(sp.passage.text);
    }
    return out;
}

EvidenceSet EvidenceCache::gather(const QueryPool& pool, Gateway& gateway) {
    EvidenceSet evidence;
    for (const auto& q : pool.queries) {
        auto norm = normalize_query_text(q.text);
        auto it = cache_.find(norm);
        if (it == cache_.end()) {
            auto passages = index_.retrieve(q.text, k_);
            gateway.record_retriever_call();
            it = cache_.emplace(norm, std::move(passages)).first;
        }
        evidence.entries.push_back(EvidenceEntry{q.text, norm, it->second});
    }
    return evidence;
}

QueryPool init_pool(const std::string& question) {
    auto trimmed = trim(question);
    if (trimmed.empty()) {
        throw std::runtime_error("init_pool: question is empty");
    }
    QueryPool pool;
    pool.original_question = trimmed;
    pool.queries.push_back(Query{trimmed, QueryOrigin::original, 0});
    return pool;
}

namespace {

std::string build_debater_prompt(const std::string& tmpl, const std::string& question,
                                 const QueryPool& pool, const EvidenceSet& evidence) {
    return render_template(tmpl, {
                                     {"question", question},
                                     {"queries", format_query_list(pool.texts())},
                                     {"documents", format_evidence_blocks(evidence.blocks())},
                                 });
}

}  // namespace

std::string build_proponent_prompt(const PromptTemplates& templates, const std::string& question,
                                   const QueryPool& pool, const EvidenceSet& evidence) {
    return build_debater_prompt(templates.ret_proponent, question, pool, evidence);
}

std::string build_challenger_prompt(const PromptTemplates& templates, const std::string& question,
                                    const QueryPool& pool, const EvidenceSet& evidence) {
    return build_debater_prompt(templates.ret_challenger, question, pool, evidence);
}

std::string build_judge_prompt(const PromptTemplates& templates, const std::string& question,
                               const QueryPool& pool, const EvidenceSet& evidence,
                               const std::string& proponent_argument,
                               const std::string& challenger_argument) {
    return render_template(
        templates.ret_judge,
        {
            {"question", question},
            {"queries", format_query_list(pool.texts())},
            {"documents", format_evidence_blocks(evidence.blocks())},
            {"arguments", format_arguments({{"Proponent Agent", proponent_argument},
                                            {"Challenger Agent", challenger_argument}})},
        });
}

RefinementOp parse_challenger_move(const std::string& reply, const QueryPool& pool) {
    static const std::string kOptTag = "query optimization:";
    static const std::string kExpTag = "query expansion:";
    const std::string folded = ascii_fold(reply);

    ParsedAction best;
    bool found = false;
    for (std::size_t pos = 0; pos < folded.size();) {
        auto opt_at = folded.find(kOptTag, pos);
        auto exp_at = folded.find(kExpTag, pos);
        auto at = std::min(opt_at, exp_at);
        if (at == std::string::npos) break;

        ParsedAction action;
        action.position = at;
        bool well_formed = false;
        if (at == opt_at) {
            action.is_optimization = true;
            std::string old_q, new_q;
            std::size_t end = 0;
            if (read_bracketed(reply, at + kOptTag.size(), &old_q, &end) &&
                read_arrow(reply, end, &end) && read_bracketed(reply, end, &new_q, &end)) {
                action.old_query = trim(old_q);
                action.new_query = trim(new_q);
                well_formed = !action.old_query.empty() && !action.new_query.empty() &&
                              pool.contains(action.old_query);
            }
        } else {
            std::string new_q;
            std::size_t end = 0;
            if (read_bracketed(reply, at + kExpTag.size(), &new_q, &end)) {
                action.new_query = trim(new_q);
                well_formed = !action.new_query.empty();
            }
        }
        if (well_formed) {
            best = action;
            found = true;
        }
        pos = at + 1;
    }

    RefinementOp op;
    if (!found) {
        op.kind = RefinementKind::keep_all;
        op.fallback = true;
        return op;
    }
    op.kind = RefinementKind::revise;
    if (best.is_optimization) {
        auto old_norm = normalize_query_text(best.old_query);
        for (const auto& q : pool.queries) {
            if (normalize_query_text(q.text) != old_norm) op.retained.push_back(q.text);
        }
        op.optimizations.emplace_back(best.old_query, best.new_query);
    } else {
        op.retained = pool.texts();
        op.expansions.push_back(best.new_query);
    }
    return op;
}

Verdict parse_judge_verdict(const std::string& reply, bool* flagged) {
    const std::string folded = ascii_fold(reply);
    const bool has_prop = folded.find("proponent") != std::string::npos;
    const bool has_chal = folded.find("challenger") != std::string::npos;
    if (flagged) *flagged = has_prop == has_chal;
    if (has_chal && !has_prop) return Verdict::challenger;
    return Verdict::proponent;
}

QueryPool apply_refinement(const QueryPool& pool, const RefinementOp& op, std::size_t round,
                           std::size_t max_pool_size) {
    if (op.kind == RefinementKind::keep_all) return pool;

    for (const auto& [old_q, new_q] : op.optimizations) {
        if (!pool.contains(old_q)) {
            throw std::runtime_error("apply_refinement: optimization references non-member query: " +
                                     old_q);
        }
    }

    std::set<std::string> retained_norms;
    for (const auto& r : op.retained) retained_norms.insert(normalize_query_text(r));

    QueryPool next;
    next.original_question = pool.original_question;
    std::set<std::string> seen;
    auto push_unique = [&](Query q) {
        auto norm = normalize_query_text(q.text);
        if (norm.empty() || !seen.insert(norm).second) return;
        next.queries.push_back(std::move(q));
    };

    for (const auto& q : pool.queries) {
        if (retained_norms.count(normalize_query_text(q.text)) != 0) push_unique(q);
    }
    for (const auto& [old_q, new_q] : op.optimizations) {
        push_unique(Query{trim(new_q), QueryOrigin::optimized, round});
    }
    for (const auto& e : op.expansions) {
        push_unique(Query{trim(e), QueryOrigin::expanded, round});
    }

    if (next.queries.size() > max_pool_size) next.queries.resize(max_pool_size);
    if (next.queries.empty()) {
        next.queries.push_back(Query{pool.original_question, QueryOrigin::original, 0});
    }
    return next;
}

std::size_t pool_distance(const QueryPool& a, const QueryPool& b) {
    std::set<std::string> sa, sb;
    for (const auto& q : a.queries) sa.insert(normalize_query_text(q.text));
    for (const auto& q : b.queries) sb.insert(normalize_query_text(q.text));
    std::size_t diff = 0;
    for (const auto& t : sa) diff += sb.count(t) == 0 ? 1 : 0;
    for (const auto& t : sb) diff += sa.count(t) == 0 ? 1 : 0;
    return diff;
}

RetDebateResult run_retrieval_debate(const std::string& question, const CorpusIndex& index,
                                     Gateway& gateway, const RetDebateConfig& config,
                                     const PromptTemplates& templates) {
    RetDebateResult result;
    result.pool = init_pool(question);
    EvidenceCache cache(index, config.k);
    result.transcript.termination_reason = RetTermination::round_cap;

    for (std::size_t round = 1; round <= config.max_rounds; ++round) {
        auto evidence = cache.gather(result.pool, gateway);

        RetRound record;
        record.pool_before = result.pool.queries;

        auto prop_prompt = build_proponent_prompt(templates, question, result.pool, evidence);
        record.proponent_argument =
            gateway.complete(make_request(std::move(prop_prompt), Stage::retrieval)).content;

        auto chal_prompt = build_challenger_prompt(templates, question, result.pool, evidence);
        record.challenger_argument =
            gateway.complete(make_request(std::move(chal_prompt), Stage::retrieval)).content;
        record.parsed_op = parse_challenger_move(record.challenger_argument, result.pool);

        auto judge_prompt = build_judge_prompt(templates, question, result.pool, evidence,
                                               record.proponent_argument,
                                               record.challenger_argument);
        record.judge_raw =
            gateway.complete(make_request(std::move(judge_prompt), Stage::retrieval)).content;
        record.judge_verdict = parse_judge_verdict(record.judge_raw, &record.judge_flagged);

        if (record.judge_verdict == Verdict::proponent) {
            record.pool_after = result.pool.queries;
            result.transcript.rounds.push_back(std::move(record));
            result.transcript.termination_reason = RetTermination::judge_keep;
            break;
        }

        auto next = apply_refinement(result.pool, record.parsed_op, round, config.max_pool_size);
        auto distance = pool_distance(next, result.pool);
        result.pool = std::move(next);
        record.pool_after = result.pool.queries;
        result.transcript.rounds.push_back(std::move(record));

        if (distance <= config.epsilon) {
            result.transcript.termination_reason = RetTermination::converged;
            break;
        }
    }

    result.evidence = cache.gather(result.pool, gateway);
    return result;
}

}  // namespace drag
