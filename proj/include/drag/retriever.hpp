#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace drag {

struct Passage {
    std::string doc_id;
    std::string title;
    std::string text;
};

struct ScoredPassage {
    Passage passage;
    double score = 0.0;
};

struct RetrieverConfig {
    std::size_t k_default = 3;
    double k1 = 1.2;
    double b = 0.75;
};

/// Lowercased alphanumeric tokens; punctuation discarded. UTF-8 aware:
/// Latin-1 letters are case-folded, other non-ASCII codepoints pass
/// through unfolded, Unicode punctuation blocks act as separators.
std::vector<std::string> tokenize(const std::string& text);

struct CorpusRecord {
    std::string doc_id;
    std::string title;
    std::string text;
};

/// Inverted index over a passage corpus. Immutable once built; concurrent
/// retrieve/score calls against one index are safe.
class CorpusIndex {
public:
    using Posting = std::pair<std::uint32_t, std::uint32_t>;  // (doc index, term frequency)

    /// Builds the index from a record stream. Throws std::runtime_error on
    /// an empty stream or a duplicate doc_id (the message names the id).
    static CorpusIndex ingest(const std::vector<CorpusRecord>& records,
                              RetrieverConfig config = {});

    /// Streaming variant: `next` yields records until it returns false.
    static CorpusIndex ingest(const std::function<bool(CorpusRecord&)>& next,
                              RetrieverConfig config = {});

    std::size_t doc_count() const { return docs_.size(); }
    double avg_doc_len() const { return avg_doc_len_; }
    const RetrieverConfig& config() const { return config_; }
    const std::vector<Passage>& docs() const { return docs_; }
    const std::map<std::string, std::vector<Posting>>& term_postings() const { return postings_; }

    bool has_doc(const std::string& doc_id) const;
    std::size_t doc_length(const std::string& doc_id) const;

    /// Okapi BM25 score of the document for the given query tokens, with the
    /// non-negative idf variant ln(1 + (N - df + 0.5) / (df + 0.5)).
    /// 0 when no query term occurs in the document. Throws on unknown doc_id.
    double score(const std::vector<std::string>& query_tokens,
                 const std::string& doc_id) const;

    /// Top-k passages for the query: score descending, ties broken by
    /// ascending doc_id, zero-score passages excluded.
    std::vector<ScoredPassage> retrieve(const std::string& query, std::size_t k) const;

    /// Deterministic JSON serialization (byte-identical for identical input
    /// streams).
    std::string to_json() const;
    static CorpusIndex from_json(const std::string& json_text);

    void save(const std::string& path) const;
    static CorpusIndex load(const std::string& path);

private:
    double score_doc(const std::vector<std::string>& query_tokens, std::uint32_t idx) const;

    std::vector<Passage> docs_;
    std::unordered_map<std::string, std::uint32_t> id_to_idx_;
    std::map<std::string, std::vector<Posting>> postings_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_len_ = 0.0;
    RetrieverConfig config_;
};

/// Reads a line-delimited corpus file ({"id", "title", "contents"} per line,
/// unknown fields ignored). Throws naming the offending line on bad input.
std::vector<CorpusRecord> read_corpus_file(const std::string& path);

}  // namespace drag
