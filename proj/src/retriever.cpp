#include "drag/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace drag {

namespace {

// Decodes one UTF-8 codepoint starting at `i`; advances `i` past it.
// Malformed bytes decode as U+FFFD and consume one byte.
std::uint32_t decode_utf8(const std::string& s, std::size_t& i) {
    const auto byte = [&](std::size_t j) { return static_cast<unsigned char>(s[j]); };
    unsigned char c = byte(i);
    if (c < 0x80) {
        ++i;
        return c;
    }
    int extra = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
        cp = c & 0x1F;
        extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
        cp = c & 0x0F;
        extra = 2;
    } else if ((c & 0xF8) == 0xF0) {
        cp = c & 0x07;
        extra = 3;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + extra >= s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int j = 1; j <= extra; ++j) {
        unsigned char cc = byte(i + j);
        if ((cc & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    i += 1 + extra;
    return cp;
}

void encode_utf8(std::uint32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_separator_cp(std::uint32_t cp) {
    if (cp < 0x80) {
        return !((cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
                 (cp >= 'A' && cp <= 'Z'));
    }
    if (cp >= 0xA0 && cp <= 0xBF) return true;       // Latin-1 punctuation/symbols
    if (cp == 0xD7 || cp == 0xF7) return true;       // multiply / divide signs
    if (cp >= 0x2000 && cp <= 0x206F) return true;   // general punctuation
    if (cp >= 0x2E00 && cp <= 0x2E7F) return true;   // supplemental punctuation
    if (cp == 0xFFFD) return true;
    return false;
}

std::uint32_t fold_cp(std::uint32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1 uppercase
    return cp;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        std::uint32_t cp = decode_utf8(text, i);
        if (is_separator_cp(cp)) {
            if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            encode_utf8(fold_cp(cp), cur);
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

CorpusIndex CorpusIndex::ingest(const std::vector<CorpusRecord>& records,
                                RetrieverConfig config) {
    std::size_t pos = 0;
    return ingest(
        [&](CorpusRecord& out) {
            if (pos >= records.size()) return false;
            out = records[pos++];
            return true;
        },
        config);
}

CorpusIndex CorpusIndex::ingest(const std::function<bool(CorpusRecord&)>& next,
                                RetrieverConfig config) {
    if (config.k_default < 1 || config.k1 <= 0.0 || config.b < 0.0 || config.b > 1.0) {
        throw std::runtime_error("retriever config out of range: need k_default >= 1, "
                                 "k1 > 0, 0 <= b <= 1");
    }
    CorpusIndex index;
    index.config_ = config;

    CorpusRecord rec;
    std::uint64_t total_len = 0;
    while (next(rec)) {
        if (index.id_to_idx_.count(rec.doc_id) != 0) {
            throw std::runtime_error("duplicate doc_id: " + rec.doc_id);
        }
        if (rec.text.find_first_not_of(" \t\r\n\f\v") == std::string::npos) {
            throw std::runtime_error("empty passage text for doc_id: " + rec.doc_id);
        }
        const auto idx = static_cast<std::uint32_t>(index.docs_.size());
        index.id_to_idx_.emplace(rec.doc_id, idx);
        index.docs_.push_back(Passage{rec.doc_id, rec.title, rec.text});

        auto tokens = tokenize(rec.text);
        std::map<std::string, std::uint32_t> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, count] : tf) {
            index.postings_[term].emplace_back(idx, count);
        }
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total_len += tokens.size();
    }
    if (index.docs_.empty()) {
        throw std::runtime_error("corpus ingest: empty record stream");
    }
    index.avg_doc_len_ =
        static_cast<double>(total_len) / static_cast<double>(index.docs_.size());
    return index;
}

bool CorpusIndex::has_doc(const std::string& doc_id) const {
    return id_to_idx_.count(doc_id) != 0;
}

std::size_t CorpusIndex::doc_length(const std::string& doc_id) const {
    auto it = id_to_idx_.find(doc_id);
    if (it == id_to_idx_.end()) {
        throw std::runtime_error("unknown doc_id: " + doc_id);
    }
    return doc_lengths_[it->second];
}

double CorpusIndex::score(const std::vector<std::string>& query_tokens,
                          const std::string& doc_id) const {
    auto it = id_to_idx_.find(doc_id);
    if (it == id_to_idx_.end()) {
        throw std::runtime_error("unknown doc_id: " + doc_id);
    }
    return score_doc(query_tokens, it->second);
}

double CorpusIndex::score_doc(const std::vector<std::string>& query_tokens,
                              std::uint32_t idx) const {
    const double n_docs = static_cast<double>(docs_.size());
    const double dl = static_cast<double>(doc_lengths_[idx]);
    const double rel_len = avg_doc_len_ > 0.0 ? dl / avg_doc_len_ : 0.0;
    const double norm = config_.k1 * (1.0 - config_.b + config_.b * rel_len);

    double total = 0.0;
    for (const auto& term : query_tokens) {
        auto pit = postings_.find(term);
        if (pit == postings_.end()) continue;
        const auto& plist = pit->second;
        auto dit = std::lower_bound(
            plist.begin(), plist.end(), idx,
            [](const Posting& p, std::uint32_t v) { return p.first < v; });
        if (dit == plist.end() || dit->first != idx) continue;
        const double df = static_cast<double>(plist.size());
        const double tf = static_cast<double>(dit->second);
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        total += idf * tf * (config_.k1 + 1.0) / (tf + norm);
    }
    return total;
}

std::vector<ScoredPassage> CorpusIndex::retrieve(const std::string& query,
                                                 std::size_t k) const {
    std::vector<ScoredPassage> result;
    if (k == 0) return result;

    auto tokens = tokenize(query);
    std::set<std::uint32_t> candidates;
    for (const auto& term : tokens) {
        auto pit = postings_.find(term);
        if (pit == postings_.end()) continue;
        for (const auto& [idx, tf] : pit->second) candidates.insert(idx);
    }

    for (auto idx : candidates) {
        double s = score_doc(tokens, idx);
        if (s > 0.0) result.push_back(ScoredPassage{docs_[idx], s});
    }
    std::sort(result.begin(), result.end(), [](const ScoredPassage& a, const ScoredPassage& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.passage.doc_id < b.passage.doc_id;
    });
    if (result.size() > k) result.resize(k);
    return result;
}

std::string CorpusIndex::to_json() const {
    nlohmann::json j;
    j["avg_doc_len"] = avg_doc_len_;
    j["config"] = {{"k_default", config_.k_default}, {"k1", config_.k1}, {"b", config_.b}};
    auto& docs = j["docs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        docs.push_back({{"id", docs_[i].doc_id},
                        {"title", docs_[i].title},
                        {"text", docs_[i].text},
                        {"len", doc_lengths_[i]}});
    }
    auto& postings = j["postings"] = nlohmann::json::object();
    for (const auto& [term, plist] : postings_) {
        auto arr = nlohmann::json::array();
        for (const auto& [idx, tf] : plist) arr.push_back({idx, tf});
        postings[term] = std::move(arr);
    }
    return j.dump(2) + "\n";
}

CorpusIndex CorpusIndex::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    CorpusIndex index;
    index.avg_doc_len_ = j.at("avg_doc_len").get<double>();
    const auto& cfg = j.at("config");
    index.config_.k_default = cfg.at("k_default").get<std::size_t>();
    index.config_.k1 = cfg.at("k1").get<double>();
    index.config_.b = cfg.at("b").get<double>();
    for (const auto& d : j.at("docs")) {
        Passage p{d.at("id").get<std::string>(), d.at("title").get<std::string>(),
                  d.at("text").get<std::string>()};
        index.id_to_idx_.emplace(p.doc_id, static_cast<std::uint32_t>(index.docs_.size()));
        index.docs_.push_back(std::move(p));
        index.doc_lengths_.push_back(d.at("len").get<std::uint32_t>());
    }
    for (const auto& [term, arr] : j.at("postings").items()) {
        auto& plist = index.postings_[term];
        for (const auto& e : arr) {
            plist.emplace_back(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>());
        }
    }
    if (index.docs_.empty()) {
        throw std::runtime_error("index load: no documents");
    }
    return index;
}

void CorpusIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write index file: " + path);
    out << to_json();
}

CorpusIndex CorpusIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read index file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::vector<CorpusRecord> read_corpus_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read corpus file: " + path);
    std::vector<CorpusRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("corpus file " + path + " line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("id") || !j.contains("contents")) {
            throw std::runtime_error("corpus file " + path + " line " +
                                     std::to_string(line_no) +
                                     ": record needs \"id\" and \"contents\"");
        }
        records.push_back(CorpusRecord{j.at("id").get<std::string>(),
                                       j.value("title", std::string{}),
                                       j.at("contents").get<std::string>()});
    }
    return records;
}

}  // namespace drag
