#include "drag/evaluation.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>

namespace drag {

namespace {

bool is_ascii_punct(char c) {
    static const std::string kPunct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
    return kPunct.find(c) != std::string::npos;
}

std::string to_lower(const std::string& text) {
    std::string out = text;
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 0x20);
    }
    return out;
}

std::vector<std::string> split_ws(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

std::vector<std::string> normalized_tokens(const std::string& text) {
    return split_ws(normalize_answer(text));
}

std::size_t multiset_overlap(const std::vector<std::string>& a,
                             const std::vector<std::string>& b) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : a) ++counts[t];
    std::size_t overlap = 0;
    for (const auto& t : b) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    return overlap;
}

std::string trim(const std::string& text) {
    auto begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    auto end = text.find_last_not_of(" \t\r\n");
    return text.substr(begin, end - begin + 1);
}

}  // namespace

std::string normalize_answer(const std::string& text) {
    std::string lowered = to_lower(text);
    std::string no_punct;
    no_punct.reserve(lowered.size());
    for (char c : lowered) {
        if (!is_ascii_punct(c)) no_punct.push_back(c);
    }
    std::string out;
    for (const auto& tok : split_ws(no_punct)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

std::string extract_answer(const std::string& raw_output) {
    // Last "answer is" / "answer:" occurrence wins.
    const std::string lowered = to_lower(raw_output);
    std::size_t best = std::string::npos;
    std::size_t best_end = 0;
    for (const std::string& pat : {std::string("answer is"), std::string("answer:")}) {
        std::size_t from = 0;
        for (auto at = lowered.find(pat, from); at != std::string::npos;
             at = lowered.find(pat, at + 1)) {
            if (best == std::string::npos || at > best) {
                best = at;
                best_end = at + pat.size();
            }
        }
    }
    if (best != std::string::npos) {
        std::size_t start = best_end;
        while (start < raw_output.size() &&
               (raw_output[start] == ' ' || raw_output[start] == ':')) {
            ++start;
        }
        std::size_t stop = start;
        while (stop < raw_output.size() && raw_output[stop] != '.' && raw_output[stop] != '!' &&
               raw_output[stop] != '?' && raw_output[stop] != '\n') {
            ++stop;
        }
        auto captured = trim(raw_output.substr(start, stop - start));
        if (!captured.empty()) return captured;
    }

    // Fallback: last non-empty line.
    std::istringstream in(raw_output);
    std::string line, last_line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) last_line = trim(line);
    }
    if (!last_line.empty()) return last_line;
    return trim(raw_output);
}

YesNo extract_yesno(const std::string& raw_output) {
    const std::string region = to_lower(extract_answer(raw_output));
    std::string tok;
    auto check = [&](const std::string& t) {
        if (t == "yes") return YesNo::yes;
        if (t == "no") return YesNo::no;
        return YesNo::unknown;
    };
    for (char c : region) {
        bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        if (alnum) {
            tok.push_back(c);
        } else if (!tok.empty()) {
            auto v = check(tok);
            if (v != YesNo::unknown) return v;
            tok.clear();
        }
    }
    if (!tok.empty()) {
        auto v = check(tok);
        if (v != YesNo::unknown) return v;
    }
    return YesNo::unknown;
}

int exact_match(const std::string& pred, const std::vector<std::string>& golds) {
    const std::string p = normalize_answer(pred);
    for (const auto& g : golds) {
        if (p == normalize_answer(g)) return 1;
    }
    return 0;
}

double token_f1(const std::string& pred, const std::vector<std::string>& golds) {
    const auto pred_tokens = normalized_tokens(pred);
    double best = 0.0;
    for (const auto& g : golds) {
        const auto gold_tokens = normalized_tokens(g);
        double f1;
        if (pred_tokens.empty() || gold_tokens.empty()) {
            f1 = pred_tokens.empty() && gold_tokens.empty() ? 1.0 : 0.0;
        } else {
            const auto overlap = multiset_overlap(gold_tokens, pred_tokens);
            if (overlap == 0) {
                f1 = 0.0;
            } else {
                const double precision =
                    static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
                const double recall =
                    static_cast<double>(overlap) / static_cast<double>(gold_tokens.size());
                f1 = 2.0 * precision * recall / (precision + recall);
            }
        }
        best = std::max(best, f1);
    }
    return best;
}

MetricReport aggregate(const std::vector<InstanceStats>& stats) {
    MetricReport report;
    report.n = stats.size();
    if (stats.empty()) return report;
    for (const auto& s : stats) {
        report.em += s.em;
        report.f1 += s.f1;
        report.avg_ret_rounds += static_cast<double>(s.ret_rounds);
        report.avg_query_count += static_cast<double>(s.query_count);
        report.avg_llm_calls += static_cast<double>(s.llm_calls);
        report.avg_retriever_calls += static_cast<double>(s.retriever_calls);
    }
    const auto n = static_cast<double>(stats.size());
    report.em /= n;
    report.f1 /= n;
    report.avg_ret_rounds /= n;
    report.avg_query_count /= n;
    report.avg_llm_calls /= n;
    report.avg_retriever_calls /= n;
    return report;
}

}  // namespace drag
