#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace drag {

enum class AnswerType { free_text, yes_no };

struct QAInstance {
    std::string id;
    std::string question;
    std::vector<std::string> golden_answers;
    AnswerType answer_type = AnswerType::free_text;
};

struct Prediction {
    std::string id;
    std::string raw_output;
    std::string extracted;
};

struct MetricReport {
    double em = 0.0;  // [0,1]
    double f1 = 0.0;  // [0,1]
    std::size_t n = 0;
    double avg_ret_rounds = 0.0;
    double avg_query_count = 0.0;
    double avg_llm_calls = 0.0;
    double avg_retriever_calls = 0.0;
};

/// SQuAD-style normalization: lowercase, strip punctuation, drop the
/// articles a/an/the as whole tokens, collapse whitespace.
std::string normalize_answer(const std::string& text);

/// Final-answer extraction: the trailing text of the last "answer is" /
/// "answer:" occurrence up to sentence end; else the last non-empty line;
/// else the whole output.
std::string extract_answer(const std::string& raw_output);

enum class YesNo { yes, no, unknown };

/// First standalone yes/no token in the extracted answer region.
YesNo extract_yesno(const std::string& raw_output);

/// 1 iff the normalized prediction equals some normalized gold answer.
int exact_match(const std::string& pred, const std::vector<std::string>& golds);

/// Max over golds of the harmonic mean of token precision/recall on the
/// normalized token multisets. Both sides empty after normalization -> 1;
/// one side empty -> 0.
double token_f1(const std::string& pred, const std::vector<std::string>& golds);

struct InstanceStats {
    double em = 0.0;
    double f1 = 0.0;
    std::size_t ret_rounds = 0;
    std::size_t query_count = 0;
    std::int64_t llm_calls = 0;
    std::int64_t retriever_calls = 0;
};

MetricReport aggregate(const std::vector<InstanceStats>& stats);

}  // namespace drag
