#pragma once

#include <map>
#include <string>
#include <vector>

namespace drag {

struct ScoredPassage;

/// The agent prompt templates for both debate stages. Placeholders use
/// {name} syntax: {question}, {queries}, {documents}, {arguments},
/// {opponent_name}, {opponent_response}.
struct PromptTemplates {
    std::string ret_proponent;
    std::string ret_challenger;
    std::string ret_judge;
    std::string res_proponent_init;
    std::string res_challenger_init;
    std::string res_debate;
    std::string res_judge;

    static PromptTemplates defaults();

    /// Starts from the defaults and overrides any template for which
    /// <name>.txt exists in `dir` (e.g. ret_proponent.txt).
    static PromptTemplates load_dir(const std::string& dir);
};

/// Replaces each {key} occurrence with vars.at(key); unknown placeholders
/// are left verbatim.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars);

/// Numbered query list, one per line: "1. <query>".
std::string format_query_list(const std::vector<std::string>& queries);

/// Per-query evidence blocks in pool order:
///   Query 1: <query>
///   Retrieved Documents:
///   Doc 1 (Title: <title>) <text>
std::string format_evidence_blocks(
    const std::vector<std::pair<std::string, std::vector<ScoredPassage>>>& evidence);

/// Named argument blocks for judge prompts.
std::string format_arguments(const std::vector<std::pair<std::string, std::string>>& arguments);

}  // namespace drag
