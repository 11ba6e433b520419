#include "drag/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "drag/retriever.hpp"

namespace drag {

namespace {

const char* kRetProponent =
    "You are a debater. Argue that the current retrieved content is sufficient to answer "
    "the question and no further retrieval is needed. Deliver a brief, strong argument "
    "with clear reasoning. Do not suggest further retrieval.\n"
    "\n"
    "Question:\n"
    "{question}\n"
    "\n"
    "Queries:\n"
    "{queries}\n"
    "\n"
    "Retrieved Documents:\n"
    "{documents}\n";

const char* kRetChallenger =
    "You are a critical thinker and debater, and your task is to challenge the sufficiency "
    "of the current retrieved content. Argue that the current information is insufficient "
    "to generate a reliable answer and propose either query optimization or query "
    "expansion.\n"
    "The action you can choose:\n"
    "1. Query Optimization: If the retrieved content is somewhat relevant but has "
    "expression or scope issues.\n"
    "Optimize the query using this format: Query Optimization: [Original Query] \xE2\x86\x92 "
    "[New Query].\n"
    "2. Query Expansion: If critical information is missing.\n"
    "Propose a new query using this format: Query Expansion: [New Query].\n"
    "\n"
    "Deliver a brief, strong argument with clear reasoning, and then you must choose only "
    "one action. The output must be in the exact format after your reasoning, without "
    "additional explanation, and keep the new query short and precise.\n"
    "\n"
    "Question:\n"
    "{question}\n"
    "\n"
    "Queries:\n"
    "{queries}\n"
    "\n"
    "Retrieved Documents:\n"
    "{documents}\n";

const char* kRetJudge =
    "You are the judge in a debate. Your task is to evaluate the arguments from agents.\n"
    "There are two types of agents:\n"
    "1. Proponent Agent: Argue that the current retrieved content is sufficient.\n"
    "2. Challenger Agent: Argue that the current retrieved content is insufficient and "
    "propose query refinement.\n"
    "\n"
    "Question:\n"
    "{question}\n"
    "\n"
    "Queries:\n"
    "{queries}\n"
    "\n"
    "Retrieved Documents:\n"
    "{documents}\n"
    "\n"
    "Agents Arguments:\n"
    "{arguments}\n"
    "\n"
    "Output only the agent's name.\n";

const char* kResProponentInit =
    "Answer the question based on the given document.\n"
    "\n"
    "The following are given documents:\n"
    "{documents}\n"
    "\n"
    "Question:\n"
    "{question}\n";

const char* kResChallengerInit =
    "Answer the question based on your own knowledge.\n"
    "\n"
    "Question:\n"
    "{question}\n";

const char* kResDebate =
    "I will give the answers and arguments to this question from other agents. Use their "
    "solution as additional advice; note that they may be wrong.\n"
    "Explain your answer.\n"
    "\n"
    "{opponent_name}:\n"
    "{opponent_response}\n"
    "\n"
    "Question:\n"
    "{question}\n";

const char* kResJudge =
    "You are a moderator in a debate competition. Your task is to determine the correct "
    "final answer based on the arguments presented by the debaters. Output only the final "
    "answer with no explanations or additional text.\n"
    "\n"
    "{arguments}\n"
    "\n"
    "Question:\n"
    "{question}\n";

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read template file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.ret_proponent = kRetProponent;
    t.ret_challenger = kRetChallenger;
    t.ret_judge = kRetJudge;
    t.res_proponent_init = kResProponentInit;
    t.res_challenger_init = kResChallengerInit;
    t.res_debate = kResDebate;
    t.res_judge = kResJudge;
    return t;
}

PromptTemplates PromptTemplates::load_dir(const std::string& dir) {
    PromptTemplates t = defaults();
    const std::filesystem::path base(dir);
    if (!std::filesystem::is_directory(base)) {
        throw std::runtime_error("template directory not found: " + dir);
    }
    const std::pair<const char*, std::string*> slots[] = {
        {"ret_proponent", &t.ret_proponent},   {"ret_challenger", &t.ret_challenger},
        {"ret_judge", &t.ret_judge},           {"res_proponent_init", &t.res_proponent_init},
        {"res_challenger_init", &t.res_challenger_init}, {"res_debate", &t.res_debate},
        {"res_judge", &t.res_judge},
    };
    for (const auto& [name, slot] : slots) {
        auto path = base / (std::string(name) + ".txt");
        if (std::filesystem::exists(path)) *slot = read_file(path);
    }
    return t;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string::npos) {
                auto it = vars.find(tmpl.substr(i + 1, close - i - 1));
                if (it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i]);
        ++i;
    }
    return out;
}

std::string format_query_list(const std::vector<std::string>& queries) {
    std::string out;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        out += std::to_string(i + 1) + ". " + queries[i];
        if (i + 1 < queries.size()) out += "\n";
    }
    return out;
}

std::string format_evidence_blocks(
    const std::vector<std::pair<std::string, std::vector<ScoredPassage>>>& evidence) {
    std::string out;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        const auto& [query, passages] = evidence[i];
        out += "Query " + std::to_string(i + 1) + ": " + query + "\n";
        out += "Retrieved Documents:\n";
        if (passages.empty()) {
            out += "No relevant documents were retrieved.\n";
        } else {
            for (std::size_t j = 0; j < passages.size(); ++j) {
                out += "Doc " + std::to_string(j + 1) + " (Title: " +
                       passages[j].passage.title + ") " + passages[j].passage.text + "\n";
            }
        }
        if (i + 1 < evidence.size()) out += "\n";
    }
    return out;
}

std::string format_arguments(
    const std::vector<std::pair<std::string, std::string>>& arguments) {
    std::string out;
    for (std::size_t i = 0; i < arguments.size(); ++i) {
        out += arguments[i].first + ":\n" + arguments[i].second;
        if (i + 1 < arguments.size()) out += "\n\n";
    }
    return out;
}

}  // namespace drag
