#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "drag/gateway.hpp"
#include "drag/prompts.hpp"
#include "drag/retrieval_debate.hpp"

namespace drag {

enum class DebateRole { proponent, challenger };

const char* debate_role_name(DebateRole role);  // "Proponent Agent" / "Challenger Agent"

/// One debater: its chat history doubles as the conversation state sent to
/// the backend (own turns as assistant messages).
struct AgentState {
    DebateRole role = DebateRole::proponent;
    std::vector<ChatMessage> messages;
    std::vector<std::string> history;  // y^1 ... y^i
};

struct ResDebateConfig {
    std::size_t rounds = 3;
    /// Asymmetric: only the proponent sees evidence at initialization.
    /// The ablation (asymmetric = false) also feeds the evidence blocks to
    /// the challenger's init prompt.
    bool asymmetric = true;
    /// Both debaters initialize from internal knowledge (no evidence at
    /// all); used by the retrieval-free debate baseline.
    bool knowledge_only = false;
};

enum class AnswerSource { judge, single_agent, direct };

const char* answer_source_name(AnswerSource source);

struct FinalAnswer {
    std::string text;
    AnswerSource source = AnswerSource::judge;
};

struct ResRound {
    std::string proponent_prompt;
    std::string proponent_reply;
    std::string challenger_prompt;
    std::string challenger_reply;
};

struct ResTranscript {
    std::vector<ResRound> rounds;
    std::string judge_prompt;
    std::string judge_reply;
    std::string final_answer;
    /// In asymmetric mode: passages whose text leaked into the challenger's
    /// init prompt (>= 20 shared characters, whitespace-normalized). Must
    /// stay empty.
    std::vector<std::string> asymmetry_violations;
    bool judge_novel_answer = false;  // judge text matches neither debater's final answer
};

/// True when prompt and passage share a run of at least `min_len`
/// characters after whitespace normalization.
bool shares_passage_text(const std::string& prompt, const std::string& passage,
                         std::size_t min_len = 20);

/// Passages whose text leaked into the prompt. Occurrences of the question
/// itself are blanked out first: the question is given to every agent, so
/// a question that quotes passage wording is not a leak.
std::vector<std::string> detect_evidence_leaks(const std::string& prompt,
                                               const std::string& question,
                                               const EvidenceSet& evidence,
                                               std::size_t min_len = 20);

std::string init_proponent(const PromptTemplates& templates, const std::string& question,
                           const EvidenceSet& evidence, Gateway& gateway, AgentState& agent);
std::string init_challenger(const PromptTemplates& templates, const std::string& question,
                            Gateway& gateway, AgentState& agent);

/// One debate turn: the opponent's previous answer is passed as advisory
/// context; the reply is appended to the agent's history.
std::string debate_round(const PromptTemplates& templates, AgentState& agent,
                         const std::string& opponent_last, const std::string& question,
                         Gateway& gateway, std::string* prompt_out = nullptr);

/// Final selection by the judge; the answer text is the verbatim judge
/// output (an empty judge reply falls back to the proponent's final answer).
FinalAnswer judge_final(const PromptTemplates& templates, const std::string& question,
                        const std::string& proponent_final, const std::string& challenger_final,
                        Gateway& gateway, ResTranscript& transcript);

struct ResDebateResult {
    FinalAnswer answer;
    ResTranscript transcript;
};

/// Stage-2 debate: initialize both agents (round 1), run rounds 2..r of
/// paired exchanges, then the judge. Exactly 2*rounds + 1 response-stage
/// LLM calls.
ResDebateResult run_response_debate(const std::string& question, const EvidenceSet& evidence,
                                    Gateway& gateway, const ResDebateConfig& config,
                                    const PromptTemplates& templates);

}  // namespace drag
