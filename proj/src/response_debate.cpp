#include "drag/response_debate.hpp"

#include <stdexcept>

namespace drag {

namespace {

std::string squash_whitespace(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool in_ws = true;  // swallow leading whitespace
    for (char c : text) {
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        if (ws) {
            if (!in_ws) out.push_back(' ');
        } else {
            out.push_back(c);
        }
        in_ws = ws;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string agent_turn(AgentState& agent, std::string prompt, Gateway& gateway) {
    agent.messages.push_back(ChatMessage{Role::user, std::move(prompt)});
    ChatRequest req;
    req.messages = agent.messages;
    req.stage = Stage::response;
    auto reply = gateway.complete(req).content;
    agent.messages.push_back(ChatMessage{Role::assistant, reply});
    agent.history.push_back(reply);
    return reply;
}

std::string trimmed(const std::string& text) {
    auto begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    auto end = text.find_last_not_of(" \t\r\n");
    return text.substr(begin, end - begin + 1);
}

}  // namespace

const char* debate_role_name(DebateRole role) {
    return role == DebateRole::proponent ? "Proponent Agent" : "Challenger Agent";
}

const char* answer_source_name(AnswerSource source) {
    switch (source) {
        case AnswerSource::judge: return "judge";
        case AnswerSource::single_agent: return "single_agent";
        case AnswerSource::direct: return "direct";
    }
    return "judge";
}

namespace {

bool contains_window(const std::string& haystack, const std::string& needle,
                     std::size_t min_len) {
    if (needle.size() < min_len) return false;
    for (std::size_t i = 0; i + min_len <= needle.size(); ++i) {
        if (haystack.find(needle.substr(i, min_len)) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

bool shares_passage_text(const std::string& prompt, const std::string& passage,
                         std::size_t min_len) {
    return contains_window(squash_whitespace(prompt), squash_whitespace(passage), min_len);
}

std::vector<std::string> detect_evidence_leaks(const std::string& prompt,
                                               const std::string& question,
                                               const EvidenceSet& evidence,
                                               std::size_t min_len) {
    std::string p = squash_whitespace(prompt);
    const std::string q = squash_whitespace(question);
    if (!q.empty()) {
        // '\x01' never survives squashing, so no window spans the cut.
        for (auto at = p.find(q); at != std::string::npos; at = p.find(q, at + 1)) {
            p.replace(at, q.size(), "\x01");
        }
    }
    std::vector<std::string> leaks;
    for (const auto& text : evidence.all_passage_texts()) {
        if (contains_window(p, squash_whitespace(text), min_len)) leaks.push_back(text);
    }
    return leaks;
}

std::string init_proponent(const PromptTemplates& templates, const std::string& question,
                           const EvidenceSet& evidence, Gateway& gateway, AgentState& agent) {
    agent.role = DebateRole::proponent;
    auto prompt = render_template(templates.res_proponent_init,
                                  {{"question", question},
                                   {"documents", format_evidence_blocks(evidence.blocks())}});
    return agent_turn(agent, std::move(prompt), gateway);
}

std::string init_challenger(const PromptTemplates& templates, const std::string& question,
                            Gateway& gateway, AgentState& agent) {
    agent.role = DebateRole::challenger;
    auto prompt = render_template(templates.res_challenger_init, {{"question", question}});
    return agent_turn(agent, std::move(prompt), gateway);
}

std::string debate_round(const PromptTemplates& templates, AgentState& agent,
                         const std::string& opponent_last, const std::string& question,
                         Gateway& gateway, std::string* prompt_out) {
    auto opponent_name = debate_role_name(agent.role == DebateRole::proponent
                                              ? DebateRole::challenger
                                              : DebateRole::proponent);
    auto prompt = render_template(templates.res_debate,
                                  {{"question", question},
                                   {"opponent_name", opponent_name},
                                   {"opponent_response", opponent_last}});
    if (prompt_out) *prompt_out = prompt;
    return agent_turn(agent, std::move(prompt), gateway);
}

FinalAnswer judge_final(const PromptTemplates& templates, const std::string& question,
                        const std::string& proponent_final, const std::string& challenger_final,
                        Gateway& gateway, ResTranscript& transcript) {
    auto prompt = render_template(
        templates.res_judge,
        {{"question", question},
         {"arguments",
          format_arguments({{debate_role_name(DebateRole::proponent), proponent_final},
                            {debate_role_name(DebateRole::challenger), challenger_final}})}});
    transcript.judge_prompt = prompt;

    ChatRequest req;
    req.messages.push_back(ChatMessage{Role::user, std::move(prompt)});
    req.stage = Stage::response;
    auto reply = gateway.complete(req).content;
    transcript.judge_reply = reply;

    FinalAnswer answer;
    if (trimmed(reply).empty()) {
        answer.text = proponent_final;
        answer.source = AnswerSource::single_agent;
    } else {
        answer.text = reply;
        answer.source = AnswerSource::judge;
    }
    transcript.judge_novel_answer =
        trimmed(reply) != trimmed(proponent_final) && trimmed(reply) != trimmed(challenger_final);
    transcript.final_answer = answer.text;
    return answer;
}

ResDebateResult run_response_debate(const std::string& question, const EvidenceSet& evidence,
                                    Gateway& gateway, const ResDebateConfig& config,
                                    const PromptTemplates& templates) {
    if (config.rounds < 1) {
        throw std::runtime_error("response debate requires rounds >= 1");
    }

    ResDebateResult result;
    AgentState proponent;
    AgentState challenger;
    challenger.role = DebateRole::challenger;

    // Round 1: initialization.
    ResRound first;
    if (config.knowledge_only) {
        first.proponent_reply = init_challenger(templates, question, gateway, proponent);
        proponent.role = DebateRole::proponent;
    } else {
        first.proponent_reply = init_proponent(templates, question, evidence, gateway, proponent);
    }
    first.proponent_prompt = proponent.messages.front().content;

    if (config.knowledge_only || config.asymmetric) {
        first.challenger_reply = init_challenger(templates, question, gateway, challenger);
    } else {
        // Ablation: equal access — the challenger also answers from the
        // evidence blocks.
        first.challenger_reply =
            init_proponent(templates, question, evidence, gateway, challenger);
        challenger.role = DebateRole::challenger;
    }
    first.challenger_prompt = challenger.messages.front().content;
    result.transcript.rounds.push_back(first);

    // Detections in asymmetric mode are violations and must be absent; in
    // the equal-access ablation they record the expected evidence leakage.
    if (!config.knowledge_only) {
        result.transcript.asymmetry_violations =
            detect_evidence_leaks(first.challenger_prompt, question, evidence);
    }

    // Rounds 2..r: each agent refines against the opponent's previous answer.
    for (std::size_t round = 2; round <= config.rounds; ++round) {
        ResRound rec;
        const auto chal_prev = challenger.history.back();
        const auto prop_prev = proponent.history.back();
        rec.proponent_reply =
            debate_round(templates, proponent, chal_prev, question, gateway, &rec.proponent_prompt);
        rec.challenger_reply = debate_round(templates, challenger, prop_prev, question, gateway,
                                            &rec.challenger_prompt);
        result.transcript.rounds.push_back(std::move(rec));
    }

    result.answer = judge_final(templates, question, proponent.history.back(),
                                challenger.history.back(), gateway, result.transcript);
    return result;
}

}  // namespace drag
