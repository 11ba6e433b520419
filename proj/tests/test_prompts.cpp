#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "drag/prompts.hpp"
#include "drag/retriever.hpp"

using namespace drag;

TEST_CASE("render_template substitutes known placeholders only") {
    CHECK(render_template("Q: {question}", {{"question", "Who?"}}) == "Q: Who?");
    CHECK(render_template("{a}{b}{a}", {{"a", "x"}, {"b", "y"}}) == "xyx");
    // Unknown placeholders and stray braces pass through verbatim.
    CHECK(render_template("keep {unknown} and {braces", {{"question", "?"}}) ==
          "keep {unknown} and {braces");
    CHECK(render_template("{question}", {}) == "{question}");
    CHECK(render_template("", {{"question", "?"}}).empty());
}

TEST_CASE("query lists are numbered one per line") {
    CHECK(format_query_list({}) == "");
    CHECK(format_query_list({"alpha"}) == "1. alpha");
    CHECK(format_query_list({"alpha", "beta"}) == "1. alpha\n2. beta");
}

TEST_CASE("evidence blocks group passages under their query") {
    ScoredPassage sp{Passage{"d1", "Title One", "Body text one."}, 1.25};
    auto out = format_evidence_blocks({{"first query", {sp}}, {"second query", {}}});
    CHECK(out.find("Query 1: first query") != std::string::npos);
    CHECK(out.find("Doc 1 (Title: Title One) Body text one.") != std::string::npos);
    CHECK(out.find("Query 2: second query") != std::string::npos);
    CHECK(out.find("No relevant documents were retrieved.") != std::string::npos);
}

TEST_CASE("argument blocks carry the agent names") {
    auto out = format_arguments({{"Proponent Agent", "case A"}, {"Challenger Agent", "case B"}});
    CHECK(out == "Proponent Agent:\ncase A\n\nChallenger Agent:\ncase B");
}

TEST_CASE("default templates carry the fixed instructions") {
    auto t = PromptTemplates::defaults();
    CHECK(t.ret_proponent.find("sufficient to answer the question") != std::string::npos);
    CHECK(t.ret_challenger.find("Query Optimization: [Original Query]") != std::string::npos);
    CHECK(t.ret_challenger.find("Query Expansion: [New Query]") != std::string::npos);
    CHECK(t.ret_judge.find("Output only the agent's name.") != std::string::npos);
    CHECK(t.res_proponent_init.find("based on the given document") != std::string::npos);
    CHECK(t.res_challenger_init.find("based on your own knowledge") != std::string::npos);
    CHECK(t.res_debate.find("note that they may be wrong") != std::string::npos);
    CHECK(t.res_judge.find("moderator in a debate competition") != std::string::npos);
    CHECK(t.res_judge.find("Output only the final answer") != std::string::npos);
}
