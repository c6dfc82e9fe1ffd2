// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "isprm/error.hpp"
#include "isprm/scorer.hpp"
#include "isprm/text.hpp"
#include "oracles.hpp"

using namespace isprm;

namespace {

class CannedBackend final : public ChatBackend {
  public:
    explicit CannedBackend(std::string reply, bool fail = false) : reply_(std::move(reply)), fail_(fail) {}
    ChatCompletion complete(const ChatRequest& req) const override
    {
        last = req;
        if (fail_)
            throw Error(Errc::BackendUnavailable, "down");
        return {reply_, std::nullopt};
    }
    mutable ChatRequest last;

  private:
    std::string reply_;
    bool fail_;
};

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b)
{
    std::size_t inter = 0;
    for (const auto& x : a)
        inter += b.count(x);
    auto uni = a.size() + b.size() - inter;
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

Trajectory with_steps(std::vector<std::pair<std::string, ToolCall>> steps)
{
    Trajectory tr{"t", {}, std::nullopt};
    for (auto& [r, c] : steps)
        tr = append_step(tr, TrajStep{r, c, "ok", static_cast<int>(tr.length()) + 1});
    return tr;
}

} // namespace

TEST_CASE("relevance: hand-computed Jaccard values")
{
    // candidate tokens {a, b}; past tokens {b, c, d}
    CandidateStep cand{"a", ToolCall{"b", {}}};
    auto past = with_steps({{"c d", ToolCall{"b", {}}}});
    auto s = relevance_score(cand, past);
    CHECK(std::abs(s.value - 0.25) <= 1e-9);
    CHECK(s.scorer_id == "relevance");

    CandidateStep same{"Search the Foo page", ToolCall::search("Foo Bar")};
    CHECK(std::abs(relevance_score(same, with_steps({{"Search the Foo page", ToolCall::search("Foo Bar")}})).value -
                   1.0) <= 1e-9);

    CandidateStep disjoint{"xx yy", ToolCall{"zz", {}}};
    CHECK(relevance_score(disjoint, past).value == 0.0);
    CHECK(relevance_score(disjoint, Trajectory{"t", {}, std::nullopt}).value == 0.0);

    // case folding over whitespace tokens, checked against a direct set computation
    CandidateStep mixed{"Open THE page now", ToolCall::open("p7")};
    auto hist = with_steps({{"the Page was empty", ToolCall::search("Now")}, {"open it", ToolCall::open("p7")}});
    std::set<std::string> a{"open", "the", "page", "now", "p7"};
    std::set<std::string> b{"the", "page", "was", "empty", "search", "now", "open", "it", "p7"};
    CHECK(std::abs(relevance_score(mixed, hist).value - jaccard(a, b)) <= 1e-9);
}

TEST_CASE("confidence: hand-computed values")
{
    CandidateStep c{"r", ToolCall::search("x")};
    c.logprob_top10 = TokenLogprobs{std::vector<double>(10, -1.0)};
    CHECK(std::abs(confidence_score(c).value - 1.0) <= 1e-9);

    c.logprob_top10 = TokenLogprobs{std::vector<double>(10, -1.0), std::vector<double>(10, -3.0)};
    CHECK(std::abs(confidence_score(c).value - 2.0) <= 1e-9);

    std::vector<double> ramp;
    for (int i = 0; i < 10; ++i)
        ramp.push_back(-0.1 * (i + 1)); // mean -0.55
    c.logprob_top10 = TokenLogprobs{ramp, std::vector<double>(10, -2.0)};
    CHECK(std::abs(confidence_score(c).value - (0.55 + 2.0) / 2.0) <= 1e-9);

    CandidateStep none{"r", ToolCall::search("x")};
    try {
        confidence_score(none);
        FAIL("expected MissingLogprobs");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingLogprobs);
    }
}

TEST_CASE("verbal progress parsing")
{
    CHECK(parse_progress("Progress: 4") == 4);
    CHECK(parse_progress("3 out of 5") == 3);
    CHECK(parse_progress("I'd say 7, no wait, 2") == 2);
    CHECK(parse_progress("2.5 then 5") == 5);
    CHECK_FALSE(parse_progress("none"));
    CHECK_FALSE(parse_progress("0 or 9"));

    auto [w, task] = generate_world(WorldSpec{1});
    Trajectory empty{task.task_id, {}, std::nullopt};
    CandidateStep cand{"r", ToolCall::search("x")};
    ScoringInput in{task, empty, "ctx", "", cand};
    auto ok = VerbalProgressScorer(std::make_shared<CannedBackend>("Progress: 4")).score(in);
    CHECK(ok.value == 4.0);
    CHECK_FALSE(ok.flagged);
    auto bad = VerbalProgressScorer(std::make_shared<CannedBackend>("no idea")).score(in);
    CHECK(bad.value == 1.0);
    CHECK(bad.flagged);
}

TEST_CASE("remote PRM: prompt contract, parsing and the -M/2 sentinel")
{
    auto [w, task] = generate_world(WorldSpec{1});
    Trajectory empty{task.task_id, {}, std::nullopt};
    CandidateStep cand{"look it up", ToolCall::search("x")};
    ScoringInput in{task, empty, "CONTEXT-BLOCK", "PREV-OBS", cand};
    auto backend = std::make_shared<CannedBackend>("The step is useful.\nScore: 1.5");
    auto s = RemotePrmScorer(backend, 8).score(in);
    CHECK(s.value == 1.5);
    REQUIRE(s.analysis);
    CHECK(s.analysis->find("useful") != std::string::npos);
    const auto& user = backend->last.messages.back().content;
    CHECK(user.find(task.query) != std::string::npos);
    CHECK(user.find("CONTEXT-BLOCK") != std::string::npos);
    CHECK(user.find("PREV-OBS") != std::string::npos);
    CHECK(user.find("look it up") != std::string::npos);
    CHECK(backend->last.messages.front().content.find("Score:") != std::string::npos);

    auto junk = RemotePrmScorer(std::make_shared<CannedBackend>("no score"), 8).score(in);
    CHECK(junk.value == -4.0);
    CHECK(junk.flagged);

    auto down = score_step(RemotePrmScorer(std::make_shared<CannedBackend>("", true), 8), in, -4.0);
    CHECK(down.flagged);
    CHECK(down.value == -4.0);
}

TEST_CASE("oracle scorer: answer candidates and the 50/50 example")
{
    auto [w, task] = generate_world(WorldSpec{13});
    Trajectory empty{task.task_id, {}, std::nullopt};
    ScriptedPolicy p;
    p.set_distribution(task.task_id, empty,
                       {{{"gold", ToolCall::answer(task.gold_answer)}, 0.5}, {{"wrong", ToolCall::answer("X Y")}, 0.5}});
    CandidateStep right{"commit", ToolCall::answer(task.gold_answer)};
    CandidateStep wrong{"commit", ToolCall::answer("X Y")};
    CHECK(oracle_score(w, p, task, empty, right, 8, 8).value == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(oracle_score(w, p, task, empty, wrong, 8, 8).value == doctest::Approx(-2.0).epsilon(1e-15));
}

TEST_CASE("oracle scorer: a repeated search changes nothing when the budget has slack")
{
    auto policy = make_world_policy({0.05, 0.0});
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto [w, task] = generate_world(WorldSpec{seed, 12, 2, 2, 4});
        Trajectory tr{task.task_id, {}, std::nullopt};
        tr = append_step(tr, execute_step(w, TrajStep{"s", ToolCall::search(w.start_entity), std::nullopt, 1}));
        CandidateStep repeat{"again", ToolCall::search(w.start_entity)};
        auto s = oracle_score(w, policy, task, tr, repeat, w.spec.default_step_budget(), 8);
        CHECK(s.value == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("oracle scorer: a strictly helpful step scores above zero")
{
    auto policy = make_world_policy({0.1, 0.1});
    auto [w, task] = generate_world(WorldSpec{3, 12, 2, 2, 4});
    Trajectory tr{task.task_id, {}, std::nullopt};
    tr = append_step(tr, execute_step(w, TrajStep{"s", ToolCall::search(w.start_entity), std::nullopt, 1}));
    CandidateStep gold{"open gold", ToolCall::open(w.gold_chain[0].page_id)};
    CHECK(oracle_score(w, policy, task, tr, gold, w.spec.default_step_budget(), 8).value > 0.0);
}

TEST_CASE("oracle scores average to zero under the policy's own distribution")
{
    auto policy = make_world_policy({0.1, 0.2});
    auto [w, task] = generate_world(WorldSpec{7, 12, 2, 3, 4});
    int budget = w.spec.default_step_budget();
    Trajectory tr{task.task_id, {}, std::nullopt};
    for (int depth = 0; depth < 3; ++depth) {
        auto dist = policy.distribution(task, tr);
        double expectation = 0.0;
        for (const auto& ws : dist)
            expectation += ws.probability * oracle_score(w, policy, task, tr, ws.step, budget, 8).value;
        CHECK(std::abs(expectation) <= 1e-12);
        tr = oracle::extend(w, tr, dist.front().step);
    }
}

TEST_CASE("oracle scorer needs a scripted policy")
{
    struct Opaque : Policy {
        std::vector<CandidateStep> propose(const TaskInstance&, const Trajectory&, std::string_view, int,
                                           std::uint64_t) const override
        {
            return {};
        }
    } opaque;
    auto [w, task] = generate_world(WorldSpec{1});
    WorldSet ws;
    ws.add(w);
    OracleScorer scorer(ws, opaque, 0, 8);
    Trajectory empty{task.task_id, {}, std::nullopt};
    CandidateStep c{"r", ToolCall::search("x")};
    ScoringInput in{task, empty, "", "", c};
    try {
        score_step(scorer, in, -4);
        FAIL("expected NonEnumerablePolicy");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NonEnumerablePolicy);
    }
}
