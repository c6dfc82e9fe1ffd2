// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "isprm/error.hpp"
#include "isprm/eval.hpp"

using namespace isprm;

namespace {

class ConstantScorer final : public StepScorer {
  public:
    StepScore score(const ScoringInput&) const override { return {0.0, std::nullopt, id(), false}; }
    std::string id() const override { return "constant"; }
};

class DownPolicy final : public Policy {
  public:
    std::vector<CandidateStep> propose(const TaskInstance&, const Trajectory&, std::string_view, int,
                                       std::uint64_t) const override
    {
        throw Error(Errc::BackendUnavailable, "backend gone");
    }
};

struct Suite {
    WorldSet worlds;
    BenchmarkSuite suite;
    ScriptedPolicy policy = make_world_policy();
    ExtractiveSummarizer summarizer;

    explicit Suite(int count, int runs = 3)
    {
        suite.suite_id = "unit";
        suite.runs_per_task = runs;
        for (int i = 0; i < count; ++i) {
            auto [w, t] = generate_world(WorldSpec{static_cast<std::uint64_t>(300 + i), 12, 2, 2, 4});
            worlds.add(w);
            suite.tasks.push_back(t);
        }
    }
};

} // namespace

TEST_CASE("Avg@k of an always-correct agent is 1")
{
    Suite s(1);
    ScriptedPolicy oracle_agent([](const TaskInstance& task, const Trajectory&) {
        return StepDistribution{{{"known", ToolCall::answer(task.gold_answer)}, 1.0}};
    });
    ConstantScorer scorer;
    SearchEnv env{s.worlds, oracle_agent, scorer, s.summarizer};
    auto report = run_benchmark(s.suite, env, SearchConfig{});
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].avg == 1.0);
    CHECK(report.rows[0].episodes.size() == 3);
}

TEST_CASE("Avg@k is the mean of per-run accuracies")
{
    ReportRow row;
    row.episodes = {{"a", 0, true, true}, {"b", 0, true, false}, {"a", 1, true, false},
                    {"b", 1, true, true}, {"a", 2, true, true},  {"b", 2, true, true}};
    CHECK(recompute_avg(row, 3) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("empty suites are rejected")
{
    Suite s(0);
    ConstantScorer scorer;
    SearchEnv env{s.worlds, s.policy, scorer, s.summarizer};
    try {
        run_benchmark(s.suite, env, SearchConfig{});
        FAIL("expected EmptySuite");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptySuite);
    }
}

TEST_CASE("duplicate task ids are rejected")
{
    Suite s(1);
    s.suite.tasks.push_back(s.suite.tasks.front());
    CHECK_THROWS_AS(s.suite.validate(), Error);
}

TEST_CASE("context ablation: one row per mode, identical rows for context-blind scorers")
{
    Suite s(6);
    ConstantScorer constant;
    SearchEnv env{s.worlds, s.policy, constant, s.summarizer};
    auto modes = default_ablation_modes();
    auto report = ablate_context_modes(s.suite, env, SearchConfig{}, modes, 4);
    REQUIRE(report.rows.size() == 5);
    for (const auto& row : report.rows) {
        CHECK(row.avg == report.rows[0].avg);
        CHECK(row.run_accuracy == report.rows[0].run_accuracy);
    }

    OracleScorer oracle(s.worlds, s.policy, 0, 8);
    SearchEnv oenv{s.worlds, s.policy, oracle, s.summarizer};
    auto oreport = ablate_context_modes(s.suite, oenv, SearchConfig{}, modes, 4);
    for (const auto& row : oreport.rows) {
        CHECK(row.avg == oreport.rows[0].avg);
        for (std::size_t i = 0; i < row.episodes.size(); ++i)
            CHECK(row.episodes[i].correct == oreport.rows[0].episodes[i].correct);
    }
}

TEST_CASE("n sweep: one row per n, n=1 equals the base agent")
{
    Suite s(5);
    OracleScorer oracle(s.worlds, s.policy, 0, 8);
    SearchEnv env{s.worlds, s.policy, oracle, s.summarizer};
    auto ns = default_n_values();
    auto report = sweep_n(s.suite, env, SearchConfig{}, ns, 4);
    CHECK(report.rows.size() == ns.size());

    ConstantScorer constant;
    SearchEnv base{s.worlds, s.policy, constant, s.summarizer};
    SearchConfig one;
    one.n = 1;
    auto base_report = run_benchmark(s.suite, base, one, 2);
    CHECK(report.rows[0].avg == base_report.rows[0].avg);
}

TEST_CASE("results do not depend on the worker count")
{
    Suite s(6);
    OracleScorer oracle(s.worlds, s.policy, 0, 8);
    SearchEnv env{s.worlds, s.policy, oracle, s.summarizer};
    auto a = run_benchmark(s.suite, env, SearchConfig{}, 1);
    auto b = run_benchmark(s.suite, env, SearchConfig{}, 8);
    CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("backend failures are recorded as flagged incorrect episodes")
{
    Suite s(2, 2);
    DownPolicy down;
    ConstantScorer scorer;
    SearchEnv env{s.worlds, down, scorer, s.summarizer};
    auto report = run_benchmark(s.suite, env, SearchConfig{});
    REQUIRE(report.rows[0].episodes.size() == 4);
    for (const auto& e : report.rows[0].episodes) {
        CHECK(e.flagged);
        CHECK_FALSE(e.correct);
        CHECK(e.error.find("backend gone") != std::string::npos);
    }
    CHECK(report.rows[0].avg == 0.0);
}

TEST_CASE("report audit, round trip and table")
{
    Suite s(4);
    OracleScorer oracle(s.worlds, s.policy, 0, 8);
    SearchEnv env{s.worlds, s.policy, oracle, s.summarizer};
    std::vector<int> ns{1, 4};
    auto report = sweep_n(s.suite, env, SearchConfig{}, ns, 2);
    for (const auto& row : report.rows) {
        CHECK(recompute_avg(row, report.runs_per_task) == row.avg);
        double mean = 0.0;
        for (double r : row.run_accuracy)
            mean += r;
        CHECK(mean / static_cast<double>(row.run_accuracy.size()) == doctest::Approx(row.avg).epsilon(1e-12));
    }
    CHECK(report_from_json(nlohmann::json::parse(to_json(report).dump())) == report);
    auto table = render_table(report);
    CHECK(table.find("n=1") != std::string::npos);
    CHECK(table.find("n=4") != std::string::npos);
    CHECK(table.find("Avg@3") != std::string::npos);
}

TEST_CASE("thresholds and binomial delta intervals")
{
    BenchmarkSuite suite{"s", {TaskInstance{"a", "q", "x", std::nullopt}}, 3, 0.5};
    Report r{"s", 3, {ReportRow{"low", {}, 0.4, {}}, ReportRow{"high", {}, 0.6, {}}}};
    auto v = threshold_violations(suite, r);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "low");

    auto ci = binomial_delta_interval(0.5, 100, 0.7, 100);
    CHECK(ci.contains(0.2));
    double half = 1.96 * std::sqrt(0.25 / 100 + 0.21 / 100);
    CHECK(ci.lo == doctest::Approx(0.2 - half));
    CHECK(ci.hi == doctest::Approx(0.2 + half));
}
