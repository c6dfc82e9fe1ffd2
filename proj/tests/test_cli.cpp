// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "isprm/annotator.hpp"
#include "isprm/cli.hpp"
#include "isprm/error.hpp"
#include "isprm/records.hpp"

using namespace isprm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
    fs::path dir;
    std::ostringstream out;
    std::ostringstream err;

    explicit Sandbox(const std::string& name)
    {
        dir = fs::temp_directory_path() / ("isprm-cli-" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
    }

    std::string path(const std::string& file) const { return (dir / file).string(); }

    int run(std::vector<std::string> args)
    {
        out.str("");
        err.str("");
        return cli::dispatch(args, out, err);
    }

    /// Five two-hop worlds written under `name`.
    void make_worlds(const std::string& name = "w", int count = 5)
    {
        REQUIRE(run({"world", "gen", "--seed", "11", "--count", std::to_string(count), "--out", path(name)}) == 0);
    }
};

std::string slurp(const std::string& p)
{
    return records::read_file(p);
}

} // namespace

TEST_CASE("world gen writes worlds, tasks and a manifest")
{
    Sandbox s("world-gen");
    s.make_worlds();
    auto worlds = records::read_jsonl(s.path("w.worlds.jsonl"), records::schema::worlds);
    auto tasks = records::read_jsonl(s.path("w.tasks.jsonl"), records::schema::tasks);
    CHECK(worlds.size() == 5);
    CHECK(tasks.size() == 5);
    auto manifest = records::read_jsonl(s.path("w.world-gen.manifest.jsonl"), records::schema::manifest);
    REQUIRE(manifest.size() == 1);
    CHECK(manifest[0]["command"] == "world gen");
}

TEST_CASE("default output prefix is the first world id")
{
    Sandbox s("world-prefix");
    auto cwd = fs::current_path();
    fs::current_path(s.dir);
    CHECK(s.run({"world", "gen", "--seed", "4"}) == 0);
    fs::current_path(cwd);
    CHECK(s.out.str().find("w4-e12-h2-b2-z4.worlds.jsonl") != std::string::npos);
}

TEST_CASE("annotate is deterministic and independent of workers")
{
    Sandbox s("annotate");
    s.make_worlds();
    REQUIRE(s.run({"annotate", "--tasks", s.path("w.tasks.jsonl"), "--seed", "3", "--out", s.path("a")}) == 0);
    auto first = slurp(s.path("a.pairs.jsonl"));
    auto chains = slurp(s.path("a.chains.jsonl"));
    REQUIRE(s.run({"annotate", "--tasks", s.path("w.tasks.jsonl"), "--seed", "3", "--workers", "4", "--out",
                   s.path("b")}) == 0);
    CHECK(slurp(s.path("b.pairs.jsonl")) == first);
    CHECK(slurp(s.path("b.chains.jsonl")) == chains);

    for (const auto& row : records::read_jsonl(s.path("a.pairs.jsonl"), records::schema::pairs)) {
        auto rec = pair_record_from_json(row);
        CHECK(rec.winner.g >= rec.loser.g);
        CHECK(rec.winner.m > 0.0);
        CHECK(rec.winner.m < 1.0);
    }

    SUBCASE("a manifest replays the run bit-exactly")
    {
        fs::remove(s.path("a.pairs.jsonl"));
        REQUIRE(s.run({"annotate", "--config", s.path("a.annotate.manifest.jsonl")}) == 0);
        CHECK(slurp(s.path("a.pairs.jsonl")) == first);
    }
    SUBCASE("a manifest for another command is rejected")
    {
        CHECK(s.run({"bench", "--config", s.path("a.annotate.manifest.jsonl")}) == 1);
    }
}

TEST_CASE("unknown commands and flags exit 1")
{
    Sandbox s("errors");
    CHECK(s.run({"frobnicate"}) == 1);
    CHECK(s.run({}) == 1);
    CHECK(s.run({"annotate", "--no-such-flag", "1"}) == 1);
    CHECK(s.run({"annotate"}) == 1);
    CHECK(s.err.str().find("tasks") != std::string::npos);
    CHECK(s.run({"annotate", "--tasks", s.path("missing.jsonl")}) == 1);
}

TEST_CASE("help exits 0")
{
    Sandbox s("help");
    CHECK(s.run({"--help"}) == 0);
    CHECK(s.run({"annotate", "--help"}) == 0);
    CHECK(s.out.str().find("--tasks") != std::string::npos);
}

TEST_CASE("config precedence: defaults < config file < flags")
{
    cli::RunConfig base;
    auto cfg = cli::overlay(base, json{{"M", 16}, {"seed", 5}, {"backend", {{"max_retries", 7}}}});
    CHECK(cfg.M == 16);
    CHECK(cfg.seed == 5);
    CHECK(cfg.N == base.N);
    CHECK(cfg.backend.max_retries == 7);
    CHECK_THROWS_AS(cli::overlay(base, json{{"bogus", 1}}), Error);
    CHECK(cli::overlay(base, cli::to_json(cfg)) == cfg);

    Sandbox s("precedence");
    s.make_worlds("w", 2);
    records::write_file(s.path("cfg.json"), json{{"M", 4}, {"seed", 9}}.dump());
    REQUIRE(s.run({"annotate", "--config", s.path("cfg.json"), "--tasks", s.path("w.tasks.jsonl"), "--M", "6", "--out",
                   s.path("p")}) == 0);
    auto manifest = records::read_jsonl(s.path("p.annotate.manifest.jsonl"), records::schema::manifest);
    CHECK(manifest[0]["config"]["M"] == 6);
    CHECK(manifest[0]["config"]["seed"] == 9);

    records::write_file(s.path("bad.json"), json{{"bogus", 1}}.dump());
    CHECK(s.run({"annotate", "--config", s.path("bad.json"), "--tasks", s.path("w.tasks.jsonl")}) == 1);
}

TEST_CASE("rewards from a generation file")
{
    Sandbox s("rewards");
    s.make_worlds("w", 8);
    REQUIRE(s.run({"annotate", "--tasks", s.path("w.tasks.jsonl"), "--out", s.path("a")}) == 0);
    auto pairs = records::read_jsonl(s.path("a.pairs.jsonl"), records::schema::pairs);
    REQUIRE_FALSE(pairs.empty());

    std::vector<json> gens;
    for (const auto& row : pairs) {
        auto rec = pair_record_from_json(row);
        for (const char* side : {"winner", "loser"})
            for (int i = 0; i < 2; ++i)
                gens.push_back({{"pair_id", rec.pair_id()},
                                {"side", side},
                                {"rollout_idx", i},
                                {"text", "analysis\nScore: " + std::to_string(i)}});
    }
    records::write_jsonl(s.path("gens.jsonl"), records::schema::generations, gens);
    REQUIRE(s.run({"rewards", "--pairs", s.path("a.pairs.jsonl"), "--generations", s.path("gens.jsonl"), "--N", "2",
                   "--with-advantage", "true"}) == 0);
    auto rewards = records::read_jsonl(s.path("a.rewards.jsonl"), records::schema::rewards);
    CHECK(rewards.size() == 4 * pairs.size());

    SUBCASE("wrong group size is an error")
    {
        CHECK(s.run({"rewards", "--pairs", s.path("a.pairs.jsonl"), "--generations", s.path("gens.jsonl"), "--N",
                     "3"}) == 1);
    }
    SUBCASE("a generation without a score is an error")
    {
        gens[0]["text"] = "no number here";
        records::write_jsonl(s.path("gens.jsonl"), records::schema::generations, gens);
        CHECK(s.run({"rewards", "--pairs", s.path("a.pairs.jsonl"), "--generations", s.path("gens.jsonl"), "--N",
                     "2"}) == 1);
    }
}

TEST_CASE("export writes SFT records and a summary cache")
{
    Sandbox s("export");
    s.make_worlds("w", 3);
    REQUIRE(s.run({"annotate", "--tasks", s.path("w.tasks.jsonl"), "--out", s.path("a")}) == 0);
    REQUIRE(s.run({"export", "--trajectories", s.path("a.chains.jsonl"), "--tasks", s.path("w.tasks.jsonl")}) == 0);
    auto chains = records::read_jsonl(s.path("a.chains.jsonl"), records::schema::trajectories);
    std::size_t steps = 0;
    for (const auto& c : chains)
        steps += trajectory_from_json(c).steps.size();
    auto sft = records::read_jsonl(s.path("a.chains.sft.jsonl"), records::schema::sft);
    CHECK(sft.size() == steps);
    CHECK(fs::exists(s.path("a.chains.summaries.jsonl")));
}

TEST_CASE("search run writes one episode per task")
{
    Sandbox s("search");
    s.make_worlds("w", 4);
    REQUIRE(s.run({"search", "run", "--tasks", s.path("w.tasks.jsonl"), "--n", "4"}) == 0);
    auto eps = records::read_jsonl(s.path("w.episodes.jsonl"), records::schema::episodes);
    CHECK(eps.size() == 4);
    CHECK(eps[0].contains("task_id"));
    CHECK(s.out.str().find("correct") != std::string::npos);
}

TEST_CASE("bench, ablate and the accuracy threshold")
{
    Sandbox s("bench");
    s.make_worlds("w", 4);
    records::write_file(s.path("suite.json"),
                        json{{"suite_id", "tiny"}, {"runs_per_task", 2}, {"tasks", "w.tasks.jsonl"}}.dump());
    REQUIRE(s.run({"bench", "--suite", s.path("suite.json")}) == 0);
    CHECK(fs::exists(s.path("suite.bench.report.jsonl")));
    auto table = slurp(s.path("suite.bench.report.txt"));
    CHECK(table.find("Avg@2") != std::string::npos);
    auto report = slurp(s.path("suite.bench.report.jsonl"));
    REQUIRE(s.run({"bench", "--suite", s.path("suite.json"), "--workers", "4"}) == 0);
    CHECK(slurp(s.path("suite.bench.report.jsonl")) == report);

    REQUIRE(s.run({"ablate", "--suite", s.path("suite.json"), "--vary", "n", "--n-values", "1", "4"}) == 0);
    auto rows = records::read_jsonl(s.path("suite.ablate.report.jsonl"), records::schema::report);
    CHECK(rows[0]["rows"].size() == 2);

    records::write_file(s.path("hard.json"),
                        json{{"suite_id", "hard"},
                             {"runs_per_task", 1},
                             {"min_accuracy", 1.01},
                             {"worlds", json::array({json{{"seed", 1}, {"num_entities", 12}, {"hop_depth", 2}, {"branching", 2}, {"noise_pages", 4}}})}}
                            .dump());
    CHECK(s.run({"bench", "--suite", s.path("hard.json")}) == 1);
    CHECK(s.err.str().find("threshold violated") != std::string::npos);
}

TEST_CASE("an unreachable scorer backend exits 2")
{
    Sandbox s("backend");
    s.make_worlds("w", 1);
    int code = s.run({"search", "run", "--tasks", s.path("w.tasks.jsonl"), "--policy", "remote", "--endpoint",
                      "http://127.0.0.1:1", "--max-retries", "0", "--timeout-s", "1"});
    CHECK(code == 2);
    CHECK(s.err.str().find("BackendUnavailable") != std::string::npos);
}
