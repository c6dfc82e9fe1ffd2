// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>

#include "isprm/error.hpp"
#include "isprm/policy.hpp"
#include "isprm/sim_world.hpp"
#include "isprm/summarizer.hpp"

using namespace isprm;

namespace {

Trajectory walk(const World& w, const TaskInstance& task, const Policy& policy, int steps, std::uint64_t seed)
{
    Trajectory tr{task.task_id, {}, std::nullopt};
    while (static_cast<int>(tr.length()) < steps && !tr.terminal()) {
        auto c = policy.propose(task, tr, "", 1, seed).front();
        tr = append_step(tr, execute_step(w, c.as_step(static_cast<int>(tr.length()) + 1)));
    }
    return tr;
}

} // namespace

TEST_CASE("first update restates the query and the step-1 plan")
{
    ExtractiveSummarizer s;
    TrajStep step{"Let me think. I will search for Foo Bar.", ToolCall::search("Foo Bar"), "results: p1", 1};
    auto h = update_summary("Who is the patron of Foo Bar?", Summary{}, "", step, s);
    CHECK(h.step_index == 1);
    CHECK(h.text.find("Who is the patron of Foo Bar?") != std::string::npos);
    CHECK(h.text.find("I will search for Foo Bar.") != std::string::npos);
    CHECK(h.text.find("search") != std::string::npos);
    CHECK(h.text.find("Let me think.") == std::string::npos);
}

TEST_CASE("extractive updates are deterministic and index-checked")
{
    ExtractiveSummarizer s;
    TrajStep step{"Open it.", ToolCall::open("p1"), std::nullopt, 2};
    Summary prev{"Question: q", 1};
    CHECK(update_summary("q", prev, "The patron of A is B.", step, s) ==
          update_summary("q", prev, "The patron of A is B.", step, s));
    TrajStep far{"x", ToolCall::open("p1"), std::nullopt, 4};
    try {
        update_summary("q", prev, "", far, s);
        FAIL("expected IndexGap");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::IndexGap);
    }
}

TEST_CASE("findings keep facts tied to the query and drop filler")
{
    auto [w, task] = generate_world(WorldSpec{17, 12, 2, 2, 4});
    ExtractiveSummarizer s;
    Summary h;
    std::string prev;
    Trajectory tr{task.task_id, {}, std::nullopt};
    auto add = [&](CandidateStep c) {
        auto st = execute_step(w, c.as_step(static_cast<int>(tr.length()) + 1));
        h = update_summary(task.query, h, prev, st, s);
        prev = *st.response;
        tr = append_step(tr, st);
    };
    add({"search", ToolCall::search(w.start_entity)});
    add({"open", ToolCall::open(w.gold_chain[0].page_id)});
    add({"next", ToolCall::search("whatever")});
    CHECK(h.text.find(w.gold_chain[0].fact) != std::string::npos);
    CHECK(h.text.find("mentions") == std::string::npos);
}

TEST_CASE("summaries stay within the bound and evict the oldest findings first")
{
    auto policy = make_world_policy({0.0, 0.3});
    for (std::size_t bound : {200u, 400u, 2000u}) {
        ExtractiveSummarizer s(bound);
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto [w, task] = generate_world(WorldSpec{seed, 12, 3, 3, 6});
            auto tr = walk(w, task, policy, 8, seed);
            for (const auto& h : summarize_trajectory(task.query, tr, s))
                CHECK(h.char_len() <= bound);
        }
    }
    // the first finding is gone once later findings crowd it out
    ExtractiveSummarizer small(260);
    Summary h;
    std::string q = "Track Alpha Beta.";
    std::vector<std::string> facts;
    for (int i = 0; i < 8; ++i)
        facts.push_back("Alpha Beta fact number " + std::to_string(i) + " is recorded here.");
    std::string prev;
    for (int i = 0; i < 8; ++i) {
        TrajStep st{"Continue.", ToolCall::search("Alpha"), facts[static_cast<std::size_t>(i)], i + 1};
        h = update_summary(q, h, prev, st, small);
        prev = facts[static_cast<std::size_t>(i)];
    }
    CHECK(h.text.find(facts[6]) != std::string::npos);
    CHECK(h.text.find(facts[0]) == std::string::npos);
}

TEST_CASE("summary inputs render and parse back")
{
    SummaryInputs in{"q?", "old summary", "obs text\nline", "reason", ToolCall::open("p3")};
    auto text = render_summary_input(in);
    CHECK(parse_summary_input(text) == in);
    SummaryInputs base{"q?", "", "", "reason", ToolCall::search("x")};
    CHECK(render_summary_input(base).find(kNoPriorSummary) != std::string::npos);
    CHECK(parse_summary_input(render_summary_input(base)) == base);
    CHECK_THROWS_AS(parse_summary_input("garbage"), SchemaViolation);
}

TEST_CASE("SFT records contain the previous summary exactly once")
{
    Summary prev{"Question: q\nFindings:\n- unique-marker-xyz", 1};
    TrajStep step{"Next.", ToolCall::open("p2"), std::nullopt, 2};
    Summary target{"target text", 2};
    auto rec = emit_sft_record("q", prev, "obs", step, target);
    auto first = rec.input_context.find(prev.text);
    REQUIRE(first != std::string::npos);
    CHECK(rec.input_context.find(prev.text, first + 1) == std::string::npos);
    CHECK(rec.target_summary == "target text");
    auto parsed = parse_summary_input(rec.input_context);
    CHECK(parsed.query == "q");
    CHECK(parsed.prev_summary == prev.text);
    CHECK(parsed.prev_response == "obs");
    CHECK(parsed.reasoning == "Next.");
    CHECK(parsed.action == ToolCall::open("p2"));
    CHECK(sft_record_from_json(nlohmann::json::parse(to_json(rec).dump())) == rec);

    auto base = emit_sft_record("q", Summary{}, "", TrajStep{"r", ToolCall::search("x"), std::nullopt, 1}, target);
    CHECK(base.input_context.find(kNoPriorSummary) != std::string::npos);
}

TEST_CASE("summary cache persists by (task, t)")
{
    SummaryCache cache;
    cache.put("a", Summary{"one", 1});
    cache.put("a", Summary{"two", 2});
    cache.put("b", Summary{"three", 1});
    auto path = std::filesystem::temp_directory_path() / "isprm_summary_cache_test.jsonl";
    cache.save(path);
    auto back = SummaryCache::load(path);
    REQUIRE(back.find("a", 2));
    CHECK(back.find("a", 2)->text == "two");
    CHECK(back.find("b", 1)->text == "three");
    CHECK_FALSE(back.find("b", 2));
    CHECK(back.size() == 3);
    std::filesystem::remove(path);
}
