// SPDX-License-Identifier: Apache-2.0
#include "isprm/search.hpp"

#include "isprm/error.hpp"
#include "isprm/parallel.hpp"
#include "isprm/records.hpp"

namespace isprm {

using nlohmann::json;

void SearchConfig::validate() const
{
    if (n < 1)
        throw Error(Errc::InvalidArgument, "n must be >= 1");
    if (max_steps < 0)
        throw Error(Errc::InvalidArgument, "max_steps must be >= 1 (or 0 for the world default)");
}

std::size_t argmax_select(std::span<const double> scores)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best])
            best = i;
    return best;
}

std::size_t argmax_select(std::span<const StepScore> scores)
{
    std::vector<double> values;
    values.reserve(scores.size());
    for (const auto& s : scores)
        values.push_back(s.value);
    return argmax_select(values);
}

EpisodeResult run_episode(const SearchEnv& env, const TaskInstance& task, const SearchConfig& config)
{
    config.validate();
    int budget = config.max_steps;
    if (budget == 0)
        budget = env.worlds.for_task(task).spec.default_step_budget();

    EpisodeResult out;
    out.trajectory.task_id = task.task_id;
    Summary summary;
    const bool use_summary = config.context_mode.kind() == ContextMode::Kind::Summary;

    while (!out.trajectory.terminal() && out.steps_used < budget) {
        auto context = render_context(out.trajectory, use_summary ? std::optional<Summary>(summary) : std::nullopt,
                                      config.context_mode);
        auto candidates = env.policy.propose(task, out.trajectory, context, config.n, config.seed);
        auto prev_response = out.trajectory.latest_response();

        std::vector<StepScore> scores(candidates.size());
        parallel_for(candidates.size(), env.scoring_workers, [&](std::size_t i) {
            ScoringInput input{task, out.trajectory, context, prev_response, candidates[i]};
            scores[i] = score_step(env.scorer, input, config.scorer_fallback);
        });

        std::size_t chosen = 0;
        bool failed = false;
        for (const auto& s : scores)
            failed = failed || s.flagged;
        if (failed)
            out.flagged = true;
        else
            chosen = argmax_select(scores);

        std::vector<double> row;
        for (const auto& s : scores)
            row.push_back(s.value);
        out.score_table.push_back(std::move(row));
        out.selected.push_back(static_cast<int>(chosen));

        auto step = candidates[chosen].as_step(static_cast<int>(out.trajectory.length()) + 1);
        step.response = env.worlds.execute(task, step.action).text;
        if (use_summary)
            summary = update_summary(task.query, summary, prev_response, step, env.summarizer);
        out.trajectory = append_step(std::move(out.trajectory), std::move(step));
        ++out.steps_used;
    }

    out.answered = out.trajectory.terminal();
    out.correct = out.answered && env.judge(*out.trajectory.terminal_answer, task.gold_answer);
    return out;
}

json to_json(const EpisodeResult& r)
{
    return json{{"trajectory", to_json(r.trajectory)},
                {"answered", r.answered},
                {"correct", r.correct},
                {"steps_used", r.steps_used},
                {"scores", r.score_table},
                {"selected", r.selected},
                {"flagged", r.flagged}};
}

EpisodeResult episode_from_json(const json& j)
{
    EpisodeResult r;
    r.trajectory = trajectory_from_json(records::require(j, "trajectory", ""));
    r.answered = records::require_bool(j, "answered", "");
    r.correct = records::require_bool(j, "correct", "");
    r.steps_used = static_cast<int>(records::require_integer(j, "steps_used", ""));
    r.flagged = records::require_bool(j, "flagged", "");
    try {
        r.score_table = records::require(j, "scores", "").get<std::vector<std::vector<double>>>();
        r.selected = records::require(j, "selected", "").get<std::vector<int>>();
    } catch (const json::type_error& e) {
        throw SchemaViolation("scores|selected", e.what());
    }
    if (r.correct && !r.answered)
        throw SchemaViolation("correct", "correct implies answered");
    return r;
}

} // namespace isprm
