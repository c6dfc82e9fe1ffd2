// SPDX-License-Identifier: Apache-2.0
#include "isprm/annotator.hpp"

#include <algorithm>

#include "isprm/error.hpp"
#include "isprm/hashing.hpp"
#include "isprm/parallel.hpp"
#include "isprm/records.hpp"

namespace isprm {

using nlohmann::json;

int AnnotationEnv::budget_for(const TaskInstance& task) const
{
    if (step_budget > 0)
        return step_budget;
    return worlds.for_task(task).spec.default_step_budget();
}

namespace {

RolloutRecord run_rollout(const AnnotationEnv& env, const TaskInstance& task, const Trajectory& prefix, int budget,
                          std::uint64_t rollout_seed)
{
    const bool scripted = dynamic_cast<const ScriptedPolicy*>(&env.policy) != nullptr;
    RolloutRecord rec;
    Trajectory traj = prefix;
    bool first = true;
    while (!traj.terminal() && traj.length() < static_cast<std::size_t>(budget)) {
        std::string context = scripted ? std::string() : render_context(traj, std::nullopt, ContextMode::full());
        auto cand = env.policy.propose(task, traj, context, 1, rollout_seed).front();
        if (first) {
            rec.first_step = cand;
            first = false;
        }
        auto step = cand.as_step(static_cast<int>(traj.length()) + 1);
        step.response = env.worlds.execute(task, step.action).text;
        traj = append_step(std::move(traj), std::move(step));
    }
    rec.success = traj.terminal() && env.judge(*traj.terminal_answer, task.gold_answer);
    rec.length = static_cast<int>(traj.length());
    rec.trajectory = std::move(traj);
    return rec;
}

} // namespace

MeanAccuracy estimate_mean_accuracy(const AnnotationEnv& env, const TaskInstance& task, const Trajectory& prefix,
                                    int M, std::uint64_t seed)
{
    if (M < 1)
        throw Error(Errc::InvalidArgument, "M must be >= 1");
    if (prefix.terminal())
        throw Error(Errc::InvalidArgument, "cannot roll out from a terminal prefix");
    auto budget = env.budget_for(task);

    MeanAccuracy out;
    out.rollouts.resize(static_cast<std::size_t>(M));
    parallel_for(out.rollouts.size(), env.workers, [&](std::size_t j) {
        out.rollouts[j] = run_rollout(env, task, prefix, budget, derive_seed(seed, j));
    });
    auto wins = std::count_if(out.rollouts.begin(), out.rollouts.end(), [](const auto& r) { return r.success; });
    out.m = static_cast<double>(wins) / static_cast<double>(M);
    return out;
}

double info_gain(double m_prev, double m_curr, int M)
{
    return (m_curr - m_prev) * static_cast<double>(M) / 2.0;
}

GainAnnotation annotate_gain(double m_prev, double m_curr, int M)
{
    return GainAnnotation{m_prev, m_curr, M, info_gain(m_prev, m_curr, M)};
}

std::optional<CandidatePair> build_candidate_pair(std::span<const RolloutRecord> rollouts, std::uint64_t seed)
{
    if (rollouts.size() < 2)
        return std::nullopt;

    std::optional<std::size_t> winner;
    for (std::size_t j = 0; j < rollouts.size(); ++j) {
        if (!rollouts[j].success)
            continue;
        if (!winner || rollouts[j].length < rollouts[*winner].length)
            winner = j;
    }
    if (!winner)
        return std::nullopt;

    bool all_same = std::all_of(rollouts.begin(), rollouts.end(),
                                [&](const auto& r) { return r.first_step.same_step(rollouts[0].first_step); });
    if (all_same)
        return std::nullopt;

    CounterRng rng(derive_seed(seed, 0x105e5ULL));
    auto pick = static_cast<std::size_t>(rng.below(rollouts.size() - 1));
    auto loser = pick >= *winner ? pick + 1 : pick;
    return CandidatePair{rollouts[*winner].first_step, rollouts[loser].first_step, *winner, loser};
}

namespace {

struct SideResult {
    TrajStep step;
    double m = 0.0;
};

SideResult evaluate_side(const AnnotationEnv& env, const TaskInstance& task, const Trajectory& prefix,
                         const CandidateStep& cand, int M, std::uint64_t seed)
{
    auto step = cand.as_step(static_cast<int>(prefix.length()) + 1);
    step.response = env.worlds.execute(task, step.action).text;
    auto extended = append_step(prefix, step);
    double m = 0.0;
    if (extended.terminal())
        m = env.judge(*extended.terminal_answer, task.gold_answer) ? 1.0 : 0.0;
    else if (extended.length() >= static_cast<std::size_t>(env.budget_for(task)))
        m = 0.0;
    else
        m = estimate_mean_accuracy(env, task, extended, M, seed).m;
    return {std::move(step), m};
}

bool degenerate(double m)
{
    return m == 0.0 || m == 1.0;
}

} // namespace

std::variant<PreferencePair, Filtered> annotate_pair(const AnnotationEnv& env, const TaskInstance& task,
                                                     const Trajectory& prefix, const CandidatePair& pair,
                                                     double m_prev, int M, std::uint64_t seed)
{
    auto a = evaluate_side(env, task, prefix, pair.winner, M, derive_seed(seed, 1));
    auto b = evaluate_side(env, task, prefix, pair.loser, M, derive_seed(seed, 2));
    AnnotatedStep first{std::move(a.step), annotate_gain(m_prev, a.m, M)};
    AnnotatedStep second{std::move(b.step), annotate_gain(m_prev, b.m, M)};

    if (degenerate(first.gain.m_curr) || degenerate(second.gain.m_curr))
        return Filtered{std::move(first), std::move(second)};

    PreferencePair out;
    out.task_id = task.task_id;
    out.prefix = prefix;
    out.provisional_winner_flipped = second.gain.g > first.gain.g;
    if (out.provisional_winner_flipped) {
        out.winner = std::move(second);
        out.loser = std::move(first);
    } else {
        out.winner = std::move(first);
        out.loser = std::move(second);
    }
    return out;
}

ChainResult chain_annotate(const AnnotationEnv& env, const TaskInstance& task, int M, int max_pairs,
                           std::uint64_t seed)
{
    if (max_pairs < 1)
        throw Error(Errc::InvalidArgument, "max_pairs must be >= 1");
    auto budget = static_cast<std::size_t>(env.budget_for(task));
    ChainResult out;
    out.trajectory.task_id = task.task_id;

    while (static_cast<int>(out.pairs.size()) < max_pairs) {
        auto& prefix = out.trajectory;
        if (prefix.terminal() || prefix.length() >= budget)
            break;
        auto t = static_cast<std::uint64_t>(prefix.length()) + 1;
        auto base = estimate_mean_accuracy(env, task, prefix, M, derive_seed(seed, t, 0));
        auto cand = build_candidate_pair(base.rollouts, derive_seed(seed, t, 1));
        if (!cand)
            break;
        auto result = annotate_pair(env, task, prefix, *cand, base.m, M, derive_seed(seed, t, 2));
        if (auto* pair = std::get_if<PreferencePair>(&result)) {
            auto next = pair->winner.step;
            out.pairs.push_back(std::move(*pair));
            out.trajectory = append_step(std::move(out.trajectory), std::move(next));
            continue;
        }
        auto& filtered = std::get<Filtered>(result);
        const auto& better = filtered.provisional_loser.gain.m_curr > filtered.provisional_winner.gain.m_curr
                                 ? filtered.provisional_loser
                                 : filtered.provisional_winner;
        if (better.gain.m_curr == 0.0)
            break;
        out.trajectory = append_step(std::move(out.trajectory), better.step);
    }
    return out;
}

BinaryLabel binary_label(const GainAnnotation& annotation, double threshold)
{
    if (annotation.m_prev <= 0.0)
        throw Error(Errc::ZeroBaseline, "m_prev is 0");
    return annotation.m_curr / annotation.m_prev > threshold ? BinaryLabel::Positive : BinaryLabel::Negative;
}

std::vector<RelabeledStep> binary_relabel(std::span<const GainAnnotation> annotations, double threshold)
{
    std::vector<RelabeledStep> out;
    out.reserve(annotations.size());
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        RelabeledStep r{i, std::nullopt, false};
        if (annotations[i].m_prev <= 0.0)
            r.zero_baseline = true;
        else
            r.label = binary_label(annotations[i], threshold);
        out.push_back(r);
    }
    return out;
}

std::string prefix_ref(std::string_view task_id, std::size_t steps)
{
    return std::string(task_id) + "#" + std::to_string(steps);
}

PairRecord to_record(const PreferencePair& pair)
{
    auto side = [](const AnnotatedStep& s) {
        return PairRecord::Side{s.step.reasoning, s.step.action, s.gain.m_curr, s.gain.g};
    };
    return PairRecord{pair.task_id,
                      pair.t(),
                      prefix_ref(pair.task_id, pair.prefix.length()),
                      side(pair.winner),
                      side(pair.loser),
                      pair.winner.gain.m_prev,
                      pair.winner.gain.M,
                      pair.provisional_winner_flipped};
}

namespace {

json side_json(const PairRecord::Side& s)
{
    return json{{"reasoning", s.reasoning}, {"tool", s.action.tool_name}, {"args", s.action.arguments},
                {"m", s.m},                 {"g", s.g}};
}

PairRecord::Side side_from_json(const json& j, const std::string& path)
{
    PairRecord::Side s;
    s.reasoning = records::require_string(j, "reasoning", path);
    s.action.tool_name = records::require_string(j, "tool", path);
    const auto& args = records::require(j, "args", path);
    if (!args.is_object())
        throw SchemaViolation(path + ".args", "expected object");
    for (const auto& [k, v] : args.items()) {
        if (!v.is_string())
            throw SchemaViolation(path + ".args." + k, "expected string");
        s.action.arguments.emplace(k, v.get<std::string>());
    }
    s.m = records::require_number(j, "m", path);
    s.g = records::require_number(j, "g", path);
    return s;
}

} // namespace

json to_json(const PairRecord& rec)
{
    return json{{"task_id", rec.task_id},
                {"t", rec.t},
                {"prefix_ref", rec.prefix_ref},
                {"winner", side_json(rec.winner)},
                {"loser", side_json(rec.loser)},
                {"m_prev", rec.m_prev},
                {"M", rec.M},
                {"flipped", rec.flipped}};
}

PairRecord pair_record_from_json(const json& j)
{
    PairRecord rec;
    rec.task_id = records::require_string(j, "task_id", "");
    rec.t = static_cast<int>(records::require_integer(j, "t", ""));
    if (rec.t < 1)
        throw SchemaViolation("t", "must be >= 1");
    rec.prefix_ref = records::require_string(j, "prefix_ref", "");
    rec.winner = side_from_json(records::require(j, "winner", ""), "winner");
    rec.loser = side_from_json(records::require(j, "loser", ""), "loser");
    rec.m_prev = records::require_number(j, "m_prev", "");
    rec.M = static_cast<int>(records::require_integer(j, "M", ""));
    if (rec.M < 1)
        throw SchemaViolation("M", "must be >= 1");
    rec.flipped = records::require_bool(j, "flipped", "");
    if (rec.winner.g < rec.loser.g)
        throw SchemaViolation("winner.g", "winner gain below loser gain");
    return rec;
}

} // namespace isprm
