// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "isprm/judge.hpp"
#include "isprm/policy.hpp"
#include "isprm/scorer.hpp"
#include "isprm/sim_world.hpp"
#include "isprm/summarizer.hpp"
#include "isprm/trajectory.hpp"

namespace isprm {

struct SearchConfig {
    int n = 4;
    /// Total step budget; 0 picks 2 * hop_depth + 2 from the task's world.
    int max_steps = 0;
    ContextMode context_mode = ContextMode::summary();
    std::uint64_t seed = 0;
    /// Value a failed scorer call is replaced with (the scorer's worst score).
    double scorer_fallback = -4.0;

    void validate() const;
};

struct SearchEnv {
    const WorldSet& worlds;
    const Policy& policy;
    const StepScorer& scorer;
    const SummaryBackend& summarizer;
    Judge judge = exact_match_judge;
    /// Scoring the n candidates of one step may run on this many threads.
    int scoring_workers = 1;
};

struct EpisodeResult {
    Trajectory trajectory;
    bool answered = false;
    bool correct = false;
    int steps_used = 0;
    /// scores[t][i]: score of candidate i at step t+1.
    std::vector<std::vector<double>> score_table;
    std::vector<int> selected;
    /// Some step fell back to candidate 0 after a scorer failure.
    bool flagged = false;

    bool operator==(const EpisodeResult&) const = default;
};

/// Index of the largest value, lowest index on ties.
std::size_t argmax_select(std::span<const double> scores);
std::size_t argmax_select(std::span<const StepScore> scores);

/// Greedy best-of-n: propose n, score all n, execute the argmax, fold it into
/// the summary, repeat until an answer or the step budget.
EpisodeResult run_episode(const SearchEnv& env, const TaskInstance& task, const SearchConfig& config);

nlohmann::json to_json(const EpisodeResult& result);
EpisodeResult episode_from_json(const nlohmann::json& j);

} // namespace isprm
