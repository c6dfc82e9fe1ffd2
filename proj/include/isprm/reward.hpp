// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace isprm {

enum class PairSide { Winner, Loser };

std::string_view to_string(PairSide side);
PairSide parse_side(std::string_view s);

/// One scorer generation for one side of a pair.
struct ScorerRollout {
    PairSide side = PairSide::Winner;
    std::string analysis;
    /// Already clamped to [-M/2, M/2].
    double g_hat = 0.0;
    bool clamped = false;
};

struct RewardBreakdown {
    double r_s = 0.0;
    double r_c = 0.0;
    double w = 0.0;
    double r = 0.0;
};

/// Comparison sign with sign(0) = +1.
constexpr double comparison_sign(double x) noexcept
{
    return x >= 0.0 ? 1.0 : -1.0;
}

/// r_s = 1 - |g - g_hat| / M
double score_reward(double g, double g_hat, int M);

/// r_c = (1/N) sum_j y * sign(g_hat_self - g_hat_counterpart_j), y = +1 for
/// the winner and -1 for the loser.
double comparison_reward(double g_hat_self, PairSide side, std::span<const double> counterpart_g_hats);

/// w = (g_plus - g_minus) / M
double adaptive_weight(double g_plus, double g_minus, int M);

/// r = r_s + w * r_c
double combined_reward(double r_s, double r_c, double w);

/// Breakdowns for the winner rollouts followed by the loser rollouts, each
/// compared against the other side's predictions from the same batch.
/// Throws LengthMismatch unless both lists have the same non-zero length.
std::vector<RewardBreakdown> group_rewards(double g_plus, double g_minus, int M,
                                           std::span<const ScorerRollout> winner_rollouts,
                                           std::span<const ScorerRollout> loser_rollouts);

struct PredictedScore {
    double g_hat = 0.0;
    bool clamped = false;
};

/// Value of the last `Score: <number>` line, clamped to [-M/2, M/2].
/// Throws NoScoreFound.
PredictedScore parse_predicted_score(std::string_view generation, int M);

ScorerRollout make_scorer_rollout(PairSide side, std::string_view generation, int M);

/// One exported line per scorer rollout.
struct RewardRecord {
    std::string pair_id;
    PairSide side = PairSide::Winner;
    int rollout_idx = 0;
    double g_true = 0.0;
    double g_hat = 0.0;
    RewardBreakdown reward;
    bool clamped = false;
    /// (r - group mean) / group std over the same side's N rollouts; metadata only.
    std::optional<double> advantage;
};

std::vector<RewardRecord> reward_records(const std::string& pair_id, double g_plus, double g_minus, int M,
                                         std::span<const ScorerRollout> winner_rollouts,
                                         std::span<const ScorerRollout> loser_rollouts, bool with_advantage);

nlohmann::json to_json(const RewardRecord& rec);
RewardRecord reward_record_from_json(const nlohmann::json& j);

} // namespace isprm
