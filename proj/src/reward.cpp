// SPDX-License-Identifier: Apache-2.0
#include "isprm/reward.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "isprm/error.hpp"
#include "isprm/records.hpp"
#include "isprm/text.hpp"

namespace isprm {

using nlohmann::json;

std::string_view to_string(PairSide side)
{
    return side == PairSide::Winner ? "winner" : "loser";
}

PairSide parse_side(std::string_view s)
{
    if (s == "winner" || s == "+")
        return PairSide::Winner;
    if (s == "loser" || s == "-")
        return PairSide::Loser;
    throw Error(Errc::InvalidArgument, "unknown pair side " + std::string(s));
}

double score_reward(double g, double g_hat, int M)
{
    return 1.0 - std::abs(g - g_hat) / static_cast<double>(M);
}

double comparison_reward(double g_hat_self, PairSide side, std::span<const double> counterpart_g_hats)
{
    if (counterpart_g_hats.empty())
        throw Error(Errc::LengthMismatch, "comparison reward needs at least one counterpart");
    const double y = side == PairSide::Winner ? 1.0 : -1.0;
    double sum = 0.0;
    for (double other : counterpart_g_hats)
        sum += y * comparison_sign(g_hat_self - other);
    return sum / static_cast<double>(counterpart_g_hats.size());
}

double adaptive_weight(double g_plus, double g_minus, int M)
{
    return (g_plus - g_minus) / static_cast<double>(M);
}

double combined_reward(double r_s, double r_c, double w)
{
    return r_s + w * r_c;
}

std::vector<RewardBreakdown> group_rewards(double g_plus, double g_minus, int M,
                                           std::span<const ScorerRollout> winner_rollouts,
                                           std::span<const ScorerRollout> loser_rollouts)
{
    if (winner_rollouts.size() != loser_rollouts.size() || winner_rollouts.empty())
        throw Error(Errc::LengthMismatch, std::to_string(winner_rollouts.size()) + " winner vs " +
                                              std::to_string(loser_rollouts.size()) + " loser rollouts");
    std::vector<double> winner_hats;
    std::vector<double> loser_hats;
    for (const auto& r : winner_rollouts)
        winner_hats.push_back(r.g_hat);
    for (const auto& r : loser_rollouts)
        loser_hats.push_back(r.g_hat);

    const double w = adaptive_weight(g_plus, g_minus, M);
    std::vector<RewardBreakdown> out;
    out.reserve(winner_rollouts.size() * 2);
    auto add = [&](double g, const ScorerRollout& r, PairSide side, std::span<const double> counterpart) {
        RewardBreakdown b;
        b.r_s = score_reward(g, r.g_hat, M);
        b.r_c = comparison_reward(r.g_hat, side, counterpart);
        b.w = w;
        b.r = combined_reward(b.r_s, b.r_c, b.w);
        out.push_back(b);
    };
    for (const auto& r : winner_rollouts)
        add(g_plus, r, PairSide::Winner, loser_hats);
    for (const auto& r : loser_rollouts)
        add(g_minus, r, PairSide::Loser, winner_hats);
    return out;
}

PredictedScore parse_predicted_score(std::string_view generation, int M)
{
    static const std::regex line_re(R"(^\s*Score:\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*$)",
                                     std::regex::icase);
    std::optional<double> value;
    for (const auto& line : text::split_lines(generation)) {
        std::smatch m;
        if (std::regex_match(line, m, line_re))
            value = std::strtod(m[1].str().c_str(), nullptr);
    }
    if (!value)
        throw Error(Errc::NoScoreFound, "generation has no `Score:` line");
    const double bound = static_cast<double>(M) / 2.0;
    PredictedScore out{*value, false};
    if (!(out.g_hat <= bound) || !(out.g_hat >= -bound)) {
        out.g_hat = std::clamp(out.g_hat, -bound, bound);
        out.clamped = true;
    }
    return out;
}

ScorerRollout make_scorer_rollout(PairSide side, std::string_view generation, int M)
{
    auto score = parse_predicted_score(generation, M);
    return ScorerRollout{side, std::string(generation), score.g_hat, score.clamped};
}

std::vector<RewardRecord> reward_records(const std::string& pair_id, double g_plus, double g_minus, int M,
                                         std::span<const ScorerRollout> winner_rollouts,
                                         std::span<const ScorerRollout> loser_rollouts, bool with_advantage)
{
    auto breakdowns = group_rewards(g_plus, g_minus, M, winner_rollouts, loser_rollouts);
    const auto n = winner_rollouts.size();
    std::vector<RewardRecord> out;
    out.reserve(breakdowns.size());
    for (std::size_t i = 0; i < breakdowns.size(); ++i) {
        bool winner = i < n;
        const auto& r = winner ? winner_rollouts[i] : loser_rollouts[i - n];
        out.push_back(RewardRecord{pair_id, winner ? PairSide::Winner : PairSide::Loser,
                                   static_cast<int>(winner ? i : i - n), winner ? g_plus : g_minus, r.g_hat,
                                   breakdowns[i], r.clamped, std::nullopt});
    }
    if (with_advantage) {
        for (std::size_t start : {std::size_t{0}, n}) {
            double mean = 0.0;
            for (std::size_t i = start; i < start + n; ++i)
                mean += out[i].reward.r;
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = start; i < start + n; ++i)
                var += (out[i].reward.r - mean) * (out[i].reward.r - mean);
            double sd = std::sqrt(var / static_cast<double>(n));
            for (std::size_t i = start; i < start + n; ++i)
                out[i].advantage = sd > 0 ? (out[i].reward.r - mean) / sd : 0.0;
        }
    }
    return out;
}

json to_json(const RewardRecord& rec)
{
    json j{{"pair_id", rec.pair_id},
           {"side", std::string(to_string(rec.side))},
           {"rollout_idx", rec.rollout_idx},
           {"g_true", rec.g_true},
           {"g_hat", rec.g_hat},
           {"r_s", rec.reward.r_s},
           {"r_c", rec.reward.r_c},
           {"w", rec.reward.w},
           {"r", rec.reward.r},
           {"clamped", rec.clamped}};
    if (rec.advantage)
        j["advantage"] = *rec.advantage;
    return j;
}

RewardRecord reward_record_from_json(const json& j)
{
    RewardRecord rec;
    rec.pair_id = records::require_string(j, "pair_id", "");
    try {
        rec.side = parse_side(records::require_string(j, "side", ""));
    } catch (const Error& e) {
        throw SchemaViolation("side", e.what());
    }
    rec.rollout_idx = static_cast<int>(records::require_integer(j, "rollout_idx", ""));
    rec.g_true = records::require_number(j, "g_true", "");
    rec.g_hat = records::require_number(j, "g_hat", "");
    rec.reward.r_s = records::require_number(j, "r_s", "");
    rec.reward.r_c = records::require_number(j, "r_c", "");
    rec.reward.w = records::require_number(j, "w", "");
    rec.reward.r = records::require_number(j, "r", "");
    rec.clamped = records::require_bool(j, "clamped", "");
    if (j.contains("advantage"))
        rec.advantage = records::require_number(j, "advantage", "");
    return rec;
}

} // namespace isprm
