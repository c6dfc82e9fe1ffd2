// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "isprm/judge.hpp"
#include "isprm/policy.hpp"
#include "isprm/sim_world.hpp"
#include "isprm/trajectory.hpp"

namespace isprm {

/// Everything a rollout needs besides the task: where tools run, who acts,
/// who judges, and how long a rollout may run.
struct AnnotationEnv {
    const WorldSet& worlds;
    const Policy& policy;
    Judge judge = exact_match_judge;
    /// Total trajectory length cap for rollouts; 0 picks 2 * hop_depth + 2 from the task's world.
    int step_budget = 0;
    /// Parallelism for rollouts inside one estimate. Results do not depend on it.
    int workers = 1;

    int budget_for(const TaskInstance& task) const;
};

struct RolloutRecord {
    CandidateStep first_step;
    Trajectory trajectory;
    bool success = false;
    /// T_j: total trajectory length at termination (or at the budget).
    int length = 0;
};

struct MeanAccuracy {
    double m = 0.0;
    std::vector<RolloutRecord> rollouts;
};

/// m = (#rollouts whose answer the judge accepts) / M. Rollout j runs the
/// policy from `prefix` with sub-seed derive_seed(seed, j); rollouts that hit
/// the step budget count as failures.
MeanAccuracy estimate_mean_accuracy(const AnnotationEnv& env, const TaskInstance& task, const Trajectory& prefix,
                                    int M, std::uint64_t seed);

/// g = (m_curr - m_prev) * M / 2
double info_gain(double m_prev, double m_curr, int M);

struct GainAnnotation {
    double m_prev = 0.0;
    double m_curr = 0.0;
    int M = 1;
    double g = 0.0;

    bool operator==(const GainAnnotation&) const = default;
};

GainAnnotation annotate_gain(double m_prev, double m_curr, int M);

struct CandidatePair {
    CandidateStep winner;
    CandidateStep loser;
    std::size_t winner_rollout = 0;
    std::size_t loser_rollout = 0;
};

/// Provisional winner: first step of the shortest successful rollout (lowest
/// index on ties). Provisional loser: uniform draw over the other M-1 first
/// steps. nullopt when nothing succeeded or every first step is the same.
std::optional<CandidatePair> build_candidate_pair(std::span<const RolloutRecord> rollouts, std::uint64_t seed);

struct AnnotatedStep {
    TrajStep step;
    GainAnnotation gain;

    bool operator==(const AnnotatedStep&) const = default;
};

struct PreferencePair {
    std::string task_id;
    Trajectory prefix;
    AnnotatedStep winner;
    AnnotatedStep loser;
    bool provisional_winner_flipped = false;

    /// Step index the pair competes for.
    int t() const { return static_cast<int>(prefix.length()) + 1; }
};

/// A candidate pair dropped because one side was too easy (m = 1) or too hard (m = 0).
struct Filtered {
    AnnotatedStep provisional_winner;
    AnnotatedStep provisional_loser;
};

/// Re-estimates each side from prefix + candidate against the shared
/// baseline `m_prev`, then relabels so the higher gain wins.
std::variant<PreferencePair, Filtered> annotate_pair(const AnnotationEnv& env, const TaskInstance& task,
                                                     const Trajectory& prefix, const CandidatePair& pair,
                                                     double m_prev, int M, std::uint64_t seed);

struct ChainResult {
    std::vector<PreferencePair> pairs;
    /// Prefix the chain ended on (winners, plus the higher-m side of filtered steps).
    Trajectory trajectory;
};

/// Annotates a pair at the current prefix, extends the prefix with the true
/// winner, and repeats. Stops on NoPair, a filtered step whose better side is
/// hopeless (m = 0), a terminal answer, the step budget, or `max_pairs`.
ChainResult chain_annotate(const AnnotationEnv& env, const TaskInstance& task, int M, int max_pairs,
                           std::uint64_t seed);

enum class BinaryLabel { Positive, Negative };

struct RelabeledStep {
    std::size_t index = 0;
    std::optional<BinaryLabel> label;
    /// m_prev was 0, so the ratio is undefined.
    bool zero_baseline = false;
};

inline constexpr double kRelativeThreshold = 0.7;

/// Positive iff m_curr / m_prev > threshold; m_prev = 0 entries are skipped and flagged.
std::vector<RelabeledStep> binary_relabel(std::span<const GainAnnotation> annotations,
                                          double threshold = kRelativeThreshold);
/// Single-annotation form; throws ZeroBaseline.
BinaryLabel binary_label(const GainAnnotation& annotation, double threshold = kRelativeThreshold);

/// Flat pair record: {task_id, t, prefix_ref, winner, loser, m_prev, M, flipped}.
struct PairRecord {
    struct Side {
        std::string reasoning;
        ToolCall action;
        double m = 0.0;
        double g = 0.0;
        bool operator==(const Side&) const = default;
    };
    std::string task_id;
    int t = 1;
    /// "<task_id>#<steps>": the first <steps> steps of the task's chain trajectory.
    std::string prefix_ref;
    Side winner;
    Side loser;
    double m_prev = 0.0;
    int M = 1;
    bool flipped = false;

    std::string pair_id() const { return task_id + "@" + std::to_string(t); }
    bool operator==(const PairRecord&) const = default;
};

std::string prefix_ref(std::string_view task_id, std::size_t steps);
PairRecord to_record(const PreferencePair& pair);
nlohmann::json to_json(const PairRecord& rec);
PairRecord pair_record_from_json(const nlohmann::json& j);

} // namespace isprm
