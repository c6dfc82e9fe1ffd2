// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "isprm/chat_client.hpp"
#include "isprm/trajectory.hpp"

namespace isprm {

struct CandidateStep {
    std::string reasoning;
    ToolCall action;
    /// Per generated token, the top-10 log-probabilities (remote backends only).
    std::optional<TokenLogprobs> logprob_top10;
    /// Set when a remote completion had no parseable tool call.
    bool flagged = false;

    TrajStep as_step(int step_index) const { return TrajStep{reasoning, action, std::nullopt, step_index}; }
    /// Same reasoning and action (logprobs and flags ignored).
    bool same_step(const CandidateStep& other) const
    {
        return reasoning == other.reasoning && action == other.action;
    }
    bool operator==(const CandidateStep&) const = default;
};

struct WeightedStep {
    CandidateStep step;
    double probability = 0.0;
};

using StepDistribution = std::vector<WeightedStep>;

/// s_t, a_t ~ pi(. | q, H_{t-1}).
class Policy {
  public:
    virtual ~Policy() = default;

    /// n candidates for step history.length()+1. Draw i is a pure function
    /// of (seed, task id, step index, i).
    virtual std::vector<CandidateStep> propose(const TaskInstance& task, const Trajectory& history,
                                               std::string_view context, int n, std::uint64_t seed) const = 0;
};

std::uint64_t draw_seed(std::uint64_t seed, std::string_view task_id, int step_index, int draw);

/// Index of the branch selected by u in [0,1) under cumulative probabilities.
std::size_t sample_index(const StepDistribution& dist, double u);

/// Finite-support policy: an explicit table keyed by state signature, with an
/// optional rule consulted for states not in the table.
class ScriptedPolicy final : public Policy {
  public:
    using Rule = std::function<StepDistribution(const TaskInstance&, const Trajectory&)>;

    ScriptedPolicy() = default;
    explicit ScriptedPolicy(Rule rule) : rule_(std::move(rule)) {}

    /// Hash of (task id, ordered tool-call list).
    static std::uint64_t state_signature(std::string_view task_id, const Trajectory& history);

    void set_distribution(std::uint64_t signature, StepDistribution dist);
    void set_distribution(std::string_view task_id, const Trajectory& history, StepDistribution dist)
    {
        set_distribution(state_signature(task_id, history), std::move(dist));
    }

    /// Throws InvalidArgument when no distribution covers the state or it does
    /// not sum to 1 within 1e-9.
    StepDistribution distribution(const TaskInstance& task, const Trajectory& history) const;

    std::vector<CandidateStep> propose(const TaskInstance& task, const Trajectory& history, std::string_view context,
                                       int n, std::uint64_t seed) const override;

  private:
    Rule rule_;
    std::unordered_map<std::uint64_t, StepDistribution> table_;
};

void validate_distribution(const StepDistribution& dist);

/// Knobs of the scripted information-seeking agent used on simulated worlds.
struct WorldPolicyParams {
    /// Answer the current belief instead of searching for the next hop.
    double p_guess = 0.05;
    /// Re-issue the last search instead of opening one of its results.
    double p_repeat = 0.1;
};

/// Reads the query, follows facts it has opened, searches the current entity,
/// opens a uniformly chosen result, and answers once every hop is resolved.
ScriptedPolicy make_world_policy(WorldPolicyParams params = {});

/// Parses `...reasoning...\nTOOL: <name> {json args}` (optionally fenced).
/// Never throws: unparseable text becomes a flagged `noop` step that keeps
/// the text as its reasoning.
CandidateStep parse_tool_completion(std::string_view completion);

/// Samples completions from a chat backend.
class RemotePolicy final : public Policy {
  public:
    explicit RemotePolicy(std::shared_ptr<const ChatBackend> backend, bool want_logprobs = false)
      : backend_(std::move(backend)), want_logprobs_(want_logprobs)
    {
    }

    std::vector<CandidateStep> propose(const TaskInstance& task, const Trajectory& history, std::string_view context,
                                       int n, std::uint64_t seed) const override;

    static ChatRequest build_request(const TaskInstance& task, std::string_view context);

  private:
    std::shared_ptr<const ChatBackend> backend_;
    bool want_logprobs_;
};

} // namespace isprm
