// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "isprm/chat_client.hpp"
#include "isprm/policy.hpp"
#include "isprm/sim_world.hpp"
#include "isprm/trajectory.hpp"

namespace isprm {

struct StepScore {
    double value = 0.0;
    std::optional<std::string> analysis;
    std::string scorer_id;
    /// The scorer could not produce a score and returned its sentinel.
    bool flagged = false;
};

/// What every scorer gets to see for one candidate next step.
struct ScoringInput {
    const TaskInstance& task;
    /// H_{t-1}; already executed.
    const Trajectory& prefix;
    /// Rendered under the run's context mode.
    std::string_view context;
    /// o_{t-1}
    std::string_view prev_response;
    const CandidateStep& candidate;
};

/// g_hat = f(q, context, o_{t-1}, s_t, a_t)
class StepScorer {
  public:
    virtual ~StepScorer() = default;
    virtual StepScore score(const ScoringInput& input) const = 0;
    virtual std::string id() const = 0;
};

/// Runs the scorer; a backend or parse failure becomes `fallback` with the flag set.
StepScore score_step(const StepScorer& scorer, const ScoringInput& input, double fallback);

/// (p(prefix + candidate) - p(prefix)) * M/2 with exact success probabilities.
StepScore oracle_score(const World& world, const Policy& policy, const TaskInstance& task, const Trajectory& prefix,
                       const CandidateStep& candidate, int depth_budget, int M);

/// Jaccard similarity of lower-cased whitespace tokens between the candidate
/// and the accumulated past steps.
StepScore relevance_score(const CandidateStep& candidate, const Trajectory& trajectory);

/// Mean over token positions of the negated mean top-10 log-probability.
/// Throws MissingLogprobs.
StepScore confidence_score(const CandidateStep& candidate);

/// First integer in [1, 5] in the completion.
std::optional<int> parse_progress(std::string_view completion);

/// Text used for a step by the relevance baseline: reasoning, tool name, argument values.
std::string step_text(std::string_view reasoning, const ToolCall& action);

class OracleScorer final : public StepScorer {
  public:
    OracleScorer(const WorldSet& worlds, const Policy& policy, int depth_budget, int M)
      : worlds_(worlds), policy_(policy), depth_budget_(depth_budget), M_(M)
    {
    }

    StepScore score(const ScoringInput& input) const override;
    std::string id() const override { return "oracle"; }

  private:
    const WorldSet& worlds_;
    const Policy& policy_;
    /// 0 means the task world's default step budget.
    int depth_budget_;
    int M_;
};

class RelevanceScorer final : public StepScorer {
  public:
    StepScore score(const ScoringInput& input) const override { return relevance_score(input.candidate, input.prefix); }
    std::string id() const override { return "relevance"; }
};

class ConfidenceScorer final : public StepScorer {
  public:
    StepScore score(const ScoringInput& input) const override { return confidence_score(input.candidate); }
    std::string id() const override { return "confidence"; }
};

/// Zero-shot 1-5 progress rating from a chat backend; scores stay on that scale.
class VerbalProgressScorer final : public StepScorer {
  public:
    explicit VerbalProgressScorer(std::shared_ptr<const ChatBackend> backend) : backend_(std::move(backend)) {}
    StepScore score(const ScoringInput& input) const override;
    std::string id() const override { return "verbal-1to5"; }

  private:
    std::shared_ptr<const ChatBackend> backend_;
};

/// Generative PRM behind a chat backend: analysis followed by `Score: <g>`.
/// Unparseable output scores -M/2 with the flag set.
class RemotePrmScorer final : public StepScorer {
  public:
    RemotePrmScorer(std::shared_ptr<const ChatBackend> backend, int M) : backend_(std::move(backend)), M_(M) {}
    StepScore score(const ScoringInput& input) const override;
    std::string id() const override { return "remote-prm"; }

    static ChatRequest build_request(const ScoringInput& input, int M);

  private:
    std::shared_ptr<const ChatBackend> backend_;
    int M_;
};

} // namespace isprm
