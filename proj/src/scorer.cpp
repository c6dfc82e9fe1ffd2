// SPDX-License-Identifier: Apache-2.0
#include "isprm/scorer.hpp"

#include <cctype>
#include <set>

#include "isprm/error.hpp"
#include "isprm/reward.hpp"
#include "isprm/text.hpp"

namespace isprm {

StepScore score_step(const StepScorer& scorer, const ScoringInput& input, double fallback)
{
    try {
        return scorer.score(input);
    } catch (const Error& e) {
        if (e.code() == Errc::NonEnumerablePolicy || e.code() == Errc::MissingLogprobs ||
            e.code() == Errc::InvalidArgument)
            throw;
        return StepScore{fallback, std::string(e.what()), scorer.id(), true};
    }
}

StepScore oracle_score(const World& world, const Policy& policy, const TaskInstance& task, const Trajectory& prefix,
                       const CandidateStep& candidate, int depth_budget, int M)
{
    auto before = exact_success_prob(world, policy, task, prefix, depth_budget);
    auto step = execute_step(world, candidate.as_step(static_cast<int>(prefix.length()) + 1));
    auto after = exact_success_prob(world, policy, task, append_step(prefix, std::move(step)), depth_budget);
    return StepScore{(after - before) * static_cast<double>(M) / 2.0, std::nullopt, "oracle", false};
}

StepScore OracleScorer::score(const ScoringInput& input) const
{
    const auto& world = worlds_.for_task(input.task);
    auto budget = depth_budget_ > 0 ? depth_budget_ : world.spec.default_step_budget();
    return oracle_score(world, policy_, input.task, input.prefix, input.candidate, budget, M_);
}

std::string step_text(std::string_view reasoning, const ToolCall& action)
{
    std::string out(reasoning);
    out += " " + action.tool_name;
    for (const auto& [k, v] : action.arguments)
        out += " " + v;
    return out;
}

StepScore relevance_score(const CandidateStep& candidate, const Trajectory& trajectory)
{
    auto cand_tokens = text::whitespace_tokens(step_text(candidate.reasoning, candidate.action));
    std::set<std::string> a(cand_tokens.begin(), cand_tokens.end());
    std::set<std::string> b;
    for (const auto& s : trajectory.steps)
        for (auto& tok : text::whitespace_tokens(step_text(s.reasoning, s.action)))
            b.insert(std::move(tok));

    std::size_t inter = 0;
    for (const auto& tok : a)
        inter += b.count(tok);
    auto uni = a.size() + b.size() - inter;
    double value = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    return StepScore{value, std::nullopt, "relevance", false};
}

StepScore confidence_score(const CandidateStep& candidate)
{
    if (!candidate.logprob_top10 || candidate.logprob_top10->empty())
        throw Error(Errc::MissingLogprobs, "candidate carries no top-10 log-probabilities");
    double total = 0.0;
    std::size_t positions = 0;
    for (const auto& top : *candidate.logprob_top10) {
        if (top.empty())
            continue;
        double mean = 0.0;
        for (double lp : top)
            mean += lp;
        mean /= static_cast<double>(top.size());
        total += -mean;
        ++positions;
    }
    if (positions == 0)
        throw Error(Errc::MissingLogprobs, "every token position is empty");
    return StepScore{total / static_cast<double>(positions), std::nullopt, "confidence", false};
}

std::optional<int> parse_progress(std::string_view completion)
{
    std::size_t i = 0;
    while (i < completion.size()) {
        if (!std::isdigit(static_cast<unsigned char>(completion[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        long long value = 0;
        while (j < completion.size() && std::isdigit(static_cast<unsigned char>(completion[j]))) {
            value = value * 10 + (completion[j] - '0');
            if (value > 1000)
                value = 1000;
            ++j;
        }
        bool decimal = j + 1 < completion.size() && completion[j] == '.' &&
                       std::isdigit(static_cast<unsigned char>(completion[j + 1]));
        if (!decimal && value >= 1 && value <= 5)
            return static_cast<int>(value);
        while (j < completion.size() && (std::isdigit(static_cast<unsigned char>(completion[j])) || completion[j] == '.'))
            ++j;
        i = j;
    }
    return std::nullopt;
}

namespace {

std::string candidate_block(const CandidateStep& c)
{
    return "Reasoning: " + c.reasoning + "\nAction: " + c.action.render();
}

} // namespace

StepScore VerbalProgressScorer::score(const ScoringInput& input) const
{
    ChatRequest req;
    req.messages.push_back({"system", "Rate how close the agent is to answering the question after the proposed "
                                      "step. Reply with a single integer from 1 (no progress) to 5 (answer in hand)."});
    req.messages.push_back({"user", "Question: " + input.task.query + "\n\n" + std::string(input.context) +
                                        "\n## Proposed step\n" + candidate_block(input.candidate)});
    auto completion = backend_->complete(req).content;
    auto value = parse_progress(completion);
    if (!value)
        return StepScore{1.0, completion, id(), true};
    return StepScore{static_cast<double>(*value), completion, id(), false};
}

ChatRequest RemotePrmScorer::build_request(const ScoringInput& input, int M)
{
    auto bound = std::to_string(M / 2);
    ChatRequest req;
    req.messages.push_back(
        {"system",
         "You evaluate one step of an information-seeking agent. Analyze the interpretation of the latest tool "
         "output, the informativeness of the proposed tool call, and the quality of the plan. Then predict how much "
         "the step changes the chance of reaching the correct answer, as a number in [-" +
             bound + ", " + bound + "]. End with a line `Score: <number>`."});
    req.messages.push_back({"user", "Question: " + input.task.query + "\n\n" + std::string(input.context) +
                                        "\n## Latest tool response\n" + std::string(input.prev_response) +
                                        "\n## Proposed step\n" + candidate_block(input.candidate)});
    return req;
}

StepScore RemotePrmScorer::score(const ScoringInput& input) const
{
    auto completion = backend_->complete(build_request(input, M_)).content;
    try {
        auto parsed = parse_predicted_score(completion, M_);
        return StepScore{parsed.g_hat, completion, id(), false};
    } catch (const Error&) {
        return StepScore{-static_cast<double>(M_) / 2.0, completion, id(), true};
    }
}

} // namespace isprm
