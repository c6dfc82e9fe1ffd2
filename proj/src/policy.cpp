// SPDX-License-Identifier: Apache-2.0
#include "isprm/policy.hpp"

#include <cmath>
#include <map>

#include "isprm/error.hpp"
#include "isprm/hashing.hpp"
#include "isprm/sim_world.hpp"
#include "isprm/text.hpp"

namespace isprm {

using nlohmann::json;

std::uint64_t draw_seed(std::uint64_t seed, std::string_view task_id, int step_index, int draw)
{
    return derive_seed(seed, fnv1a64(task_id), static_cast<std::uint64_t>(step_index), static_cast<std::uint64_t>(draw));
}

std::size_t sample_index(const StepDistribution& dist, double u)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist[i].probability;
        if (u < acc)
            return i;
    }
    // rounding slack lands on the last branch with non-zero mass
    for (std::size_t i = dist.size(); i-- > 0;)
        if (dist[i].probability > 0)
            return i;
    return 0;
}

void validate_distribution(const StepDistribution& dist)
{
    if (dist.empty())
        throw Error(Errc::InvalidArgument, "empty step distribution");
    double total = 0.0;
    for (const auto& b : dist) {
        if (!(b.probability >= 0.0))
            throw Error(Errc::InvalidArgument, "negative branch probability");
        b.step.action.validate();
        total += b.probability;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw Error(Errc::InvalidArgument, "branch probabilities sum to " + std::to_string(total));
}

std::uint64_t ScriptedPolicy::state_signature(std::string_view task_id, const Trajectory& history)
{
    auto h = fnv1a64(task_id);
    for (const auto& s : history.steps)
        h = derive_seed(h, fnv1a64(s.action.render()));
    return h;
}

void ScriptedPolicy::set_distribution(std::uint64_t signature, StepDistribution dist)
{
    validate_distribution(dist);
    table_.insert_or_assign(signature, std::move(dist));
}

StepDistribution ScriptedPolicy::distribution(const TaskInstance& task, const Trajectory& history) const
{
    if (!table_.empty()) {
        auto it = table_.find(state_signature(task.task_id, history));
        if (it != table_.end())
            return it->second;
    }
    if (!rule_)
        throw Error(Errc::InvalidArgument, "scripted policy has no entry for this state of " + task.task_id);
    auto dist = rule_(task, history);
    validate_distribution(dist);
    return dist;
}

std::vector<CandidateStep> ScriptedPolicy::propose(const TaskInstance& task, const Trajectory& history,
                                                   std::string_view /*context*/, int n, std::uint64_t seed) const
{
    if (n < 1)
        throw Error(Errc::InvalidArgument, "propose needs n >= 1");
    auto dist = distribution(task, history);
    auto t = static_cast<int>(history.length()) + 1;
    std::vector<CandidateStep> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out.push_back(dist[sample_index(dist, to_unit(draw_seed(seed, task.task_id, t, i)))].step);
    return out;
}

namespace {

struct AgentState {
    std::string current;
    int hops = 0;
    bool awaiting_results = false;
    std::string last_query;
    std::vector<std::string> results;
};

AgentState replay_state(const world_text::ParsedQuery& q, const Trajectory& history)
{
    AgentState st;
    st.current = q.start_entity;
    std::map<std::string, int> hop_of{{text::normalize(q.start_entity), 0}};
    for (const auto& step : history.steps) {
        const auto& call = step.action;
        const std::string response = step.response.value_or("");
        if (call.tool_name == tools::search) {
            st.awaiting_results = true;
            st.last_query = call.arguments.count("query") ? call.arguments.at("query") : "";
            st.results = world_text::parse_results(response);
            if (auto it = hop_of.find(text::normalize(st.last_query)); it != hop_of.end()) {
                st.current = st.last_query;
                st.hops = it->second;
            }
        } else if (call.tool_name == tools::open) {
            st.awaiting_results = false;
            if (auto fact = world_text::find_fact(response)) {
                auto it = hop_of.find(text::normalize(fact->subject));
                int base = it != hop_of.end() ? it->second : st.hops;
                st.current = fact->object;
                st.hops = base + 1;
                hop_of.try_emplace(text::normalize(fact->object), st.hops);
            }
        }
    }
    return st;
}

CandidateStep answer_step(const std::string& entity)
{
    return {"Every link has been followed, so the answer is " + entity + ".", ToolCall::answer(entity)};
}

} // namespace

ScriptedPolicy make_world_policy(WorldPolicyParams params)
{
    if (params.p_guess < 0 || params.p_guess >= 1 || params.p_repeat < 0 || params.p_repeat >= 1)
        throw Error(Errc::InvalidArgument, "world policy probabilities must be in [0, 1)");

    return ScriptedPolicy([params](const TaskInstance& task, const Trajectory& history) -> StepDistribution {
        auto q = world_text::parse_query(task.query);
        if (!q)
            throw Error(Errc::InvalidArgument, "task " + task.task_id + " is not a simulated-world query");
        auto st = replay_state(*q, history);
        auto needed = static_cast<int>(q->relations.size());

        if (st.hops >= needed)
            return {{answer_step(st.current), 1.0}};

        const auto& relation = q->relations[static_cast<std::size_t>(st.hops)];
        if (st.awaiting_results) {
            if (st.results.empty())
                return {{CandidateStep{"Nothing turned up for " + st.last_query + ", so I will commit to " +
                                           st.current + ".",
                                       ToolCall::answer(st.current)},
                         1.0}};
            StepDistribution dist;
            double each = (1.0 - params.p_repeat) / static_cast<double>(st.results.size());
            for (const auto& page : st.results)
                dist.push_back({{"Page " + page + " may state the " + relation + " of " + st.current + ". Opening it.",
                                 ToolCall::open(page)},
                                each});
            if (params.p_repeat > 0)
                dist.push_back({{"The results look thin. Searching " + st.last_query + " again.",
                                 ToolCall::search(st.last_query)},
                                params.p_repeat});
            return dist;
        }

        StepDistribution dist{{{"I need the " + relation + " of " + st.current + ". Searching for it.",
                                ToolCall::search(st.current)},
                               1.0 - params.p_guess}};
        if (params.p_guess > 0)
            dist.push_back({{"I am fairly sure it is " + st.current + " already.", ToolCall::answer(st.current)},
                            params.p_guess});
        return dist;
    });
}

CandidateStep parse_tool_completion(std::string_view completion)
{
    CandidateStep out;
    out.reasoning = text::trim(completion);
    auto pos = completion.rfind("TOOL:");
    if (pos == std::string_view::npos) {
        out.action = ToolCall::noop();
        out.flagged = true;
        return out;
    }

    std::string before(completion.substr(0, pos));
    std::string rest = text::trim(completion.substr(pos + 5));
    // strip an enclosing code fence
    auto fence_open = before.rfind("```");
    if (fence_open != std::string::npos && text::trim(before.substr(fence_open + 3)).find('\n') == std::string::npos &&
        text::trim(before.substr(fence_open)).size() <= 16)
        before = before.substr(0, fence_open);
    if (auto fence_close = rest.find("```"); fence_close != std::string::npos)
        rest = text::trim(rest.substr(0, fence_close));

    auto name_end = rest.find_first_of(" \t\n{");
    std::string name = rest.substr(0, name_end);
    std::string args_text = name_end == std::string::npos ? std::string() : text::trim(rest.substr(name_end));

    try {
        if (name.empty())
            throw Error(Errc::ParseFailure, "missing tool name");
        ToolCall call{name, {}};
        if (!args_text.empty()) {
            auto args = json::parse(args_text);
            if (!args.is_object())
                throw Error(Errc::ParseFailure, "tool arguments must be an object");
            for (const auto& [k, v] : args.items())
                call.arguments.emplace(k, v.is_string() ? v.get<std::string>() : v.dump());
        }
        call.validate();
        out.reasoning = text::trim(before);
        out.action = std::move(call);
    } catch (const std::exception&) {
        out.action = ToolCall::noop();
        out.flagged = true;
    }
    return out;
}

ChatRequest RemotePolicy::build_request(const TaskInstance& task, std::string_view context)
{
    ChatRequest req;
    req.messages.push_back(
        {"system",
         "You are an information-seeking agent. Think step by step, then end your reply with exactly one line\n"
         "TOOL: <name> {json arguments}\n"
         "Tools: search {\"query\": text}, open {\"page\": page id}, answer {\"value\": final answer}."});
    req.messages.push_back({"user", "Question: " + task.query + "\n\n" + std::string(context)});
    return req;
}

std::vector<CandidateStep> RemotePolicy::propose(const TaskInstance& task, const Trajectory& history,
                                                 std::string_view context, int n, std::uint64_t seed) const
{
    if (n < 1)
        throw Error(Errc::InvalidArgument, "propose needs n >= 1");
    auto t = static_cast<int>(history.length()) + 1;
    std::vector<CandidateStep> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto req = build_request(task, context);
        req.seed = draw_seed(seed, task.task_id, t, i);
        req.want_logprobs = want_logprobs_;
        auto completion = backend_->complete(req);
        auto step = parse_tool_completion(completion.content);
        step.logprob_top10 = std::move(completion.top_logprobs);
        out.push_back(std::move(step));
    }
    return out;
}

} // namespace isprm
