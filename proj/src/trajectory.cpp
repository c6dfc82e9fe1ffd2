// SPDX-License-Identifier: Apache-2.0
#include "isprm/trajectory.hpp"

#include <algorithm>

#include "isprm/error.hpp"
#include "isprm/records.hpp"

namespace isprm {

using nlohmann::json;

void ToolCall::validate() const
{
    if (tool_name.empty())
        throw Error(Errc::InvalidArgument, "tool_name is empty");
    if (is_answer() && (arguments.size() != 1 || !arguments.contains("value")))
        throw Error(Errc::InvalidArgument, "answer call must carry exactly one argument `value`");
}

std::string ToolCall::render() const
{
    return tool_name + " " + json(arguments).dump();
}

std::string Trajectory::latest_response() const
{
    if (steps.empty() || !steps.back().response)
        return {};
    return *steps.back().response;
}

Trajectory Trajectory::prefix(std::size_t count) const
{
    Trajectory out{task_id, {}, std::nullopt};
    count = std::min(count, steps.size());
    out.steps.assign(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(count));
    if (count == steps.size())
        out.terminal_answer = terminal_answer;
    return out;
}

ContextMode ContextMode::last(int k)
{
    if (k < 1)
        throw Error(Errc::InvalidArgument, "LastK requires k >= 1");
    return ContextMode(Kind::LastK, k);
}

ContextMode ContextMode::parse(std::string_view name)
{
    if (name == "summary")
        return summary();
    if (name == "full")
        return full();
    if (name.starts_with("last")) {
        auto digits = name.substr(4);
        int k = 0;
        if (digits.empty())
            throw Error(Errc::InvalidArgument, "context mode `last` needs a count");
        for (char c : digits) {
            if (c < '0' || c > '9')
                throw Error(Errc::InvalidArgument, "bad context mode " + std::string(name));
            k = k * 10 + (c - '0');
        }
        return last(k);
    }
    throw Error(Errc::InvalidArgument, "unknown context mode " + std::string(name));
}

std::string ContextMode::name() const
{
    switch (kind_) {
    case Kind::Summary: return "summary";
    case Kind::Full: return "full";
    case Kind::LastK: return "last" + std::to_string(k_);
    }
    return "full";
}

Trajectory append_step(Trajectory traj, TrajStep step)
{
    if (traj.terminal())
        throw Error(Errc::AfterTerminal, "trajectory " + traj.task_id + " already answered");
    auto expected = static_cast<int>(traj.steps.size()) + 1;
    if (step.step_index != expected)
        throw Error(Errc::IndexGap, "expected step " + std::to_string(expected) + ", got " +
                                        std::to_string(step.step_index));
    step.action.validate();
    if (step.action.is_answer())
        traj.terminal_answer = step.action.arguments.at("value");
    traj.steps.push_back(std::move(step));
    return traj;
}

std::string render_step(const TrajStep& step)
{
    std::string out = "Step " + std::to_string(step.step_index) + "\n";
    out += "Reasoning: " + step.reasoning + "\n";
    out += "Action: " + step.action.render() + "\n";
    out += "Observation: " + (step.response ? *step.response : std::string("(pending)")) + "\n";
    return out;
}

namespace {

std::string render_window(const Trajectory& traj, std::size_t first)
{
    auto total = traj.steps.size();
    if (total == 0)
        return "## Trajectory (no steps yet)\n";
    std::string out = "## Trajectory (steps " + std::to_string(first + 1) + "-" + std::to_string(total) + " of " +
                      std::to_string(total) + ")\n";
    for (auto i = first; i < total; ++i)
        out += render_step(traj.steps[i]);
    return out;
}

} // namespace

std::string render_context(const Trajectory& traj, const std::optional<Summary>& summary, ContextMode mode)
{
    switch (mode.kind()) {
    case ContextMode::Kind::Full:
        return render_window(traj, 0);
    case ContextMode::Kind::LastK: {
        auto k = static_cast<std::size_t>(mode.k());
        return render_window(traj, traj.steps.size() > k ? traj.steps.size() - k : 0);
    }
    case ContextMode::Kind::Summary: {
        if (!summary)
            throw Error(Errc::MissingSummary, "summary context requested without a summary");
        auto through = static_cast<std::size_t>(summary->step_index);
        if (through > traj.steps.size())
            throw Error(Errc::InvalidArgument, "summary is ahead of the trajectory");
        std::string out = "## Summary (through step " + std::to_string(through) + ")\n";
        out += summary->text.empty() ? std::string(kNoPriorSummary) : summary->text;
        out += "\n## Latest observation\n";
        const auto* latest = through > 0 ? &traj.steps[through - 1] : nullptr;
        out += latest && latest->response ? *latest->response : std::string("(none)");
        out += "\n";
        return out;
    }
    }
    return {};
}

json to_json(const TaskInstance& task)
{
    json j{{"task_id", task.task_id}, {"query", task.query}, {"gold_answer", task.gold_answer}};
    j["world_ref"] = task.world_ref ? json(*task.world_ref) : json(nullptr);
    return j;
}

TaskInstance task_from_json(const json& j)
{
    TaskInstance t;
    t.task_id = records::require_string(j, "task_id", "");
    t.query = records::require_string(j, "query", "");
    t.gold_answer = records::require_string(j, "gold_answer", "");
    if (t.gold_answer.empty())
        throw SchemaViolation("gold_answer", "must be non-empty");
    if (j.contains("world_ref") && !j["world_ref"].is_null()) {
        if (!j["world_ref"].is_string())
            throw SchemaViolation("world_ref", "expected string or null");
        t.world_ref = j["world_ref"].get<std::string>();
    }
    return t;
}

json to_json(const Trajectory& traj)
{
    json steps = json::array();
    for (const auto& s : traj.steps) {
        steps.push_back({{"t", s.step_index},
                         {"reasoning", s.reasoning},
                         {"tool", s.action.tool_name},
                         {"args", s.action.arguments},
                         {"response", s.response ? json(*s.response) : json(nullptr)}});
    }
    return json{{"task_id", traj.task_id},
                {"steps", std::move(steps)},
                {"terminal_answer", traj.terminal_answer ? json(*traj.terminal_answer) : json(nullptr)}};
}

Trajectory trajectory_from_json(const json& j)
{
    Trajectory traj;
    traj.task_id = records::require_string(j, "task_id", "");
    const auto& steps = records::require(j, "steps", "");
    if (!steps.is_array())
        throw SchemaViolation("steps", "expected array");

    for (std::size_t i = 0; i < steps.size(); ++i) {
        std::string path = "steps[" + std::to_string(i) + "]";
        const auto& s = steps[i];
        TrajStep step;
        auto t = records::require_integer(s, "t", path);
        if (t < 1)
            throw SchemaViolation(path + ".t", "must be >= 1");
        step.step_index = static_cast<int>(t);
        step.reasoning = records::require_string(s, "reasoning", path);
        step.action.tool_name = records::require_string(s, "tool", path);
        const auto& args = records::require(s, "args", path);
        if (!args.is_object())
            throw SchemaViolation(path + ".args", "expected object");
        for (const auto& [k, v] : args.items()) {
            if (!v.is_string())
                throw SchemaViolation(path + ".args." + k, "expected string");
            step.action.arguments.emplace(k, v.get<std::string>());
        }
        const auto& resp = records::require(s, "response", path);
        if (resp.is_string())
            step.response = resp.get<std::string>();
        else if (!resp.is_null())
            throw SchemaViolation(path + ".response", "expected string or null");

        try {
            traj = append_step(std::move(traj), std::move(step));
        } catch (const Error& e) {
            throw SchemaViolation(path, e.what());
        }
    }

    const auto& term = records::require(j, "terminal_answer", "");
    std::optional<std::string> declared;
    if (term.is_string())
        declared = term.get<std::string>();
    else if (!term.is_null())
        throw SchemaViolation("terminal_answer", "expected string or null");
    if (declared != traj.terminal_answer)
        throw SchemaViolation("terminal_answer", "inconsistent with the final step");
    return traj;
}

std::string serialize(const Trajectory& traj)
{
    return to_json(traj).dump();
}

Trajectory deserialize_trajectory(std::string_view line)
{
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw SchemaViolation("<root>", e.what());
    }
    return trajectory_from_json(j);
}

} // namespace isprm
