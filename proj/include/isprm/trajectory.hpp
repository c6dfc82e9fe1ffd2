// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace isprm {

struct TaskInstance {
    std::string task_id;
    std::string query;
    std::string gold_answer;
    std::optional<std::string> world_ref;

    bool operator==(const TaskInstance&) const = default;
};

namespace tools {
inline constexpr std::string_view search = "search";
inline constexpr std::string_view open = "open";
inline constexpr std::string_view answer = "answer";
/// Placeholder action for completions that carried no parseable tool call.
inline constexpr std::string_view noop = "noop";
} // namespace tools

struct ToolCall {
    std::string tool_name;
    std::map<std::string, std::string> arguments;

    static ToolCall search(std::string query) { return {std::string(tools::search), {{"query", std::move(query)}}}; }
    static ToolCall open(std::string page) { return {std::string(tools::open), {{"page", std::move(page)}}}; }
    static ToolCall answer(std::string value) { return {std::string(tools::answer), {{"value", std::move(value)}}}; }
    static ToolCall noop() { return {std::string(tools::noop), {}}; }

    bool is_answer() const { return tool_name == tools::answer; }
    /// Throws InvalidArgument unless the call satisfies the per-tool argument contract.
    void validate() const;
    /// `name {"k":"v"}` with keys in sorted order.
    std::string render() const;

    bool operator==(const ToolCall&) const = default;
};

struct TrajStep {
    std::string reasoning;
    ToolCall action;
    std::optional<std::string> response;
    int step_index = 1;

    bool executed() const { return response.has_value(); }
    bool operator==(const TrajStep&) const = default;
};

struct Trajectory {
    std::string task_id;
    std::vector<TrajStep> steps;
    std::optional<std::string> terminal_answer;

    std::size_t length() const { return steps.size(); }
    bool terminal() const { return terminal_answer.has_value(); }
    /// o_t of the final step, or empty when there is none.
    std::string latest_response() const;
    /// The first `count` steps as a trajectory of its own.
    Trajectory prefix(std::size_t count) const;

    bool operator==(const Trajectory&) const = default;
};

/// Bounded recursive summary h_t. `step_index` is the last step folded in;
/// h_0 is the empty summary.
struct Summary {
    std::string text;
    int step_index = 0;

    std::size_t char_len() const { return text.size(); }
    bool operator==(const Summary&) const = default;
};

inline constexpr std::string_view kNoPriorSummary = "(no prior summary)";

class ContextMode {
  public:
    enum class Kind { Summary, LastK, Full };

    static ContextMode summary() { return ContextMode(Kind::Summary, 0); }
    static ContextMode full() { return ContextMode(Kind::Full, 0); }
    static ContextMode last(int k);
    /// Accepts summary | full | last<k>.
    static ContextMode parse(std::string_view name);

    Kind kind() const { return kind_; }
    int k() const { return k_; }
    std::string name() const;

    bool operator==(const ContextMode&) const = default;

  private:
    ContextMode(Kind kind, int k) : kind_(kind), k_(k) {}
    Kind kind_;
    int k_;
};

/// Returns `traj` extended by `step`. Throws IndexGap / AfterTerminal.
Trajectory append_step(Trajectory traj, TrajStep step);

std::string render_step(const TrajStep& step);

/// Deterministic context text for the scorer. Summary mode shows the summary
/// and the tool response of the step it was folded through.
std::string render_context(const Trajectory& traj, const std::optional<Summary>& summary, ContextMode mode);

nlohmann::json to_json(const TaskInstance& task);
TaskInstance task_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Trajectory& traj);
/// Validates field types and the trajectory invariants; throws SchemaViolation.
Trajectory trajectory_from_json(const nlohmann::json& j);

std::string serialize(const Trajectory& traj);
Trajectory deserialize_trajectory(std::string_view line);

} // namespace isprm
