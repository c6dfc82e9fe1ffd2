// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "isprm/trajectory.hpp"

namespace isprm {

class Policy;

struct WorldSpec {
    std::uint64_t seed = 0;
    int num_entities = 12;
    /// Facts that must be chained to reach the answer.
    int hop_depth = 2;
    /// Pages returned per search.
    int branching = 2;
    /// Distractor pages.
    int noise_pages = 4;

    void validate() const;
    std::string world_id() const;
    /// 2 * hop_depth + 2
    int default_step_budget() const { return 2 * hop_depth + 2; }

    bool operator==(const WorldSpec&) const = default;
};

struct ChainLink {
    std::string page_id;
    std::string fact;

    bool operator==(const ChainLink&) const = default;
};

struct World {
    WorldSpec spec;
    std::map<std::string, std::string> pages;
    /// normalized keyword -> page ids, in result order
    std::map<std::string, std::vector<std::string>> index;
    std::vector<ChainLink> gold_chain;
    std::string gold_answer;
    std::string start_entity;
    std::vector<std::string> relations;

    std::string id() const { return spec.world_id(); }
    bool operator==(const World&) const = default;
};

struct ToolOutcome {
    std::string text;
    bool terminal = false;
};

/// Text conventions shared by the generator and the scripted agent.
namespace world_text {
inline constexpr std::string_view no_results = "no results";
inline constexpr std::string_view results_prefix = "results:";
inline constexpr std::string_view not_found_prefix = "page not found: ";
inline constexpr std::string_view noop_response = "no tool call was made";

std::string query(std::string_view start_entity, const std::vector<std::string>& relations);
std::string fact(std::string_view relation, std::string_view subject, std::string_view object);

struct ParsedQuery {
    std::string start_entity;
    std::vector<std::string> relations;
};
std::optional<ParsedQuery> parse_query(std::string_view query);

struct ParsedFact {
    std::string relation;
    std::string subject;
    std::string object;
};
/// First fact sentence in a page text.
std::optional<ParsedFact> find_fact(std::string_view page_text);

/// Page ids listed in a search response (empty for "no results").
std::vector<std::string> parse_results(std::string_view response);
} // namespace world_text

/// Deterministic in `spec`; throws InvalidSpec.
std::pair<World, TaskInstance> generate_world(const WorldSpec& spec);

TaskInstance task_for(const World& world);

/// search / open / answer (plus the `noop` placeholder); throws UnknownTool.
ToolOutcome execute_tool(const World& world, const ToolCall& call);

/// Executes `step.action` and returns the step with its response filled in.
TrajStep execute_step(const World& world, TrajStep step);

/// Probability that continuing `prefix` with the scripted `policy` ends in a
/// correct answer without the trajectory exceeding `depth_budget` steps in
/// total. Exact: enumerates every branch. Throws NonEnumerablePolicy for
/// anything other than a ScriptedPolicy.
double exact_success_prob(const World& world, const Policy& policy, const TaskInstance& task,
                          const Trajectory& prefix, int depth_budget);

/// Inverse of WorldSpec::world_id(); nullopt for anything else.
std::optional<WorldSpec> parse_world_id(std::string_view world_id);

nlohmann::json to_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(const nlohmann::json& j);

/// One self-contained bundle document: spec, pages, index, gold chain, task.
nlohmann::json world_bundle(const World& world);
World world_from_bundle(const nlohmann::json& j);

/// Worlds addressable by TaskInstance::world_ref.
class WorldSet {
  public:
    void add(World world);
    const World& at(std::string_view world_id) const;
    const World& for_task(const TaskInstance& task) const;
    ToolOutcome execute(const TaskInstance& task, const ToolCall& call) const { return execute_tool(for_task(task), call); }
    std::size_t size() const { return worlds_.size(); }
    bool empty() const { return worlds_.empty(); }

  private:
    std::map<std::string, World, std::less<>> worlds_;
};

} // namespace isprm
