// SPDX-License-Identifier: Apache-2.0
#include "isprm/sim_world.hpp"

#include <algorithm>
#include <array>
#include <regex>

#include "isprm/error.hpp"
#include "isprm/hashing.hpp"
#include "isprm/judge.hpp"
#include "isprm/policy.hpp"
#include "isprm/records.hpp"
#include "isprm/text.hpp"

namespace isprm {

using nlohmann::json;

bool exact_match_judge(std::string_view answer, std::string_view gold)
{
    return text::normalize(answer) == text::normalize(gold);
}

void WorldSpec::validate() const
{
    if (hop_depth < 1)
        throw Error(Errc::InvalidSpec, "hop_depth must be >= 1");
    if (branching < 1)
        throw Error(Errc::InvalidSpec, "branching must be >= 1");
    if (noise_pages < 0)
        throw Error(Errc::InvalidSpec, "noise_pages must be >= 0");
    if (num_entities < hop_depth + 1)
        throw Error(Errc::InvalidSpec, "num_entities must be >= hop_depth + 1");
    if (num_entities > 4096 || noise_pages > 100000)
        throw Error(Errc::InvalidSpec, "world too large");
}

std::string WorldSpec::world_id() const
{
    return "w" + std::to_string(seed) + "-e" + std::to_string(num_entities) + "-h" + std::to_string(hop_depth) + "-b" +
           std::to_string(branching) + "-z" + std::to_string(noise_pages);
}

std::optional<WorldSpec> parse_world_id(std::string_view world_id)
{
    static const std::regex re(R"(w(\d+)-e(\d+)-h(\d+)-b(\d+)-z(\d+))");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(world_id.begin(), world_id.end(), m, re))
        return std::nullopt;
    try {
        WorldSpec spec;
        spec.seed = std::stoull(m[1].str());
        spec.num_entities = std::stoi(m[2].str());
        spec.hop_depth = std::stoi(m[3].str());
        spec.branching = std::stoi(m[4].str());
        spec.noise_pages = std::stoi(m[5].str());
        return spec;
    } catch (const std::out_of_range&) {
        return std::nullopt;
    }
}

namespace world_text {

std::string query(std::string_view start_entity, const std::vector<std::string>& relations)
{
    std::string chain;
    for (std::size_t i = 0; i < relations.size(); ++i) {
        if (i)
            chain += " -> ";
        chain += relations[i];
    }
    return "Starting from " + std::string(start_entity) + ", follow the links " + chain +
           " in order. Which entity do you reach?";
}

std::string fact(std::string_view relation, std::string_view subject, std::string_view object)
{
    return "The " + std::string(relation) + " of " + std::string(subject) + " is " + std::string(object) + ".";
}

std::optional<ParsedQuery> parse_query(std::string_view query)
{
    static const std::regex re(R"(^Starting from (.+), follow the links (.+) in order\. Which entity do you reach\?$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(query.begin(), query.end(), m, re))
        return std::nullopt;
    ParsedQuery out;
    out.start_entity = m[1].str();
    std::string chain = m[2].str();
    std::size_t pos = 0;
    while (true) {
        auto next = chain.find(" -> ", pos);
        out.relations.push_back(chain.substr(pos, next - pos));
        if (next == std::string::npos)
            break;
        pos = next + 4;
    }
    return out;
}

std::optional<ParsedFact> find_fact(std::string_view page_text)
{
    static const std::regex re(R"(The ([a-z]+) of ([A-Z][a-z]+ [A-Z][a-z]+) is ([A-Z][a-z]+ [A-Z][a-z]+)\.)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(page_text.begin(), page_text.end(), m, re))
        return std::nullopt;
    return ParsedFact{m[1].str(), m[2].str(), m[3].str()};
}

std::vector<std::string> parse_results(std::string_view response)
{
    if (!response.starts_with(results_prefix))
        return {};
    auto ids = text::whitespace_tokens(response.substr(results_prefix.size()));
    return ids;
}

} // namespace world_text

namespace {

// Purpose tags for keyed sub-streams.
enum : std::uint64_t {
    kNames = 1,
    kRelations,
    kPageText,
    kDistractor,
    kNoise,
    kIds,
    kOrder,
};

constexpr std::array kSyllables = {"ka", "vo", "ran", "tel", "dre", "lan", "mir", "sa", "bel", "tor", "quin",
                                   "za", "ru", "fen", "lo", "ve", "nix", "dar", "el", "ost", "ur", "py",
                                   "gar", "thi", "mo", "sef", "ul", "bra", "cor", "jen", "hal", "wyn"};
constexpr std::array kRelationWords = {"mentor",  "founder",  "successor", "rival",     "patron",
                                       "teacher", "employer", "neighbor",  "publisher", "guardian"};
constexpr std::array kAdjectives = {"amber", "quiet",  "northern", "woven",  "silver", "hollow",
                                    "brisk", "faded",  "gilded",   "rustic", "somber", "vivid"};
constexpr std::array kNouns = {"archive", "ledger", "harbor",  "lantern", "orchard", "quarry",
                               "meadow",  "tapestry", "granary", "chapel",  "bridge",  "mill"};
constexpr std::array kVerbs = {"mentions", "overlooks", "borders", "shelters",
                               "outlasts", "mirrors",   "precedes", "faces"};

template <typename Array>
const char* pick(CounterRng& rng, const Array& words)
{
    return words[rng.below(words.size())];
}

std::string capitalized_word(CounterRng& rng)
{
    std::string w;
    auto count = 2 + rng.below(2);
    for (std::uint64_t i = 0; i < count; ++i)
        w += pick(rng, kSyllables);
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

bool conflicts(const std::string& candidate, const std::vector<std::string>& taken)
{
    auto lc = text::to_lower(candidate);
    for (const auto& t : taken) {
        auto lt = text::to_lower(t);
        if (lt.find(lc) != std::string::npos || lc.find(lt) != std::string::npos)
            return true;
    }
    return false;
}

std::vector<std::string> entity_names(const WorldSpec& spec)
{
    std::vector<std::string> names;
    for (int i = 0; i < spec.num_entities; ++i) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            CounterRng rng(derive_seed(spec.seed, kNames, static_cast<std::uint64_t>(i), attempt));
            auto name = capitalized_word(rng) + " " + capitalized_word(rng);
            if (!conflicts(name, names)) {
                names.push_back(std::move(name));
                break;
            }
        }
    }
    return names;
}

std::string filler_sentence(CounterRng& rng)
{
    std::string s = "The ";
    s += pick(rng, kAdjectives);
    s += " ";
    s += pick(rng, kNouns);
    s += " ";
    s += pick(rng, kVerbs);
    s += " the ";
    s += pick(rng, kAdjectives);
    s += " ";
    s += pick(rng, kNouns);
    s += ".";
    return s;
}

std::string page_text(std::uint64_t key, std::string_view subject, const std::string& fact)
{
    CounterRng rng(key);
    auto filler = 12 + rng.below(7);
    auto fact_at = rng.below(filler + 1);
    std::string out = "Entry on " + std::string(subject) + ".";
    for (std::uint64_t i = 0; i <= filler; ++i) {
        out.push_back(' ');
        if (i == fact_at)
            out += fact;
        else
            out += filler_sentence(rng);
    }
    return out;
}

struct DraftPage {
    std::string keyword;
    std::string text;
};

template <typename T>
void shuffle(std::vector<T>& v, CounterRng& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) {
        auto j = rng.below(i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace

std::pair<World, TaskInstance> generate_world(const WorldSpec& spec)
{
    spec.validate();
    const auto h = static_cast<std::size_t>(spec.hop_depth);
    auto names = entity_names(spec);

    World world;
    world.spec = spec;
    CounterRng rel_rng(derive_seed(spec.seed, kRelations));
    for (std::size_t i = 0; i < h; ++i)
        world.relations.emplace_back(pick(rel_rng, kRelationWords));
    world.start_entity = names[0];
    world.gold_answer = names[h];

    std::vector<std::string> off_chain(names.begin() + static_cast<std::ptrdiff_t>(h + 1), names.end());

    std::vector<DraftPage> drafts;
    std::vector<std::size_t> gold_draft(h);
    std::vector<std::vector<std::size_t>> hop_drafts(h);
    std::vector<std::string> gold_facts(h);
    for (std::size_t i = 0; i < h; ++i) {
        gold_facts[i] = world_text::fact(world.relations[i], names[i], names[i + 1]);
        gold_draft[i] = drafts.size();
        hop_drafts[i].push_back(drafts.size());
        drafts.push_back({text::normalize(names[i]),
                          page_text(derive_seed(spec.seed, kPageText, i), names[i], gold_facts[i])});
    }

    int noise_left = spec.noise_pages;
    for (std::size_t i = 0; i < h && noise_left > 0; ++i) {
        for (int j = 0; j < spec.branching - 1 && noise_left > 0; ++j, --noise_left) {
            CounterRng rng(derive_seed(spec.seed, kDistractor, i, static_cast<std::uint64_t>(j)));
            // Distractors point off the chain, or backwards along it; never at the answer.
            std::vector<std::string> pool = off_chain;
            if (pool.empty()) {
                for (std::size_t e = 0; e <= i; ++e)
                    if (e != i || i == 0)
                        pool.push_back(names[e]);
            }
            const auto& target = pool[rng.below(pool.size())];
            auto fact = world_text::fact(world.relations[i], names[i], target);
            hop_drafts[i].push_back(drafts.size());
            drafts.push_back({text::normalize(names[i]), page_text(rng.next(), names[i], fact)});
        }
    }
    std::vector<std::size_t> noise_drafts;
    for (int j = 0; noise_left > 0; ++j, --noise_left) {
        CounterRng rng(derive_seed(spec.seed, kNoise, static_cast<std::uint64_t>(j)));
        std::vector<std::string> subjects = off_chain.empty()
                                                ? std::vector<std::string>(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(h))
                                                : off_chain;
        const auto& subject = subjects[rng.below(subjects.size())];
        std::vector<std::string> objects;
        for (std::size_t e = 0; e < names.size(); ++e)
            if (e != h && names[e] != subject)
                objects.push_back(names[e]);
        const auto& object = objects.empty() ? subject : objects[rng.below(objects.size())];
        auto fact = world_text::fact(pick(rng, kRelationWords), subject, object);
        noise_drafts.push_back(drafts.size());
        drafts.push_back({text::normalize(subject), page_text(rng.next(), subject, fact)});
    }

    std::vector<std::size_t> perm(drafts.size());
    for (std::size_t i = 0; i < perm.size(); ++i)
        perm[i] = i;
    CounterRng id_rng(derive_seed(spec.seed, kIds));
    shuffle(perm, id_rng);
    auto id_of = [&](std::size_t draft) { return "p" + std::to_string(perm[draft] + 1); };

    for (std::size_t d = 0; d < drafts.size(); ++d)
        world.pages.emplace(id_of(d), drafts[d].text);

    for (std::size_t i = 0; i < h; ++i) {
        CounterRng order_rng(derive_seed(spec.seed, kOrder, i));
        auto listed = hop_drafts[i];
        shuffle(listed, order_rng);
        auto& ids = world.index[text::normalize(names[i])];
        for (auto d : listed)
            ids.push_back(id_of(d));
        world.gold_chain.push_back({id_of(gold_draft[i]), gold_facts[i]});
    }
    for (auto d : noise_drafts)
        world.index[drafts[d].keyword].push_back(id_of(d));

    auto task = task_for(world);
    return {std::move(world), std::move(task)};
}

TaskInstance task_for(const World& world)
{
    return TaskInstance{"task-" + world.id(), world_text::query(world.start_entity, world.relations), world.gold_answer,
                        world.id()};
}

namespace {

const std::string& argument(const ToolCall& call, const char* key)
{
    auto it = call.arguments.find(key);
    if (it == call.arguments.end())
        throw Error(Errc::InvalidArgument, call.tool_name + " requires argument `" + key + "`");
    return it->second;
}

} // namespace

ToolOutcome execute_tool(const World& world, const ToolCall& call)
{
    if (call.tool_name == tools::search) {
        auto it = world.index.find(text::normalize(argument(call, "query")));
        if (it == world.index.end() || it->second.empty())
            return {std::string(world_text::no_results), false};
        std::string out(world_text::results_prefix);
        auto shown = std::min<std::size_t>(it->second.size(), static_cast<std::size_t>(world.spec.branching));
        for (std::size_t i = 0; i < shown; ++i)
            out += " " + it->second[i];
        return {out, false};
    }
    if (call.tool_name == tools::open) {
        const auto& page = argument(call, "page");
        auto it = world.pages.find(text::trim(page));
        if (it == world.pages.end())
            return {std::string(world_text::not_found_prefix) + page, false};
        return {it->second, false};
    }
    if (call.tool_name == tools::answer)
        return {argument(call, "value"), true};
    if (call.tool_name == tools::noop)
        return {std::string(world_text::noop_response), false};
    throw Error(Errc::UnknownTool, call.tool_name);
}

TrajStep execute_step(const World& world, TrajStep step)
{
    step.response = execute_tool(world, step.action).text;
    return step;
}

namespace {

class Enumerator {
  public:
    Enumerator(const World& world, const ScriptedPolicy& policy, const TaskInstance& task, int budget)
      : world_(world), policy_(policy), task_(task), budget_(static_cast<std::size_t>(budget))
    {
    }

    double run(Trajectory& traj)
    {
        if (traj.terminal())
            return exact_match_judge(*traj.terminal_answer, task_.gold_answer) ? 1.0 : 0.0;
        if (traj.steps.size() >= budget_)
            return 0.0;
        auto dist = policy_.distribution(task_, traj);
        auto t = static_cast<int>(traj.steps.size()) + 1;
        double total = 0.0;
        for (const auto& branch : dist) {
            if (branch.probability <= 0.0)
                continue;
            auto step = execute_step(world_, branch.step.as_step(t));
            if (step.action.is_answer())
                traj.terminal_answer = step.action.arguments.at("value");
            traj.steps.push_back(std::move(step));
            total += branch.probability * run(traj);
            traj.steps.pop_back();
            traj.terminal_answer.reset();
        }
        return total;
    }

  private:
    const World& world_;
    const ScriptedPolicy& policy_;
    const TaskInstance& task_;
    std::size_t budget_;
};

} // namespace

double exact_success_prob(const World& world, const Policy& policy, const TaskInstance& task,
                          const Trajectory& prefix, int depth_budget)
{
    const auto* scripted = dynamic_cast<const ScriptedPolicy*>(&policy);
    if (scripted == nullptr)
        throw Error(Errc::NonEnumerablePolicy, "exact enumeration needs a scripted policy");
    if (depth_budget < 1)
        throw Error(Errc::InvalidArgument, "depth_budget must be >= 1");
    Trajectory traj = prefix;
    return Enumerator(world, *scripted, task, depth_budget).run(traj);
}

json to_json(const WorldSpec& spec)
{
    return json{{"seed", spec.seed},
                {"num_entities", spec.num_entities},
                {"hop_depth", spec.hop_depth},
                {"branching", spec.branching},
                {"noise_pages", spec.noise_pages}};
}

WorldSpec world_spec_from_json(const json& j)
{
    WorldSpec spec;
    const auto& seed = records::require(j, "seed", "spec");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
        throw SchemaViolation("spec.seed", "expected non-negative integer");
    spec.seed = seed.get<std::uint64_t>();
    spec.num_entities = static_cast<int>(records::require_integer(j, "num_entities", "spec"));
    spec.hop_depth = static_cast<int>(records::require_integer(j, "hop_depth", "spec"));
    spec.branching = static_cast<int>(records::require_integer(j, "branching", "spec"));
    spec.noise_pages = static_cast<int>(records::require_integer(j, "noise_pages", "spec"));
    return spec;
}

json world_bundle(const World& world)
{
    json chain = json::array();
    for (const auto& link : world.gold_chain)
        chain.push_back({{"page_id", link.page_id}, {"fact", link.fact}});
    return json{{"format", "isprm.world"},
                {"version", records::kSchemaVersion},
                {"world_id", world.id()},
                {"spec", to_json(world.spec)},
                {"pages", world.pages},
                {"index", world.index},
                {"gold_chain", std::move(chain)},
                {"gold_answer", world.gold_answer},
                {"start_entity", world.start_entity},
                {"relations", world.relations},
                {"task", to_json(task_for(world))}};
}

World world_from_bundle(const json& j)
{
    if (records::require_string(j, "format", "") != "isprm.world")
        throw SchemaViolation("format", "expected isprm.world");
    World w;
    w.spec = world_spec_from_json(records::require(j, "spec", ""));
    try {
        w.pages = records::require(j, "pages", "").get<std::map<std::string, std::string>>();
        w.index = records::require(j, "index", "").get<std::map<std::string, std::vector<std::string>>>();
        w.relations = records::require(j, "relations", "").get<std::vector<std::string>>();
    } catch (const json::type_error& e) {
        throw SchemaViolation("pages|index|relations", e.what());
    }
    const auto& chain = records::require(j, "gold_chain", "");
    if (!chain.is_array())
        throw SchemaViolation("gold_chain", "expected array");
    for (std::size_t i = 0; i < chain.size(); ++i) {
        std::string path = "gold_chain[" + std::to_string(i) + "]";
        ChainLink link{records::require_string(chain[i], "page_id", path), records::require_string(chain[i], "fact", path)};
        if (!w.pages.contains(link.page_id))
            throw SchemaViolation(path + ".page_id", "page does not exist");
        w.gold_chain.push_back(std::move(link));
    }
    w.gold_answer = records::require_string(j, "gold_answer", "");
    w.start_entity = records::require_string(j, "start_entity", "");
    if (records::require_string(j, "world_id", "") != w.id())
        throw SchemaViolation("world_id", "does not match spec");
    return w;
}

void WorldSet::add(World world)
{
    auto id = world.id();
    worlds_.insert_or_assign(std::move(id), std::move(world));
}

const World& WorldSet::at(std::string_view world_id) const
{
    auto it = worlds_.find(world_id);
    if (it == worlds_.end())
        throw Error(Errc::InvalidArgument, "unknown world " + std::string(world_id));
    return it->second;
}

const World& WorldSet::for_task(const TaskInstance& task) const
{
    if (!task.world_ref)
        throw Error(Errc::InvalidArgument, "task " + task.task_id + " has no simulated world");
    return at(*task.world_ref);
}

} // namespace isprm
