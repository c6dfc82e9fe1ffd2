// SPDX-License-Identifier: Apache-2.0
#include "isprm/cli.hpp"

#include <chrono>
#include <climits>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include <CLI11.hpp>

#include "isprm/annotator.hpp"
#include "isprm/error.hpp"
#include "isprm/eval.hpp"
#include "isprm/hashing.hpp"
#include "isprm/parallel.hpp"
#include "isprm/records.hpp"
#include "isprm/reward.hpp"
#include "isprm/scorer.hpp"
#include "isprm/search.hpp"
#include "isprm/summarizer.hpp"

namespace isprm::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kScorers = {"oracle", "relevance", "confidence", "verbal", "remote-prm"};

void check(bool ok, const std::string& what)
{
    if (!ok)
        throw Error(Errc::InvalidArgument, what);
}

} // namespace

void RunConfig::validate() const
{
    check(M >= 1, "M must be >= 1");
    check(N >= 1, "N must be >= 1");
    check(n >= 1, "n must be >= 1");
    check(L >= 1, "L must be >= 1");
    check(count >= 1, "count must be >= 1");
    check(max_steps >= 0, "max_steps must be >= 0");
    check(max_pairs >= 0, "max_pairs must be >= 0");
    check(workers >= 1, "workers must be >= 1");
    check(kScorers.count(scorer) == 1, "unknown scorer: " + scorer);
    check(policy == "world" || policy == "remote", "policy must be world or remote");
    check(summarizer == "extractive" || summarizer == "remote", "summarizer must be extractive or remote");
    check(vary == "context" || vary == "n", "vary must be context or n");
    check(p_guess >= 0 && p_repeat >= 0 && p_guess <= 1 && p_repeat <= 1, "p_guess and p_repeat must lie in [0, 1]");
    ContextMode::parse(context_mode);
    for (const auto& m : modes)
        ContextMode::parse(m);
    for (int v : n_values)
        check(v >= 1, "n_values entries must be >= 1");
}

bool RunConfig::operator==(const RunConfig& other) const
{
    return to_json(*this) == to_json(other);
}

json to_json(const RunConfig& c)
{
    return json{{"seed", c.seed},
                {"M", c.M},
                {"N", c.N},
                {"n", c.n},
                {"L", c.L},
                {"hops", c.hops},
                {"branching", c.branching},
                {"entities", c.entities},
                {"noise", c.noise},
                {"count", c.count},
                {"worlds", c.worlds},
                {"tasks", c.tasks},
                {"pairs", c.pairs},
                {"generations", c.generations},
                {"trajectories", c.trajectories},
                {"suite", c.suite},
                {"out", c.out},
                {"max_steps", c.max_steps},
                {"max_pairs", c.max_pairs},
                {"context_mode", c.context_mode},
                {"scorer", c.scorer},
                {"policy", c.policy},
                {"summarizer", c.summarizer},
                {"p_guess", c.p_guess},
                {"p_repeat", c.p_repeat},
                {"workers", c.workers},
                {"with_advantage", c.with_advantage},
                {"vary", c.vary},
                {"modes", c.modes},
                {"n_values", c.n_values},
                {"backend", to_json(c.backend)}};
}

RunConfig overlay(RunConfig c, const json& j)
{
    if (!j.is_object())
        throw SchemaViolation("config", "expected object");
    auto known = to_json(c);
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw SchemaViolation("config." + key, "unknown config key");

    auto take = [&](const char* key, auto& field) {
        if (!j.contains(key))
            return;
        try {
            field = j.at(key).get<std::decay_t<decltype(field)>>();
        } catch (const json::exception& e) {
            throw SchemaViolation(std::string("config.") + key, e.what());
        }
    };
    take("seed", c.seed);
    take("M", c.M);
    take("N", c.N);
    take("n", c.n);
    take("L", c.L);
    take("hops", c.hops);
    take("branching", c.branching);
    take("entities", c.entities);
    take("noise", c.noise);
    take("count", c.count);
    take("worlds", c.worlds);
    take("tasks", c.tasks);
    take("pairs", c.pairs);
    take("generations", c.generations);
    take("trajectories", c.trajectories);
    take("suite", c.suite);
    take("out", c.out);
    take("max_steps", c.max_steps);
    take("max_pairs", c.max_pairs);
    take("context_mode", c.context_mode);
    take("scorer", c.scorer);
    take("policy", c.policy);
    take("summarizer", c.summarizer);
    take("p_guess", c.p_guess);
    take("p_repeat", c.p_repeat);
    take("workers", c.workers);
    take("with_advantage", c.with_advantage);
    take("vary", c.vary);
    take("modes", c.modes);
    take("n_values", c.n_values);
    if (j.contains("backend")) {
        auto merged = to_json(c.backend);
        if (!j["backend"].is_object())
            throw SchemaViolation("config.backend", "expected object");
        for (const auto& [key, value] : j["backend"].items()) {
            if (!merged.contains(key))
                throw SchemaViolation("config.backend." + key, "unknown config key");
            merged[key] = value;
        }
        c.backend = backend_config_from_json(merged);
    }
    return c;
}

json load_config_document(const std::string& path, const std::string& command)
{
    auto body = records::read_file(path);
    auto first = body.substr(0, body.find('\n'));
    json head = json::parse(first, nullptr, false);
    if (head.is_object() && head.value("schema", "") == records::schema::manifest) {
        auto rows = records::from_jsonl(records::schema::manifest, body);
        if (rows.size() != 1)
            throw SchemaViolation(path, "manifest must hold exactly one document");
        auto cmd = records::require_string(rows[0], "command", "");
        if (!command.empty() && cmd != command)
            throw Error(Errc::InvalidArgument, "manifest " + path + " was written by '" + cmd + "', not '" + command + "'");
        return records::require(rows[0], "config", "");
    }
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded())
        throw SchemaViolation(path, "config file is not valid JSON");
    return doc;
}

std::string usage()
{
    return "usage: isprm <command> [options]\n"
           "\n"
           "commands:\n"
           "  world gen    generate simulated worlds and their task records\n"
           "  annotate     chained Monte-Carlo annotation into preference pairs\n"
           "  rewards      score-and-comparison rewards for scorer generations\n"
           "  export       summarizer SFT records (and rewards) for a trainer\n"
           "  search run   best-of-n guided search episodes\n"
           "  bench        Avg@k benchmark over a suite file\n"
           "  ablate       context-mode or n sweep over a suite file\n"
           "\n"
           "Every command accepts --config FILE (a JSON config or a manifest written by\n"
           "an earlier run). Flags override config values. Run `isprm <command> --help`\n"
           "for the flag list. Backend credentials are read from the environment\n"
           "variable named by --auth-env (default OPENAI_API_KEY).\n";
}

namespace {

// ---- flag plumbing ---------------------------------------------------------

struct FlagSet {
    std::string config_path;
    json values = json::object();
    std::vector<std::function<void()>> commits;

    void commit()
    {
        for (auto& f : commits)
            f();
    }
};

std::string dashed(std::string key)
{
    for (auto& ch : key)
        if (ch == '_')
            ch = '-';
    return key;
}

template <typename T>
void flag(CLI::App* app, FlagSet& fs, const std::string& key, const std::string& help, const std::string& group = "")
{
    auto value = std::make_shared<T>();
    auto name = key.rfind("backend.", 0) == 0 ? key.substr(8) : key;
    auto* opt = app->add_option("--" + dashed(name), *value, help);
    if (!group.empty())
        opt->group(group);
    fs.commits.push_back([&fs, key, value, opt] {
        if (opt->count() == 0)
            return;
        if (key.rfind("backend.", 0) == 0)
            fs.values["backend"][key.substr(8)] = *value;
        else
            fs.values[key] = *value;
    });
}

void add_flags(CLI::App* app, FlagSet& fs)
{
    app->add_option("--config", fs.config_path, "JSON config or manifest from an earlier run");
    flag<std::uint64_t>(app, fs, "seed", "base seed");
    flag<int>(app, fs, "M", "Monte-Carlo rollouts per estimate (default 8)");
    flag<int>(app, fs, "N", "scorer generations per pair side (default 4)");
    flag<int>(app, fs, "n", "best-of-n candidates (default 4)");
    flag<int>(app, fs, "L", "summary length bound in characters (default 2000)");
    flag<int>(app, fs, "hops", "world hop depth");
    flag<int>(app, fs, "branching", "search results per query");
    flag<int>(app, fs, "entities", "entities per world");
    flag<int>(app, fs, "noise", "distractor pages per world");
    flag<int>(app, fs, "count", "worlds to generate (seeds seed..seed+count-1)");
    flag<std::string>(app, fs, "worlds", "world bundle file", "Paths");
    flag<std::string>(app, fs, "tasks", "task file", "Paths");
    flag<std::string>(app, fs, "pairs", "pair file", "Paths");
    flag<std::string>(app, fs, "generations", "scorer generation file", "Paths");
    flag<std::string>(app, fs, "trajectories", "trajectory file", "Paths");
    flag<std::string>(app, fs, "suite", "benchmark suite file", "Paths");
    flag<std::string>(app, fs, "out", "output prefix", "Paths");
    flag<int>(app, fs, "max_steps", "total step budget (0 = world default)");
    flag<int>(app, fs, "max_pairs", "pairs per annotated task (0 = until the budget)");
    flag<std::string>(app, fs, "context_mode", "summary | full | lastK");
    flag<std::string>(app, fs, "scorer", "oracle | relevance | confidence | verbal | remote-prm");
    flag<std::string>(app, fs, "policy", "world | remote");
    flag<std::string>(app, fs, "summarizer", "extractive | remote");
    flag<double>(app, fs, "p_guess", "scripted policy: probability of answering early");
    flag<double>(app, fs, "p_repeat", "scripted policy: probability of repeating a search");
    flag<int>(app, fs, "workers", "worker threads");
    flag<bool>(app, fs, "with_advantage", "attach per-side group-normalized advantages (true|false)");
    flag<std::string>(app, fs, "vary", "ablate: context | n");
    flag<std::vector<std::string>>(app, fs, "modes", "ablate: context modes");
    flag<std::vector<int>>(app, fs, "n_values", "ablate: candidate counts");
    flag<std::string>(app, fs, "backend.endpoint", "chat backend base URL", "Backend");
    flag<std::string>(app, fs, "backend.model", "chat backend model name", "Backend");
    flag<double>(app, fs, "backend.temperature", "sampling temperature", "Backend");
    flag<int>(app, fs, "backend.max_tokens", "max completion tokens", "Backend");
    flag<double>(app, fs, "backend.timeout_s", "request timeout in seconds", "Backend");
    flag<int>(app, fs, "backend.max_retries", "retries per request", "Backend");
    flag<int>(app, fs, "backend.backoff_ms", "initial retry backoff", "Backend");
    flag<std::string>(app, fs, "backend.auth_env", "environment variable holding the API key", "Backend");
    flag<int>(app, fs, "backend.max_in_flight", "concurrent request cap", "Backend");
    flag<std::string>(app, fs, "backend.replay_log", "record/replay log path", "Backend");
    flag<std::string>(app, fs, "backend.replay_mode", "off | record | replay", "Backend");
}

RunConfig resolve(FlagSet& fs, const std::string& command)
{
    fs.commit();
    RunConfig cfg;
    if (!fs.config_path.empty())
        cfg = overlay(cfg, load_config_document(fs.config_path, command));
    cfg = overlay(cfg, fs.values);
    cfg.validate();
    return cfg;
}

// ---- shared pieces ---------------------------------------------------------

std::string strip_suffix(std::string path, std::string_view suffix)
{
    if (path.size() > suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
        path.resize(path.size() - suffix.size());
    return path;
}

std::string prefix_for(const RunConfig& cfg, const std::string& input, std::string_view suffix)
{
    if (!cfg.out.empty())
        return cfg.out;
    if (input.empty())
        throw Error(Errc::InvalidArgument, "--out is required");
    return strip_suffix(input, suffix);
}

void require_path(const std::string& value, const char* flag_name)
{
    if (value.empty())
        throw Error(Errc::InvalidArgument, std::string("missing required --") + flag_name);
}

void write_manifest(const std::string& path, const std::string& command, const RunConfig& cfg,
                    const std::map<std::string, std::string>& outputs)
{
    json doc{{"command", command}, {"config", to_json(cfg)}, {"outputs", outputs}};
    records::write_jsonl(path, records::schema::manifest, {doc});
}

std::vector<TaskInstance> load_tasks(const std::string& path)
{
    std::vector<TaskInstance> tasks;
    for (const auto& row : records::read_jsonl(path, records::schema::tasks))
        tasks.push_back(task_from_json(row));
    return tasks;
}

/// Worlds come from --worlds when given; otherwise each task's world_ref is
/// a world id, which fully determines the world.
WorldSet load_worlds(const RunConfig& cfg, const std::vector<TaskInstance>& tasks)
{
    WorldSet set;
    if (!cfg.worlds.empty()) {
        for (const auto& row : records::read_jsonl(cfg.worlds, records::schema::worlds))
            set.add(world_from_bundle(row));
        return set;
    }
    std::set<std::string> seen;
    for (const auto& task : tasks) {
        if (!task.world_ref)
            throw Error(Errc::InvalidArgument, "task " + task.task_id + " has no world_ref and no --worlds was given");
        if (!seen.insert(*task.world_ref).second)
            continue;
        auto spec = parse_world_id(*task.world_ref);
        if (!spec)
            throw Error(Errc::InvalidArgument, "cannot rebuild world " + *task.world_ref + "; pass --worlds");
        set.add(generate_world(*spec).first);
    }
    return set;
}

struct Backends {
    const RunConfig& cfg;
    std::shared_ptr<const ChatBackend> chat;

    std::shared_ptr<const ChatBackend> get()
    {
        if (!chat) {
            if (cfg.backend.endpoint.empty() && cfg.backend.replay_mode != ReplayMode::Replay)
                throw Error(Errc::InvalidArgument, "a remote component was selected but no --endpoint was given");
            chat = std::make_shared<HttpChatBackend>(cfg.backend);
        }
        return chat;
    }
};

std::unique_ptr<Policy> make_policy(const RunConfig& cfg, Backends& backends)
{
    if (cfg.policy == "remote")
        return std::make_unique<RemotePolicy>(backends.get(), cfg.scorer == "confidence");
    return std::make_unique<ScriptedPolicy>(make_world_policy({cfg.p_guess, cfg.p_repeat}));
}

std::unique_ptr<SummaryBackend> make_summarizer(const RunConfig& cfg, Backends& backends)
{
    auto bound = static_cast<std::size_t>(cfg.L);
    if (cfg.summarizer == "remote")
        return std::make_unique<RemoteSummarizer>(backends.get(), bound);
    return std::make_unique<ExtractiveSummarizer>(bound);
}

std::unique_ptr<StepScorer> make_scorer(const RunConfig& cfg, const WorldSet& worlds, const Policy& policy,
                                        Backends& backends)
{
    if (cfg.scorer == "oracle")
        return std::make_unique<OracleScorer>(worlds, policy, cfg.max_steps, cfg.M);
    if (cfg.scorer == "relevance")
        return std::make_unique<RelevanceScorer>();
    if (cfg.scorer == "confidence")
        return std::make_unique<ConfidenceScorer>();
    if (cfg.scorer == "verbal")
        return std::make_unique<VerbalProgressScorer>(backends.get());
    return std::make_unique<RemotePrmScorer>(backends.get(), cfg.M);
}

SearchConfig search_config(const RunConfig& cfg)
{
    SearchConfig sc;
    sc.n = cfg.n;
    sc.max_steps = cfg.max_steps;
    sc.context_mode = ContextMode::parse(cfg.context_mode);
    sc.seed = cfg.seed;
    // worst value on each scorer's own scale
    sc.scorer_fallback = cfg.scorer == "verbal" ? 1.0 : cfg.scorer == "relevance" ? 0.0 : -cfg.M / 2.0;
    if (cfg.scorer == "confidence")
        sc.scorer_fallback = -1e9;
    sc.validate();
    return sc;
}

// ---- subcommands -----------------------------------------------------------

int cmd_world_gen(const RunConfig& cfg, std::ostream& out)
{
    std::vector<json> worlds;
    std::vector<json> tasks;
    std::string first_id;
    for (int i = 0; i < cfg.count; ++i) {
        WorldSpec spec{cfg.seed + static_cast<std::uint64_t>(i), cfg.entities, cfg.hops, cfg.branching, cfg.noise};
        auto [world, task] = generate_world(spec);
        if (first_id.empty())
            first_id = world.id();
        worlds.push_back(world_bundle(world));
        tasks.push_back(to_json(task));
    }
    auto prefix = cfg.out.empty() ? first_id : cfg.out;
    std::map<std::string, std::string> outputs{{"worlds", prefix + ".worlds.jsonl"}, {"tasks", prefix + ".tasks.jsonl"}};
    records::write_jsonl(outputs["worlds"], records::schema::worlds, worlds);
    records::write_jsonl(outputs["tasks"], records::schema::tasks, tasks);
    auto manifest = prefix + ".world-gen.manifest.jsonl";
    write_manifest(manifest, "world gen", cfg, outputs);
    out << outputs["worlds"] << "\n" << outputs["tasks"] << "\n" << manifest << "\n";
    return 0;
}

int cmd_annotate(const RunConfig& cfg, std::ostream& out)
{
    require_path(cfg.tasks, "tasks");
    auto tasks = load_tasks(cfg.tasks);
    auto worlds = load_worlds(cfg, tasks);
    Backends backends{cfg};
    auto policy = make_policy(cfg, backends);
    AnnotationEnv env{worlds, *policy, exact_match_judge, cfg.max_steps, 1};
    int max_pairs = cfg.max_pairs == 0 ? INT_MAX : cfg.max_pairs;

    std::vector<ChainResult> chains(tasks.size());
    parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) {
        chains[i] = chain_annotate(env, tasks[i], cfg.M, max_pairs, derive_seed(cfg.seed, fnv1a64(tasks[i].task_id)));
    });

    std::vector<json> pair_rows;
    std::vector<json> traj_rows;
    for (const auto& chain : chains) {
        for (const auto& pair : chain.pairs)
            pair_rows.push_back(to_json(to_record(pair)));
        traj_rows.push_back(to_json(chain.trajectory));
    }
    auto prefix = prefix_for(cfg, cfg.tasks, ".tasks.jsonl");
    std::map<std::string, std::string> outputs{{"pairs", prefix + ".pairs.jsonl"},
                                               {"trajectories", prefix + ".chains.jsonl"}};
    records::write_jsonl(outputs["pairs"], records::schema::pairs, pair_rows);
    records::write_jsonl(outputs["trajectories"], records::schema::trajectories, traj_rows);
    auto manifest = prefix + ".annotate.manifest.jsonl";
    write_manifest(manifest, "annotate", cfg, outputs);
    out << pair_rows.size() << " pairs from " << tasks.size() << " tasks\n"
        << outputs["pairs"] << "\n" << outputs["trajectories"] << "\n" << manifest << "\n";
    return 0;
}

/// Reward records for every pair in the pair file, from the generation file.
std::vector<json> compute_rewards(const RunConfig& cfg)
{
    require_path(cfg.pairs, "pairs");
    require_path(cfg.generations, "generations");
    std::vector<PairRecord> pairs;
    for (const auto& row : records::read_jsonl(cfg.pairs, records::schema::pairs))
        pairs.push_back(pair_record_from_json(row));

    // pair_id -> side -> rollout_idx -> text
    std::map<std::string, std::map<PairSide, std::map<int, std::string>>> gens;
    auto rows = records::read_jsonl(cfg.generations, records::schema::generations);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::string path = "generations[" + std::to_string(i) + "]";
        auto side = parse_side(records::require_string(rows[i], "side", path));
        auto idx = static_cast<int>(records::require_integer(rows[i], "rollout_idx", path));
        auto& slot = gens[records::require_string(rows[i], "pair_id", path)][side];
        if (!slot.emplace(idx, records::require_string(rows[i], "text", path)).second)
            throw SchemaViolation(path, "duplicate rollout_idx");
    }

    std::vector<json> outrows;
    for (const auto& pair : pairs) {
        auto id = pair.pair_id();
        auto side_rollouts = [&](PairSide side) {
            std::vector<ScorerRollout> list;
            auto it = gens.find(id);
            if (it == gens.end() || !it->second.count(side))
                throw Error(Errc::LengthMismatch, "no " + std::string(to_string(side)) + " generations for " + id);
            const auto& by_idx = it->second.at(side);
            if (static_cast<int>(by_idx.size()) != cfg.N)
                throw Error(Errc::LengthMismatch, id + ": expected " + std::to_string(cfg.N) + " " +
                                                      std::string(to_string(side)) + " generations, found " +
                                                      std::to_string(by_idx.size()));
            int expect = 0;
            for (const auto& [idx, text] : by_idx) {
                if (idx != expect++)
                    throw Error(Errc::LengthMismatch, id + ": rollout_idx values must be 0..N-1");
                try {
                    list.push_back(make_scorer_rollout(side, text, pair.M));
                } catch (const Error& e) {
                    throw Error(e.code(), id + " " + std::string(to_string(side)) + " rollout " + std::to_string(idx) +
                                              ": " + e.what());
                }
            }
            return list;
        };
        auto winners = side_rollouts(PairSide::Winner);
        auto losers = side_rollouts(PairSide::Loser);
        for (const auto& rec :
             reward_records(id, pair.winner.g, pair.loser.g, pair.M, winners, losers, cfg.with_advantage))
            outrows.push_back(to_json(rec));
    }
    return outrows;
}

int cmd_rewards(const RunConfig& cfg, std::ostream& out)
{
    auto rows = compute_rewards(cfg);
    auto prefix = prefix_for(cfg, cfg.pairs, ".pairs.jsonl");
    std::map<std::string, std::string> outputs{{"rewards", prefix + ".rewards.jsonl"}};
    records::write_jsonl(outputs["rewards"], records::schema::rewards, rows);
    auto manifest = prefix + ".rewards.manifest.jsonl";
    write_manifest(manifest, "rewards", cfg, outputs);
    out << rows.size() << " reward records\n" << outputs["rewards"] << "\n" << manifest << "\n";
    return 0;
}

int cmd_export(const RunConfig& cfg, std::ostream& out)
{
    require_path(cfg.trajectories, "trajectories");
    require_path(cfg.tasks, "tasks");
    std::map<std::string, std::string> queries;
    for (const auto& t : load_tasks(cfg.tasks))
        queries[t.task_id] = t.query;
    Backends backends{cfg};
    auto summarizer = make_summarizer(cfg, backends);

    std::vector<Trajectory> trajs;
    for (const auto& row : records::read_jsonl(cfg.trajectories, records::schema::trajectories))
        trajs.push_back(trajectory_from_json(row));
    std::vector<std::vector<Summary>> summaries(trajs.size());
    parallel_for(trajs.size(), cfg.workers, [&](std::size_t i) {
        auto q = queries.find(trajs[i].task_id);
        if (q == queries.end())
            throw Error(Errc::InvalidArgument, "trajectory for unknown task " + trajs[i].task_id);
        summaries[i] = summarize_trajectory(q->second, trajs[i], *summarizer);
    });

    std::vector<json> sft;
    SummaryCache cache;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const auto& q = queries.at(trajs[i].task_id);
        Summary prev;
        std::string prev_response;
        for (std::size_t k = 0; k < trajs[i].steps.size(); ++k) {
            const auto& step = trajs[i].steps[k];
            sft.push_back(to_json(emit_sft_record(q, prev, prev_response, step, summaries[i][k])));
            cache.put(trajs[i].task_id, summaries[i][k]);
            prev = summaries[i][k];
            prev_response = step.response.value_or("");
        }
    }

    auto prefix = prefix_for(cfg, cfg.trajectories, ".jsonl");
    std::map<std::string, std::string> outputs{{"sft", prefix + ".sft.jsonl"},
                                               {"summaries", prefix + ".summaries.jsonl"}};
    records::write_jsonl(outputs["sft"], records::schema::sft, sft);
    cache.save(outputs["summaries"]);
    if (!cfg.pairs.empty() || !cfg.generations.empty()) {
        outputs["rewards"] = prefix + ".rewards.jsonl";
        records::write_jsonl(outputs["rewards"], records::schema::rewards, compute_rewards(cfg));
    }
    auto manifest = prefix + ".export.manifest.jsonl";
    write_manifest(manifest, "export", cfg, outputs);
    out << sft.size() << " SFT records\n";
    for (const auto& [role, path] : outputs)
        out << path << "\n";
    out << manifest << "\n";
    return 0;
}

int cmd_search_run(const RunConfig& cfg, std::ostream& out)
{
    require_path(cfg.tasks, "tasks");
    auto tasks = load_tasks(cfg.tasks);
    auto worlds = load_worlds(cfg, tasks);
    Backends backends{cfg};
    auto policy = make_policy(cfg, backends);
    auto scorer = make_scorer(cfg, worlds, *policy, backends);
    auto summarizer = make_summarizer(cfg, backends);
    SearchEnv env{worlds, *policy, *scorer, *summarizer, exact_match_judge, 1};
    auto sc = search_config(cfg);

    std::vector<EpisodeResult> results(tasks.size());
    parallel_for(tasks.size(), cfg.workers, [&](std::size_t i) { results[i] = run_episode(env, tasks[i], sc); });

    std::vector<json> rows;
    int correct = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        auto row = to_json(results[i]);
        row["task_id"] = tasks[i].task_id;
        rows.push_back(std::move(row));
        correct += results[i].correct ? 1 : 0;
    }
    auto prefix = prefix_for(cfg, cfg.tasks, ".tasks.jsonl");
    std::map<std::string, std::string> outputs{{"episodes", prefix + ".episodes.jsonl"}};
    records::write_jsonl(outputs["episodes"], records::schema::episodes, rows);
    auto manifest = prefix + ".search-run.manifest.jsonl";
    write_manifest(manifest, "search run", cfg, outputs);
    out << correct << "/" << tasks.size() << " correct\n" << outputs["episodes"] << "\n" << manifest << "\n";
    return 0;
}

/// Suite file: {suite_id, runs_per_task, min_accuracy?, tasks: "path" | worlds: [WorldSpec...]}.
/// Relative paths resolve against the suite file's directory.
BenchmarkSuite load_suite(const std::string& path, std::string* tasks_path)
{
    auto body = records::read_file(path);
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw SchemaViolation(path, "suite file is not a JSON object");
    BenchmarkSuite suite;
    suite.suite_id = records::require_string(doc, "suite_id", "suite");
    if (doc.contains("runs_per_task"))
        suite.runs_per_task = static_cast<int>(records::require_integer(doc, "runs_per_task", "suite"));
    if (doc.contains("min_accuracy"))
        suite.min_accuracy = records::require_number(doc, "min_accuracy", "suite");
    if (doc.contains("tasks")) {
        fs::path p = records::require_string(doc, "tasks", "suite");
        if (p.is_relative())
            p = fs::path(path).parent_path() / p;
        *tasks_path = p.string();
        suite.tasks = load_tasks(*tasks_path);
    } else if (doc.contains("worlds")) {
        const auto& specs = doc["worlds"];
        if (!specs.is_array())
            throw SchemaViolation("suite.worlds", "expected array");
        for (const auto& s : specs)
            suite.tasks.push_back(generate_world(world_spec_from_json(s)).second);
    } else {
        throw SchemaViolation("suite", "needs either tasks or worlds");
    }
    suite.validate();
    return suite;
}

int cmd_bench(const RunConfig& cfg, const std::string& command, std::ostream& out, std::ostream& err)
{
    require_path(cfg.suite, "suite");
    std::string tasks_path;
    auto suite = load_suite(cfg.suite, &tasks_path);
    auto worlds = load_worlds(cfg, suite.tasks);
    Backends backends{cfg};
    auto policy = make_policy(cfg, backends);
    auto scorer = make_scorer(cfg, worlds, *policy, backends);
    auto summarizer = make_summarizer(cfg, backends);
    SearchEnv env{worlds, *policy, *scorer, *summarizer, exact_match_judge, 1};
    auto sc = search_config(cfg);

    auto start = std::chrono::steady_clock::now();
    Report report;
    if (command == "bench") {
        report = run_benchmark(suite, env, sc, cfg.workers);
    } else if (cfg.vary == "n") {
        report = sweep_n(suite, env, sc, cfg.n_values, cfg.workers);
    } else {
        std::vector<ContextMode> modes;
        for (const auto& m : cfg.modes)
            modes.push_back(ContextMode::parse(m));
        report = ablate_context_modes(suite, env, sc, modes, cfg.workers);
    }
    auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    auto prefix = prefix_for(cfg, cfg.suite, ".json");
    std::map<std::string, std::string> outputs{{"report", prefix + "." + command + ".report.jsonl"},
                                               {"table", prefix + "." + command + ".report.txt"}};
    auto table = render_table(report);
    records::write_jsonl(outputs["report"], records::schema::report, {to_json(report)});
    records::write_file(outputs["table"], records::header(records::schema::report).dump() + "\n" + table);
    auto manifest = prefix + "." + command + ".manifest.jsonl";
    write_manifest(manifest, command, cfg, outputs);
    out << table << outputs["report"] << "\n" << outputs["table"] << "\n" << manifest << "\n";
    err << "elapsed " << seconds << " s\n";

    auto violations = threshold_violations(suite, report);
    for (const auto& label : violations)
        err << "threshold violated: " << label << " below " << *suite.min_accuracy << "\n";
    return violations.empty() ? 0 : 1;
}

const std::set<std::string> kTopLevel = {"world", "annotate", "rewards", "export", "search", "bench", "ablate"};

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    if (args.empty() || (args[0] == "--help" || args[0] == "-h")) {
        (args.empty() ? err : out) << usage();
        return args.empty() ? 1 : 0;
    }
    if (!kTopLevel.count(args[0])) {
        err << "unknown command: " << args[0] << "\n\n" << usage();
        return 1;
    }

    CLI::App app{"information-seeking step reward pipeline", "isprm"};
    app.require_subcommand(1);
    std::map<std::string, FlagSet> flagsets;
    auto add = [&](CLI::App* parent, const std::string& name, const std::string& full, const std::string& help) {
        auto* sub = parent->add_subcommand(name, help);
        add_flags(sub, flagsets[full]);
        return sub;
    };
    auto* world = app.add_subcommand("world", "world commands");
    world->require_subcommand(1);
    auto* world_gen = add(world, "gen", "world gen", "generate worlds and task records");
    auto* annotate = add(&app, "annotate", "annotate", "chained Monte-Carlo pair annotation");
    auto* rewards = add(&app, "rewards", "rewards", "rewards for scorer generations");
    auto* exporter = add(&app, "export", "export", "SFT records (and rewards) for a trainer");
    auto* search = app.add_subcommand("search", "search commands");
    search->require_subcommand(1);
    auto* search_run = add(search, "run", "search run", "best-of-n guided search");
    auto* bench = add(&app, "bench", "bench", "Avg@k benchmark");
    auto* ablate = add(&app, "ablate", "ablate", "context-mode or n sweep");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << usage();
        return 1;
    }

    try {
        if (world_gen->parsed())
            return cmd_world_gen(resolve(flagsets["world gen"], "world gen"), out);
        if (annotate->parsed())
            return cmd_annotate(resolve(flagsets["annotate"], "annotate"), out);
        if (rewards->parsed())
            return cmd_rewards(resolve(flagsets["rewards"], "rewards"), out);
        if (exporter->parsed())
            return cmd_export(resolve(flagsets["export"], "export"), out);
        if (search_run->parsed())
            return cmd_search_run(resolve(flagsets["search run"], "search run"), out);
        if (bench->parsed())
            return cmd_bench(resolve(flagsets["bench"], "bench"), "bench", out, err);
        if (ablate->parsed())
            return cmd_bench(resolve(flagsets["ablate"], "ablate"), "ablate", out, err);
        err << usage();
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.code() == Errc::BackendUnavailable ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace isprm::cli
