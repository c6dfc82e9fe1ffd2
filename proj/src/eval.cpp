// SPDX-License-Identifier: Apache-2.0
#include "isprm/eval.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "isprm/error.hpp"
#include "isprm/hashing.hpp"
#include "isprm/parallel.hpp"
#include "isprm/records.hpp"

namespace isprm {

using nlohmann::json;

void BenchmarkSuite::validate() const
{
    if (tasks.empty())
        throw Error(Errc::EmptySuite, "suite " + suite_id + " has no tasks");
    if (runs_per_task < 1)
        throw Error(Errc::InvalidArgument, "runs_per_task must be >= 1");
    std::set<std::string> ids;
    for (const auto& t : tasks)
        if (!ids.insert(t.task_id).second)
            throw Error(Errc::InvalidArgument, "duplicate task id " + t.task_id);
}

ReportRow run_suite_row(const BenchmarkSuite& suite, const SearchEnv& env, const SearchConfig& config,
                        std::string label, int workers, std::vector<EpisodeResult>* episodes)
{
    suite.validate();
    const auto tasks = suite.tasks.size();
    const auto runs = static_cast<std::size_t>(suite.runs_per_task);
    std::vector<EpisodeOutcome> outcomes(tasks * runs);
    std::vector<EpisodeResult> results(episodes ? tasks * runs : 0);

    parallel_for(tasks * runs, workers, [&](std::size_t slot) {
        auto run = slot / tasks;
        const auto& task = suite.tasks[slot % tasks];
        auto cfg = config;
        cfg.seed = derive_seed(config.seed, run);
        EpisodeOutcome o{task.task_id, static_cast<int>(run)};
        try {
            auto r = run_episode(env, task, cfg);
            o.answered = r.answered;
            o.correct = r.correct;
            o.flagged = r.flagged;
            o.steps_used = r.steps_used;
            if (episodes)
                results[slot] = std::move(r);
        } catch (const Error& e) {
            if (e.code() != Errc::BackendUnavailable && e.code() != Errc::ParseFailure)
                throw;
            o.flagged = true;
            o.error = e.what();
        }
        outcomes[slot] = std::move(o);
    });

    ReportRow row;
    row.label = std::move(label);
    row.episodes = std::move(outcomes);
    row.avg = recompute_avg(row, suite.runs_per_task);
    row.run_accuracy.assign(runs, 0.0);
    for (const auto& o : row.episodes)
        row.run_accuracy[static_cast<std::size_t>(o.run)] += o.correct ? 1.0 / static_cast<double>(tasks) : 0.0;
    if (episodes)
        *episodes = std::move(results);
    return row;
}

double recompute_avg(const ReportRow& row, int runs_per_task)
{
    if (runs_per_task < 1)
        return 0.0;
    std::vector<double> correct(static_cast<std::size_t>(runs_per_task), 0.0);
    std::vector<double> total(static_cast<std::size_t>(runs_per_task), 0.0);
    for (const auto& o : row.episodes) {
        auto r = static_cast<std::size_t>(o.run);
        if (r >= correct.size())
            continue;
        total[r] += 1.0;
        correct[r] += o.correct ? 1.0 : 0.0;
    }
    double sum = 0.0;
    for (std::size_t r = 0; r < correct.size(); ++r)
        sum += total[r] > 0 ? correct[r] / total[r] : 0.0;
    return sum / static_cast<double>(runs_per_task);
}

namespace {

template <typename Fn>
Report assemble(const BenchmarkSuite& suite, Fn&& fill)
{
    suite.validate();
    Report report;
    report.suite_id = suite.suite_id;
    report.runs_per_task = suite.runs_per_task;
    fill(report);
    return report;
}

} // namespace

Report run_benchmark(const BenchmarkSuite& suite, const SearchEnv& env, const SearchConfig& config, int workers)
{
    return assemble(suite, [&](Report& r) {
        r.rows.push_back(run_suite_row(suite, env, config,
                                       "n=" + std::to_string(config.n) + " ctx=" + config.context_mode.name(), workers));
    });
}

Report ablate_context_modes(const BenchmarkSuite& suite, const SearchEnv& env, const SearchConfig& config,
                            std::span<const ContextMode> modes, int workers)
{
    return assemble(suite, [&](Report& r) {
        for (const auto& mode : modes) {
            auto cfg = config;
            cfg.context_mode = mode;
            r.rows.push_back(run_suite_row(suite, env, cfg, "ctx=" + mode.name(), workers));
        }
    });
}

Report sweep_n(const BenchmarkSuite& suite, const SearchEnv& env, const SearchConfig& config,
               std::span<const int> n_values, int workers)
{
    return assemble(suite, [&](Report& r) {
        for (int n : n_values) {
            auto cfg = config;
            cfg.n = n;
            r.rows.push_back(run_suite_row(suite, env, cfg, "n=" + std::to_string(n), workers));
        }
    });
}

std::vector<ContextMode> default_ablation_modes()
{
    return {ContextMode::last(1), ContextMode::last(2), ContextMode::last(4), ContextMode::full(),
            ContextMode::summary()};
}

std::vector<int> default_n_values()
{
    return {1, 2, 4, 8, 16};
}

std::vector<std::string> threshold_violations(const BenchmarkSuite& suite, const Report& report)
{
    std::vector<std::string> out;
    if (!suite.min_accuracy)
        return out;
    for (const auto& row : report.rows)
        if (row.avg < *suite.min_accuracy)
            out.push_back(row.label);
    return out;
}

Interval binomial_delta_interval(double p_a, int n_a, double p_b, int n_b, double z)
{
    double var = p_a * (1 - p_a) / static_cast<double>(n_a) + p_b * (1 - p_b) / static_cast<double>(n_b);
    double half = z * std::sqrt(var);
    double delta = p_b - p_a;
    return {delta - half, delta + half};
}

std::string render_table(const Report& report)
{
    std::ostringstream out;
    out << "suite " << report.suite_id << "  (Avg@" << report.runs_per_task << ")\n";
    std::size_t width = 12;
    for (const auto& row : report.rows)
        width = std::max(width, row.label.size() + 2);
    std::string avg_head = "Avg@" + std::to_string(report.runs_per_task);
    out << std::left << std::setw(static_cast<int>(width)) << "config" << "| " << std::setw(7) << avg_head;
    for (int r = 0; r < report.runs_per_task; ++r)
        out << "| " << std::setw(6) << ("run" + std::to_string(r + 1));
    out << "\n" << std::string(width, '-');
    for (int r = 0; r <= report.runs_per_task; ++r)
        out << "+" << std::string(r == 0 ? 8 : 7, '-');
    out << "\n" << std::fixed << std::setprecision(3);
    for (const auto& row : report.rows) {
        out << std::left << std::setw(static_cast<int>(width)) << row.label << "| " << std::setw(7) << row.avg;
        for (double acc : row.run_accuracy)
            out << "| " << std::setw(6) << acc;
        out << "\n";
    }
    return out.str();
}

json to_json(const Report& report)
{
    json rows = json::array();
    for (const auto& row : report.rows) {
        json eps = json::array();
        for (const auto& e : row.episodes)
            eps.push_back({{"task_id", e.task_id},
                           {"run", e.run},
                           {"answered", e.answered},
                           {"correct", e.correct},
                           {"flagged", e.flagged},
                           {"steps_used", e.steps_used},
                           {"error", e.error}});
        rows.push_back({{"label", row.label}, {"run_accuracy", row.run_accuracy}, {"avg", row.avg}, {"episodes", eps}});
    }
    return json{{"suite_id", report.suite_id},
                {"runs_per_task", report.runs_per_task},
                {"rows", std::move(rows)}};
}

Report report_from_json(const json& j)
{
    Report report;
    report.suite_id = records::require_string(j, "suite_id", "");
    report.runs_per_task = static_cast<int>(records::require_integer(j, "runs_per_task", ""));
    const auto& rows = records::require(j, "rows", "");
    if (!rows.is_array())
        throw SchemaViolation("rows", "expected array");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::string path = "rows[" + std::to_string(i) + "]";
        ReportRow row;
        row.label = records::require_string(rows[i], "label", path);
        row.avg = records::require_number(rows[i], "avg", path);
        try {
            row.run_accuracy = records::require(rows[i], "run_accuracy", path).get<std::vector<double>>();
        } catch (const json::type_error& e) {
            throw SchemaViolation(path + ".run_accuracy", e.what());
        }
        const auto& eps = records::require(rows[i], "episodes", path);
        if (!eps.is_array())
            throw SchemaViolation(path + ".episodes", "expected array");
        for (std::size_t k = 0; k < eps.size(); ++k) {
            std::string ep = path + ".episodes[" + std::to_string(k) + "]";
            EpisodeOutcome o;
            o.task_id = records::require_string(eps[k], "task_id", ep);
            o.run = static_cast<int>(records::require_integer(eps[k], "run", ep));
            o.answered = records::require_bool(eps[k], "answered", ep);
            o.correct = records::require_bool(eps[k], "correct", ep);
            o.flagged = records::require_bool(eps[k], "flagged", ep);
            o.steps_used = static_cast<int>(records::require_integer(eps[k], "steps_used", ep));
            o.error = records::require_string(eps[k], "error", ep);
            row.episodes.push_back(std::move(o));
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace isprm
