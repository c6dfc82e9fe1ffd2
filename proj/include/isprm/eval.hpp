// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isprm/search.hpp"

namespace isprm {

struct BenchmarkSuite {
    std::string suite_id;
    std::vector<TaskInstance> tasks;
    /// k in Avg@k
    int runs_per_task = 3;
    /// CI hook: the run fails when any row's Avg@k falls below this.
    std::optional<double> min_accuracy;

    void validate() const;
};

struct EpisodeOutcome {
    std::string task_id;
    int run = 0;
    bool answered = false;
    bool correct = false;
    /// Scorer fallback or backend failure; backend failures also count as incorrect.
    bool flagged = false;
    int steps_used = 0;
    std::string error;

    bool operator==(const EpisodeOutcome&) const = default;
};

struct ReportRow {
    std::string label;
    /// Fraction of tasks judged correct, per run.
    std::vector<double> run_accuracy;
    double avg = 0.0;
    std::vector<EpisodeOutcome> episodes;

    bool operator==(const ReportRow&) const = default;
};

struct Report {
    std::string suite_id;
    int runs_per_task = 1;
    std::vector<ReportRow> rows;

    bool operator==(const Report&) const = default;
};

/// Run r of every task uses seed derive_seed(config.seed, r); rows built from
/// the same config therefore share seeds and task order.
ReportRow run_suite_row(const BenchmarkSuite& suite, const SearchEnv& env, const SearchConfig& config,
                        std::string label, int workers, std::vector<EpisodeResult>* episodes = nullptr);

/// Avg@k over k seeded runs per task. Throws EmptySuite.
Report run_benchmark(const BenchmarkSuite& suite, const SearchEnv& env, const SearchConfig& config, int workers = 1);

/// One row per context mode; everything else (seeds, tasks, n) held fixed.
Report ablate_context_modes(const BenchmarkSuite& suite, const SearchEnv& env, const SearchConfig& config,
                            std::span<const ContextMode> modes, int workers = 1);

/// One row per candidate count n.
Report sweep_n(const BenchmarkSuite& suite, const SearchEnv& env, const SearchConfig& config,
               std::span<const int> n_values, int workers = 1);

std::vector<ContextMode> default_ablation_modes();
std::vector<int> default_n_values();

/// Mean over runs of the per-run accuracy, recomputed from raw outcomes.
double recompute_avg(const ReportRow& row, int runs_per_task);

/// Rows whose avg falls below the suite threshold.
std::vector<std::string> threshold_violations(const BenchmarkSuite& suite, const Report& report);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Normal-approximation interval for p_b - p_a from two binomial samples.
Interval binomial_delta_interval(double p_a, int n_a, double p_b, int n_b, double z = 1.96);

/// Plain-text table: one line per row with Avg@k and per-run accuracies.
std::string render_table(const Report& report);

nlohmann::json to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

} // namespace isprm
