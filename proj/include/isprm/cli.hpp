// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "isprm/chat_client.hpp"

namespace isprm::cli {

/// Everything a subcommand reads. Each field has a flag of the same name
/// (underscores become dashes) and a key of the same name in a config file.
/// Precedence: built-in defaults < --config file < flags.
struct RunConfig {
    std::uint64_t seed = 0;
    int M = 8;
    int N = 4;
    int n = 4;
    int L = 2000;

    // world gen
    int hops = 2;
    int branching = 2;
    int entities = 12;
    int noise = 4;
    int count = 1;

    std::string worlds;
    std::string tasks;
    std::string pairs;
    std::string generations;
    std::string trajectories;
    std::string suite;
    /// Output prefix; every subcommand derives its file names from it.
    std::string out;

    /// 0 = the world's default budget
    int max_steps = 0;
    /// 0 = no cap beyond the step budget
    int max_pairs = 0;
    std::string context_mode = "summary";
    /// oracle | relevance | confidence | verbal | remote-prm
    std::string scorer = "oracle";
    /// world | remote
    std::string policy = "world";
    /// extractive | remote
    std::string summarizer = "extractive";
    double p_guess = 0.05;
    double p_repeat = 0.1;
    int workers = 1;
    bool with_advantage = false;

    // ablate
    /// context | n
    std::string vary = "context";
    std::vector<std::string> modes = {"last1", "last2", "last4", "full", "summary"};
    std::vector<int> n_values = {1, 2, 4, 8, 16};

    BackendConfig backend;

    void validate() const;
    bool operator==(const RunConfig&) const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
RunConfig overlay(RunConfig base, const nlohmann::json& j);

/// Reads a plain JSON config document or the `config` member of a manifest
/// file. When `command` is non-empty a manifest for a different command is rejected.
nlohmann::json load_config_document(const std::string& path, const std::string& command = "");

std::string usage();

/// Runs one subcommand. args excludes the program name.
/// Exit codes: 0 success, 1 validation error / unknown command / violated
/// suite threshold, 2 backend unavailable after retries.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace isprm::cli
