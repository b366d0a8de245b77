/*
 * Copyright 2026 the smcsde authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smcsde/datasets.hpp"
#include "smcsde/smoother.hpp"

namespace smcsde {

// Parsed experiment configuration. Unknown experiments and malformed stage
// lists fail at parse time; per-experiment parameter defaults follow the
// standard protocols and can be overridden key by key.
struct RunConfig {
    std::string experiment;
    std::filesystem::path out_dir;
    std::vector<std::string> stages;
    std::uint64_t seed = 0;
    nlohmann::json raw; // full document with defaults merged in

    static RunConfig from_file(const std::filesystem::path& path);
    static RunConfig from_json(nlohmann::json doc);

    // Hash over every semantically meaningful field (out_dir excluded).
    std::string config_hash() const;

    ChainConfig chain_config() const;
    nlohmann::json training() const { return raw.at("training"); }
    nlohmann::json sampling() const { return raw.at("sampling"); }
    nlohmann::json eval_opts() const { return raw.at("eval"); }
};

// Builds the experiment's dataset from the merged config (seed-deterministic).
Dataset build_dataset(const RunConfig& cfg);

// Executes the configured stages in order under cfg.out_dir, writing a run
// manifest. Returns a process exit code (0 ok, 1 runtime failure, 2 bad
// config / missing dependency).
int run_pipeline(const RunConfig& cfg, std::ostream& log);

// Metrics over an existing run directory: EMD per marginal-constraint time
// and/or mean-trajectory MSE, against "observations", "truth", or "terminal".
int eval_run(const std::filesystem::path& run_dir, const std::string& against,
             std::ostream& log);

// `gen` subcommand: writes observations/truth/spec.json for an experiment.
int generate_only(const std::string& experiment, std::uint64_t seed,
                  const std::filesystem::path& out_dir, std::ostream& log);

// Default output root: SMCSDE_OUT environment variable or "runs".
std::filesystem::path default_output_root();

std::uint64_t fnv1a64_file(const std::filesystem::path& path);

} // namespace smcsde
