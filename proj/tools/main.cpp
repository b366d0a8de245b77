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

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "smcsde/errors.hpp"
#include "smcsde/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Particle smoothing with terminal constraints and neural drift "
                 "distillation"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "execute the stages of a config file");
    run->add_option("config", config_path, "JSON run configuration")->required();

    std::string experiment;
    std::uint64_t seed = 0;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "generate a dataset only");
    gen->add_option("experiment", experiment,
                    "double_well | two_circles | vehicle_synthetic | marginal_transport")
        ->required();
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory (default: SMCSDE_OUT root)");

    std::string run_dir;
    std::string against = "observations";
    auto* eval = app.add_subcommand("eval", "evaluate an existing run directory");
    eval->add_option("run_dir", run_dir, "directory produced by `run`")->required();
    eval->add_option("--against", against, "observations | truth | terminal");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto cfg = smcsde::RunConfig::from_file(config_path);
            return smcsde::run_pipeline(cfg, std::cout);
        }
        if (gen->parsed()) {
            return smcsde::generate_only(experiment, seed, gen_out, std::cout);
        }
        if (eval->parsed()) {
            return smcsde::eval_run(run_dir, against, std::cout);
        }
    } catch (const smcsde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
