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
#include <map>
#include <vector>

#include "smcsde/matrix.hpp"
#include "smcsde/observations.hpp"
#include "smcsde/sde.hpp"

namespace smcsde {

struct ChainConfig {
    std::size_t n_particles = 100;   // N
    std::size_t n_iterations = 1000; // M conditional sweeps after the init pass
    // Iterations discarded before references are kept. kBurnInDefault selects
    // n_iterations / 2.
    std::size_t burn_in = kBurnInDefault;
    std::size_t n_chains = 1;
    std::uint64_t seed = 0;
    std::size_t max_workers = 0; // 0: hardware concurrency
    // Iteration counter printed to stderr every this many sweeps; 0 = silent.
    std::size_t progress_every = 0;
    std::uint32_t chain_label = 0;

    static constexpr std::size_t kBurnInDefault = static_cast<std::size_t>(-1);

    std::size_t resolved_burn_in() const {
        return burn_in == kBurnInDefault ? n_iterations / 2 : burn_in;
    }
    void validate() const;
};

// One retained smoothing trajectory plus the mean-change record of the same
// lineage: diffs.row(j) covers the transition from times[j] to times[j+1].
struct ReferenceTrajectory {
    Trajectory states;
    Matrix diffs; // n_steps x dim
    std::uint32_t chain_id = 0;
};

// Particle system of one filtering sweep. States, mean-change records and
// ancestor indices are kept per step; a lineage is reconstructed by walking
// ancestors backwards, which reproduces exactly the "copy the ancestor's
// history" semantics without quadratic copying.
class ParticleEnsemble {
public:
    ParticleEnsemble(GridPtr grid, std::size_t n_particles, std::size_t dim);

    std::size_t n_particles() const { return n_; }
    std::size_t dim() const { return dim_; }
    const GridPtr& grid() const { return grid_; }

    Matrix& states_at(std::size_t step) { return states_[step]; }
    const Matrix& states_at(std::size_t step) const { return states_[step]; }
    Matrix& diffs_at(std::size_t step) { return diffs_[step]; }
    const Matrix& diffs_at(std::size_t step) const { return diffs_[step]; }
    std::vector<std::uint32_t>& ancestors_at(std::size_t step) { return ancestors_[step]; }
    const std::vector<std::uint32_t>& ancestors_at(std::size_t step) const {
        return ancestors_[step];
    }

    Vec& log_weights() { return log_weights_; }
    const Vec& log_weights() const { return log_weights_; }

    // Path and diff history of the lineage ending at `terminal_index`.
    ReferenceTrajectory extract_lineage(std::size_t terminal_index) const;

private:
    GridPtr grid_;
    std::size_t n_ = 0;
    std::size_t dim_ = 0;
    std::vector<Matrix> states_;                       // n_steps + 1 entries, N x d
    std::vector<Matrix> diffs_;                        // n_steps entries, N x d
    std::vector<std::vector<std::uint32_t>> ancestors_; // n_steps entries, N
    Vec log_weights_;
};

// Weighted particle moments recorded at observation slots; used to compare
// the bootstrap filter against closed-form baselines.
struct FilterDiagnostics {
    std::map<std::size_t, Vec> slot_mean;
    std::map<std::size_t, Vec> slot_var;
    std::map<std::size_t, double> slot_ess;
};

struct ChainStats {
    std::size_t sweeps = 0;
    std::size_t reference_changes = 0; // sweeps whose terminal pick was not the retained particle
    double reference_change_rate() const {
        return sweeps == 0 ? 0.0 : static_cast<double>(reference_changes) /
                                       static_cast<double>(sweeps);
    }
};

// Mean-change record of one transition: (x_j1 - x_j) + dt * (f(x_j1, t) - f(x_j, t)),
// both drift evaluations at the transition's left endpoint time t.
Vec record_diff(const SdeModel& model, std::span<const double> x_j,
                std::span<const double> x_j1, double t, double dt);

// Bootstrap particle filter with per-step ancestral resampling; returns one
// trajectory sampled from the terminal weights together with its mean-change
// history. Seeds every draw from (seed, iteration 0).
ReferenceTrajectory init_reference(const SdeModel& model, const ObservationSet& obs,
                                   const GridPtr& grid, const ChainConfig& cfg,
                                   FilterDiagnostics* diag = nullptr);

// One conditional sweep holding `ref` fixed as the N-th particle, with
// ancestor sampling for the reference lineage. iter_index keys the RNG so
// repeated sweeps of one chain stay independent.
ReferenceTrajectory cpfas_sweep(const SdeModel& model, const ObservationSet& obs,
                                const GridPtr& grid, const ReferenceTrajectory& ref,
                                const ChainConfig& cfg, std::uint32_t iter_index = 1);

// init_reference followed by n_iterations conditional sweeps; returns the
// references from iterations after burn-in, in order.
std::vector<ReferenceTrajectory> run_chain(const SdeModel& model,
                                           const ObservationSet& obs,
                                           const GridPtr& grid, const ChainConfig& cfg,
                                           ChainStats* stats = nullptr);

// Runs cfg.n_chains chains with seeds derived from (cfg.seed, chain index)
// and concatenates their kept references in chain order. The result is
// identical regardless of how chains are scheduled. The model's drift must be
// safe to call from several threads.
std::vector<ReferenceTrajectory> run_chains_parallel(
    const SdeModel& model, const ObservationSet& obs, const GridPtr& grid,
    const ChainConfig& cfg, std::vector<ChainStats>* stats = nullptr);

} // namespace smcsde
