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

#include "smcsde/smoother.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <sstream>
#include <thread>

#include "smcsde/errors.hpp"
#include "smcsde/kernels.hpp"

namespace smcsde {

namespace {

// lane1 layout: 8-bit role tag | 24-bit iteration index
constexpr std::uint32_t kLaneInit = 0x01u << 24;
constexpr std::uint32_t kLaneNoise = 0x02u << 24;
constexpr std::uint32_t kLaneAncestor = 0x03u << 24;
constexpr std::uint32_t kLaneRefAncestor = 0x04u << 24;
constexpr std::uint32_t kLaneSelect = 0x05u << 24;

std::uint32_t lane(std::uint32_t tag, std::uint32_t iter) {
    return tag | (iter & 0x00FFFFFFu);
}

Vec normalize_or_annotate(std::span<const double> lw, std::size_t step) {
    try {
        return normalize_log_weights(lw);
    } catch (const DegenerateWeightsError& e) {
        std::ostringstream msg;
        msg << e.what() << " (at grid step " << step << ")";
        throw DegenerateWeightsError(msg.str());
    }
}

void check_drift_finite(const Matrix& drift, const Matrix& states, double t) {
    for (std::size_t i = 0; i < drift.size(); ++i) {
        if (!std::isfinite(drift.data()[i])) {
            const std::size_t row = i / drift.cols();
            std::ostringstream msg;
            msg << "non-finite drift output at t=" << t << " for particle " << row
                << " state (";
            for (std::size_t j = 0; j < states.cols(); ++j) {
                msg << (j ? ", " : "") << states(row, j);
            }
            msg << ")";
            throw NumericalDivergence(msg.str());
        }
    }
}

void record_slot_moments(FilterDiagnostics& diag, std::size_t step,
                         const Matrix& states, const Vec& probs) {
    const std::size_t n = states.rows();
    const std::size_t d = states.cols();
    Vec mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        kern::active().axpy(probs[i], states.row(i), mean.data(), d);
    }
    Vec var(d, 0.0);
    double sumsq_p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sumsq_p += probs[i] * probs[i];
        for (std::size_t j = 0; j < d; ++j) {
            const double c = states(i, j) - mean[j];
            var[j] += probs[i] * c * c;
        }
    }
    diag.slot_mean[step] = std::move(mean);
    diag.slot_var[step] = std::move(var);
    diag.slot_ess[step] = sumsq_p > 0.0 ? 1.0 / sumsq_p : 0.0;
}

// Shared engine behind init_reference and cpfas_sweep. When `ref` is null this
// is the unconditioned bootstrap pass; otherwise the last particle is pinned
// to the reference and its ancestor is drawn from weight x transition density.
ReferenceTrajectory filter_sweep(const SdeModel& model, const ObservationSet& obs,
                                 const GridPtr& grid, const ReferenceTrajectory* ref,
                                 std::size_t n_particles, std::uint64_t seed,
                                 std::uint32_t iter, FilterDiagnostics* diag,
                                 bool* reference_replaced) {
    const std::size_t n = n_particles;
    const std::size_t d = model.dim;
    const std::size_t n_steps = grid->n_steps;
    if (ref != nullptr && ref->states.states.rows() != n_steps + 1) {
        throw ContractViolation("reference trajectory does not match the grid");
    }

    ParticleEnsemble ens(grid, n, d);

    {
        RngStream init_rng(seed, lane(kLaneInit, iter));
        model.init(ens.states_at(0), init_rng);
    }
    if (ref != nullptr) {
        std::memcpy(ens.states_at(0).row(n - 1), ref->states.states.row(0),
                    d * sizeof(double));
    }

    Vec& lw = ens.log_weights();
    if (auto slot_lw = weights_at(obs, 0, ens.states_at(0))) {
        lw = std::move(*slot_lw);
    } else {
        lw.assign(n, 0.0);
    }
    Vec probs = normalize_or_annotate(lw, 0);
    if (diag != nullptr && obs.has_slot(0)) {
        record_slot_moments(*diag, 0, ens.states_at(0), probs);
    }

    Matrix drift_prev(n, d);
    Matrix drift_new(n, d);
    Matrix means(n, d);
    Vec noise(d);
    Vec dist2(n);
    Vec anc_logits(n);

    for (std::size_t step = 1; step <= n_steps; ++step) {
        const double t_prev = grid->times[step - 1];
        const double dt = grid->deltas[step - 1];
        const Matrix& prev = ens.states_at(step - 1);
        Matrix& cur = ens.states_at(step);
        auto& anc = ens.ancestors_at(step - 1);

        model.drift(prev, t_prev, drift_prev);
        check_drift_finite(drift_prev, prev, t_prev);

        if (ref != nullptr) {
            // ancestor for the pinned particle: P(a = i) prop. to
            // w_i * N(z_step; x_i + f(x_i) dt, g^2 dt I)
            if (n == 1) {
                anc[n - 1] = 0;
            } else {
                const double g = model.g(t_prev);
                if (g == 0.0) {
                    throw DegenerateTransitionError(
                        "ancestor sampling needs g(t) > 0; g(" +
                        std::to_string(t_prev) + ") = 0");
                }
                const double inv_two_var = 1.0 / (2.0 * g * g * dt);
                std::memcpy(means.data(), prev.data(), n * d * sizeof(double));
                kern::active().axpy(dt, drift_prev.data(), means.data(), n * d);
                kern::active().sqdist_rows(means.data(), n, d,
                                           ref->states.states.row(step), dist2.data());
                for (std::size_t i = 0; i < n; ++i) {
                    anc_logits[i] = lw[i] - dist2[i] * inv_two_var;
                }
                const Vec anc_probs = normalize_or_annotate(anc_logits, step);
                RngStream ref_rng(seed, lane(kLaneRefAncestor, iter),
                                  static_cast<std::uint32_t>(step));
                anc[n - 1] = static_cast<std::uint32_t>(
                    categorical_index(anc_probs, ref_rng.next_uniform()));
            }
        }

        const std::size_t n_free = ref != nullptr ? n - 1 : n;
        {
            RngStream anc_rng(seed, lane(kLaneAncestor, iter),
                              static_cast<std::uint32_t>(step));
            for (std::size_t i = 0; i < n_free; ++i) {
                anc[i] = static_cast<std::uint32_t>(
                    categorical_index(probs, anc_rng.next_uniform()));
            }
        }

        const double s = model.g(t_prev) * std::sqrt(dt);
        for (std::size_t i = 0; i < n_free; ++i) {
            const std::size_t src = anc[i];
            RngStream noise_rng(seed, lane(kLaneNoise, iter),
                                static_cast<std::uint32_t>(step),
                                static_cast<std::uint32_t>(i));
            noise_rng.fill_gaussian(noise);
            kern::active().em_update(prev.row(src), drift_prev.row(src), noise.data(),
                                     dt, s, cur.row(i), d);
        }
        if (ref != nullptr) {
            std::memcpy(cur.row(n - 1), ref->states.states.row(step), d * sizeof(double));
        }

        // mean-change records for every lineage; the pinned particle's record
        // is recomputed from (ancestor state, reference state) since its
        // transition was not simulated this sweep
        model.drift(cur, t_prev, drift_new);
        Matrix& diffs = ens.diffs_at(step - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t src = anc[i];
            kern::active().mean_diff(prev.row(src), cur.row(i), drift_prev.row(src),
                                     drift_new.row(i), dt, diffs.row(i), d);
        }

        if (auto slot_lw = weights_at(obs, step, cur)) {
            lw = std::move(*slot_lw);
        } else {
            lw.assign(n, 0.0);
        }
        probs = normalize_or_annotate(lw, step);
        if (diag != nullptr && obs.has_slot(step)) {
            record_slot_moments(*diag, step, cur, probs);
        }
    }

    RngStream select_rng(seed, lane(kLaneSelect, iter));
    const std::size_t pick = categorical_index(probs, select_rng.next_uniform());
    if (reference_replaced != nullptr) {
        *reference_replaced = ref == nullptr || pick != n - 1;
    }
    return ens.extract_lineage(pick);
}

} // namespace

void ChainConfig::validate() const {
    if (n_particles < 1 || n_iterations < 1 || n_chains < 1) {
        throw ConfigError("chain config counts must be >= 1");
    }
    if (resolved_burn_in() >= n_iterations) {
        throw ConfigError("burn-in must be smaller than the iteration count");
    }
}

ParticleEnsemble::ParticleEnsemble(GridPtr grid, std::size_t n_particles,
                                   std::size_t dim)
    : grid_(std::move(grid)), n_(n_particles), dim_(dim) {
    const std::size_t n_steps = grid_->n_steps;
    states_.assign(n_steps + 1, Matrix(n_, dim_));
    diffs_.assign(n_steps, Matrix(n_, dim_));
    ancestors_.assign(n_steps, std::vector<std::uint32_t>(n_, 0));
    log_weights_.assign(n_, 0.0);
}

ReferenceTrajectory ParticleEnsemble::extract_lineage(std::size_t terminal_index) const {
    const std::size_t n_steps = grid_->n_steps;
    ReferenceTrajectory out;
    out.states.grid = grid_;
    out.states.states.resize(n_steps + 1, dim_);
    out.diffs.resize(n_steps, dim_);
    std::size_t idx = terminal_index;
    for (std::size_t step = n_steps; step >= 1; --step) {
        std::memcpy(out.states.states.row(step), states_[step].row(idx),
                    dim_ * sizeof(double));
        std::memcpy(out.diffs.row(step - 1), diffs_[step - 1].row(idx),
                    dim_ * sizeof(double));
        idx = ancestors_[step - 1][idx];
    }
    std::memcpy(out.states.states.row(0), states_[0].row(idx), dim_ * sizeof(double));
    return out;
}

Vec record_diff(const SdeModel& model, std::span<const double> x_j,
                std::span<const double> x_j1, double t, double dt) {
    if (!(dt > 0.0)) {
        throw ContractViolation("record_diff requires dt > 0");
    }
    const Vec f0 = model.drift_at(x_j, t);
    const Vec f1 = model.drift_at(x_j1, t);
    Vec out(model.dim);
    kern::active().mean_diff(x_j.data(), x_j1.data(), f0.data(), f1.data(), dt,
                             out.data(), model.dim);
    return out;
}

ReferenceTrajectory init_reference(const SdeModel& model, const ObservationSet& obs,
                                   const GridPtr& grid, const ChainConfig& cfg,
                                   FilterDiagnostics* diag) {
    return filter_sweep(model, obs, grid, nullptr, cfg.n_particles, cfg.seed, 0, diag,
                        nullptr);
}

ReferenceTrajectory cpfas_sweep(const SdeModel& model, const ObservationSet& obs,
                                const GridPtr& grid, const ReferenceTrajectory& ref,
                                const ChainConfig& cfg, std::uint32_t iter_index) {
    return filter_sweep(model, obs, grid, &ref, cfg.n_particles, cfg.seed, iter_index,
                        nullptr, nullptr);
}

std::vector<ReferenceTrajectory> run_chain(const SdeModel& model,
                                           const ObservationSet& obs,
                                           const GridPtr& grid, const ChainConfig& cfg,
                                           ChainStats* stats) {
    cfg.validate();
    const std::size_t burn = cfg.resolved_burn_in();
    std::vector<ReferenceTrajectory> kept;
    kept.reserve(cfg.n_iterations - burn);

    ReferenceTrajectory ref = filter_sweep(model, obs, grid, nullptr, cfg.n_particles,
                                           cfg.seed, 0, nullptr, nullptr);
    for (std::size_t m = 1; m <= cfg.n_iterations; ++m) {
        bool replaced = false;
        ref = filter_sweep(model, obs, grid, &ref, cfg.n_particles, cfg.seed,
                           static_cast<std::uint32_t>(m), nullptr, &replaced);
        if (stats != nullptr) {
            ++stats->sweeps;
            if (replaced) {
                ++stats->reference_changes;
            }
        }
        if (m > burn) {
            kept.push_back(ref);
        }
        if (cfg.progress_every != 0 && m % cfg.progress_every == 0) {
            std::fprintf(stderr, "[chain %u] iteration %zu/%zu\n", cfg.chain_label, m,
                         cfg.n_iterations);
        }
    }
    return kept;
}

std::vector<ReferenceTrajectory> run_chains_parallel(
    const SdeModel& model, const ObservationSet& obs, const GridPtr& grid,
    const ChainConfig& cfg, std::vector<ChainStats>* stats) {
    cfg.validate();
    const std::size_t n_chains = cfg.n_chains;
    std::vector<std::vector<ReferenceTrajectory>> results(n_chains);
    std::vector<ChainStats> chain_stats(n_chains);
    std::vector<std::exception_ptr> errors(n_chains);

    std::size_t workers = cfg.max_workers != 0
                              ? cfg.max_workers
                              : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    workers = std::min(workers, n_chains);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chains) {
                break;
            }
            try {
                ChainConfig local = cfg;
                local.n_chains = 1;
                local.seed = derive_seed(cfg.seed, c);
                local.chain_label = static_cast<std::uint32_t>(c);
                results[c] = run_chain(model, obs, grid, local, &chain_stats[c]);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };

    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    for (std::size_t c = 0; c < n_chains; ++c) {
        if (errors[c]) {
            try {
                std::rethrow_exception(errors[c]);
            } catch (const std::exception& e) {
                throw std::runtime_error("chain " + std::to_string(c) +
                                         " failed: " + e.what());
            }
        }
    }

    std::vector<ReferenceTrajectory> pooled;
    for (std::size_t c = 0; c < n_chains; ++c) {
        for (auto& ref : results[c]) {
            ref.chain_id = static_cast<std::uint32_t>(c);
            pooled.push_back(std::move(ref));
        }
    }
    if (stats != nullptr) {
        *stats = std::move(chain_stats);
    }
    return pooled;
}

} // namespace smcsde
