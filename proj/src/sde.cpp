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

#include "smcsde/sde.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "smcsde/errors.hpp"
#include "smcsde/kernels.hpp"

namespace smcsde {

namespace {

bool all_finite(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i])) {
            return false;
        }
    }
    return true;
}

[[noreturn]] void throw_divergence(double t, std::span<const double> x) {
    std::ostringstream msg;
    msg << "non-finite drift output at t=" << t << " for state (";
    for (std::size_t i = 0; i < x.size(); ++i) {
        msg << (i ? ", " : "") << x[i];
    }
    msg << ")";
    throw NumericalDivergence(msg.str());
}

} // namespace

BatchDriftFn pointwise_drift(DriftFn f) {
    return [f = std::move(f)](const Matrix& states, double t, Matrix& out) {
        for (std::size_t i = 0; i < states.rows(); ++i) {
            f(states.row_span(i), t, out.row_span(i));
        }
    };
}

BatchDriftFn zero_drift() {
    return [](const Matrix&, double, Matrix& out) { out.fill(0.0); };
}

InitSampler point_mass_init(Vec point) {
    return [point = std::move(point)](Matrix& out, RngStream&) {
        for (std::size_t i = 0; i < out.rows(); ++i) {
            for (std::size_t j = 0; j < out.cols(); ++j) {
                out(i, j) = point[j];
            }
        }
    };
}

InitSampler gaussian_init(Vec mean, double stddev) {
    return [mean = std::move(mean), stddev](Matrix& out, RngStream& rng) {
        for (std::size_t i = 0; i < out.rows(); ++i) {
            for (std::size_t j = 0; j < out.cols(); ++j) {
                out(i, j) = mean[j] + stddev * rng.next_gaussian();
            }
        }
    };
}

Vec SdeModel::drift_at(std::span<const double> x, double t) const {
    Matrix in(1, dim);
    Matrix out(1, dim);
    for (std::size_t j = 0; j < dim; ++j) {
        in(0, j) = x[j];
    }
    drift(in, t, out);
    return Vec(out.row(0), out.row(0) + dim);
}

Vec em_step(const SdeModel& model, std::span<const double> x, double t, double dt,
            std::span<const double> noise) {
    if (!(dt > 0.0)) {
        throw ContractViolation("em_step requires dt > 0");
    }
    if (x.size() != model.dim || noise.size() != model.dim) {
        throw ContractViolation("em_step dimension mismatch");
    }
    const Vec f = model.drift_at(x, t);
    if (!all_finite(f.data(), f.size())) {
        throw_divergence(t, x);
    }
    Vec y(model.dim);
    const double s = model.g(t) * std::sqrt(dt);
    kern::active().em_update(x.data(), f.data(), noise.data(), dt, s, y.data(),
                             model.dim);
    return y;
}

double transition_logpdf(const SdeModel& model, std::span<const double> x_prev,
                         std::span<const double> x_next, double t, double dt) {
    if (!(dt > 0.0)) {
        throw ContractViolation("transition_logpdf requires dt > 0");
    }
    const double g = model.g(t);
    if (g == 0.0) {
        throw DegenerateTransitionError(
            "transition density is degenerate: g(t) = 0 at t=" + std::to_string(t));
    }
    const Vec f = model.drift_at(x_prev, t);
    const double var = g * g * dt;
    double dist2 = 0.0;
    for (std::size_t j = 0; j < model.dim; ++j) {
        const double diff = x_next[j] - (x_prev[j] + dt * f[j]);
        dist2 += diff * diff;
    }
    const double d = static_cast<double>(model.dim);
    return -0.5 * d * std::log(2.0 * std::numbers::pi * var) - 0.5 * dist2 / var;
}

std::vector<Trajectory> simulate(const SdeModel& model, const GridPtr& grid,
                                 std::size_t n_paths, std::uint64_t seed) {
    if (n_paths == 0) {
        throw ContractViolation("simulate requires n_paths >= 1");
    }
    const std::size_t d = model.dim;
    const std::size_t n_steps = grid->n_steps;

    std::vector<Trajectory> paths(n_paths);
    for (auto& p : paths) {
        p.grid = grid;
        p.states.resize(n_steps + 1, d);
    }

    Matrix states(n_paths, d);
    {
        RngStream init_rng(seed, rng_lane::kSimInit);
        model.init(states, init_rng);
    }
    for (std::size_t p = 0; p < n_paths; ++p) {
        for (std::size_t j = 0; j < d; ++j) {
            paths[p].states(0, j) = states(p, j);
        }
    }

    Matrix drift(n_paths, d);
    Vec noise(d);
    for (std::size_t step = 1; step <= n_steps; ++step) {
        const double t_prev = grid->times[step - 1];
        const double dt = grid->deltas[step - 1];
        model.drift(states, t_prev, drift);
        if (!all_finite(drift.data(), drift.size())) {
            for (std::size_t p = 0; p < n_paths; ++p) {
                if (!all_finite(drift.row(p), d)) {
                    throw_divergence(t_prev, states.row_span(p));
                }
            }
        }
        const double s = model.g(t_prev) * std::sqrt(dt);
        for (std::size_t p = 0; p < n_paths; ++p) {
            RngStream rng(seed, rng_lane::kSimNoise, static_cast<std::uint32_t>(p),
                          static_cast<std::uint32_t>(step));
            rng.fill_gaussian(noise);
            kern::active().em_update(states.row(p), drift.row(p), noise.data(), dt, s,
                                     states.row(p), d);
            for (std::size_t j = 0; j < d; ++j) {
                paths[p].states(step, j) = states(p, j);
            }
        }
    }
    return paths;
}

} // namespace smcsde
