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
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "smcsde/grid.hpp"
#include "smcsde/matrix.hpp"
#include "smcsde/rng.hpp"
#include "smcsde/schedule.hpp"

namespace smcsde {

using GridPtr = std::shared_ptr<const TimeGrid>;

// Drift evaluated for a whole particle batch at one time point. `states` is
// n x dim, `out` must be preallocated to the same shape.
using BatchDriftFn = std::function<void(const Matrix& states, double t, Matrix& out)>;

// Pointwise drift; lifted to a batch via pointwise_drift().
using DriftFn =
    std::function<void(std::span<const double> x, double t, std::span<double> out)>;

// Fills every row of `out` with an independent draw from the initial
// distribution using the supplied stream.
using InitSampler = std::function<void(Matrix& out, RngStream& rng)>;

BatchDriftFn pointwise_drift(DriftFn f);
BatchDriftFn zero_drift();
InitSampler point_mass_init(Vec point);
InitSampler gaussian_init(Vec mean, double stddev);

struct SdeModel {
    std::size_t dim = 1;
    BatchDriftFn drift;
    DiffusionSchedule g;
    InitSampler init;

    // Single-point drift evaluation (allocates; batch calls are the hot path).
    Vec drift_at(std::span<const double> x, double t) const;
};

struct Trajectory {
    GridPtr grid;
    Matrix states; // (n_steps + 1) x dim

    std::size_t dim() const { return states.cols(); }
};

// One explicit Euler-Maruyama step from x at time t over dt:
// x + f(x,t) dt + g(t) sqrt(dt) noise, with noise ~ N(0, I) supplied by the
// caller. Throws NumericalDivergence if the drift output is non-finite.
Vec em_step(const SdeModel& model, std::span<const double> x, double t, double dt,
            std::span<const double> noise);

// Log density of the Euler-Maruyama transition
// N(x_next; x_prev + f(x_prev, t) dt, g(t)^2 dt I). Throws
// DegenerateTransitionError when g(t) == 0.
double transition_logpdf(const SdeModel& model, std::span<const double> x_prev,
                         std::span<const double> x_next, double t, double dt);

// Simulates n_paths trajectories on the grid. Noise streams are keyed by
// (seed, path, step), so results do not depend on evaluation order.
std::vector<Trajectory> simulate(const SdeModel& model, const GridPtr& grid,
                                 std::size_t n_paths, std::uint64_t seed);

namespace rng_lane {
// lane1 tags keeping the independent philox streams of one seed apart
inline constexpr std::uint32_t kSimInit = 0x10000000u;
inline constexpr std::uint32_t kSimNoise = 0x20000000u;
} // namespace rng_lane

} // namespace smcsde
