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
#include <optional>
#include <vector>

#include "smcsde/matrix.hpp"
#include "smcsde/observations.hpp"
#include "smcsde/sde.hpp"

namespace smcsde {

// Empirical distribution: n points with optional weights (uniform when
// absent; weights must be nonnegative and sum to 1 within 1e-9).
struct SampleSet {
    Matrix points; // n x d
    std::optional<Vec> weights;

    static SampleSet uniform(Matrix points);
    static SampleSet weighted(Matrix points, Vec weights);

    std::size_t size() const { return points.rows(); }
    std::size_t dim() const { return points.cols(); }
};

// Exact 1-Wasserstein distance under Euclidean ground cost, solved as a
// transportation linear program: an assignment solve for equal-size uniform
// sets, successive shortest paths otherwise.
double emd(const SampleSet& a, const SampleSet& b);

struct EmdResult {
    double value = 0.0;
    bool subsampled = false;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

// emd() after uniform subsampling of any set larger than `cap`, with a seeded
// RNG so reports are reproducible.
EmdResult emd_capped(const SampleSet& a, const SampleSet& b, std::size_t cap,
                     std::uint64_t seed);

// Pointwise arithmetic mean across a pool of trajectories on a shared grid.
Trajectory mean_trajectory(const std::vector<Trajectory>& pool);

// Mean over every (slot, point) pair of the squared distance between the
// trajectory value at the slot time and the observed point.
double trajectory_mse(const Trajectory& mean, const ObservationSet& obs);

// Mean over all shared grid times of the squared distance between two
// trajectories.
double trajectory_mse_paths(const Trajectory& a, const Trajectory& b);

// Minimum-cost assignment of a square cost matrix (Jonker-Volgenant style
// shortest augmenting paths). Exposed for the metrics tests.
double solve_assignment(const Matrix& cost);

// Exact transportation optimum for supplies a (size n_a) and demands b
// (size n_b), both summing to the same mass, with cost(i, j) >= 0.
double solve_transport(const Matrix& cost, const Vec& supply, const Vec& demand);

} // namespace smcsde
