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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smcsde/observations.hpp"
#include "smcsde/sde.hpp"

namespace smcsde {

// A ready-to-smooth problem: the dynamics, the grid, the observations, and
// (for synthetic single-track setups) the dense ground truth.
struct Dataset {
    SdeModel model;
    GridPtr grid;
    ObservationSet obs;
    std::optional<Trajectory> truth;
    nlohmann::json manifest; // every generator parameter, echoed
};

// Scalar bistable system with wells at +-1; observations are noisy readings
// of one simulated path at evenly spaced times.
struct DoubleWellParams {
    double t_end = 40.0;
    double dt = 0.01;
    double g = 1.0;
    double sigma_obs = 0.3;
    double init_x = -1.0;
    std::size_t n_obs = 50;
};
Dataset gen_double_well(const DoubleWellParams& p, std::uint64_t seed);

BatchDriftFn double_well_drift();

// Transport problem: Gaussian start, ten points on a circle observed halfway,
// two concentric circles as the terminal constraint, and a noise schedule
// that is flat then decays linearly.
struct TwoCirclesParams {
    double t_end = 3.0;
    double dt = 0.01;
    std::size_t n_terminal = 500;
    double outer_radius = 10.0;
    double radius_factor = 0.5;
    double jitter = 0.05;
    std::size_t mid_points = 10;
    double mid_radius = -1.0; // <0: mean of the two terminal radii
    double sigma_mid = 0.5;
    double terminal_sigma_scale = 0.01;
    std::size_t h_mid = 3;
    std::size_t h_terminal = 5;
    double g_high = 5.0;
    double g_end = 0.01;
};
Dataset gen_two_circles(const TwoCirclesParams& p, std::uint64_t seed);

// Smooth synthetic 2D track observed densely, then thinned to every k-th
// point; the dense track is returned for interpolation scoring.
struct VehicleParams {
    double dt = 0.01;
    std::size_t dense_points = 1000;
    std::size_t thin_every = 50;
    double g = 0.1;
    double sigma_obs = 0.1;
    double track_noise = 0.01;
};
Dataset gen_vehicle_synthetic(const VehicleParams& p, std::uint64_t seed);

// Marginal-distribution observations read from CSV files (header
// t,y0,...,y{d-1} or plain point rows y0,...), one KNN slot per file at the
// given time; the slot at the final grid time is flagged terminal.
struct MarginalParams {
    double t_end = 4.0;
    double dt = 0.01;
    double g = 1.0;
    double sigma_obs = 0.3;
    std::size_t h_nearest = 5;
};
Dataset load_marginals_csv(const std::vector<std::filesystem::path>& paths,
                           const std::vector<double>& times,
                           const MarginalParams& p);

// Synthetic stand-in marginals (drifting, spreading Gaussian clouds) written
// as one CSV per time slot; returns the file paths.
std::vector<std::filesystem::path> write_synthetic_marginals(
    const std::filesystem::path& dir, const MarginalParams& p,
    std::size_t points_per_slot, std::size_t n_slots, std::uint64_t seed);

// Maps a timestamp to the nearest grid index; errors when farther than half a
// step from every grid time.
std::size_t snap_to_grid(const TimeGrid& grid, double t);

} // namespace smcsde
