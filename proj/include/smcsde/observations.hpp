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

#include <cstddef>
#include <map>
#include <optional>
#include <span>

#include "smcsde/matrix.hpp"

namespace smcsde {

enum class ObsMode {
    kSingle, // classical Gaussian likelihood of one observed point
    kKnn,    // sum of squared distances to the H nearest observed points
};

// Observations attached to one grid index: a point cloud, a noise scale, and
// the weighting mode. For kKnn, h_nearest points enter the log-weight sum.
class ObservationSlot {
public:
    ObservationSlot(std::size_t time_index, Matrix points, double sigma_obs,
                    std::size_t h_nearest, ObsMode mode);

    std::size_t time_index() const { return time_index_; }
    const Matrix& points() const { return points_; }
    double sigma_obs() const { return sigma_obs_; }
    std::size_t h_nearest() const { return h_nearest_; }
    ObsMode mode() const { return mode_; }
    std::size_t obs_dim() const { return points_.cols(); }

private:
    std::size_t time_index_;
    Matrix points_; // P x d_y
    double sigma_obs_;
    std::size_t h_nearest_;
    ObsMode mode_;
};

// All observation slots of a run, keyed by grid index, plus the linear map
// from state space to observation space (identity unless configured
// otherwise). The slot at the final grid index may be flagged as a terminal
// distribution constraint.
class ObservationSet {
public:
    ObservationSet() = default;
    explicit ObservationSet(std::size_t state_dim);
    ObservationSet(std::size_t state_dim, Matrix obs_matrix);

    void add_slot(ObservationSlot slot);
    void mark_terminal(std::size_t grid_index);

    std::size_t state_dim() const { return state_dim_; }
    std::size_t obs_dim() const { return obs_matrix_.empty() ? state_dim_ : obs_matrix_.rows(); }
    bool identity_projection() const { return obs_matrix_.empty(); }
    const Matrix& obs_matrix() const { return obs_matrix_; }

    bool has_slot(std::size_t grid_index) const { return slots_.count(grid_index) != 0; }
    const ObservationSlot* slot(std::size_t grid_index) const;
    const std::map<std::size_t, ObservationSlot>& slots() const { return slots_; }
    bool is_terminal_slot(std::size_t grid_index) const {
        return terminal_index_ && *terminal_index_ == grid_index;
    }
    std::optional<std::size_t> terminal_index() const { return terminal_index_; }

    // y = H x
    void project(std::span<const double> x, std::span<double> y) const;

private:
    std::size_t state_dim_ = 0;
    Matrix obs_matrix_; // d_y x d_x; empty means identity
    std::map<std::size_t, ObservationSlot> slots_;
    std::optional<std::size_t> terminal_index_;
};

// Log-likelihood (up to an additive constant) of the slot's single point:
// -|y - x|^2 / (2 sigma^2).
double log_weight_single(const ObservationSlot& slot, std::span<const double> x_proj);

// KNN log-weight: -(1/(2 sigma^2)) * sum over the h_nearest points closest to
// x_proj of the squared distance. Ties break toward the lower point index.
double log_weight_knn(const ObservationSlot& slot, std::span<const double> x_proj);

// Log-weights for all particles at grid index j, or std::nullopt when no slot
// exists there (uniform weights).
std::optional<Vec> weights_at(const ObservationSet& obs, std::size_t grid_index,
                              const Matrix& particles);

// p_i = exp(lw_i - logsumexp(lw)); throws DegenerateWeightsError when no entry
// is finite.
Vec normalize_log_weights(std::span<const double> log_weights);

} // namespace smcsde
