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

#include "smcsde/observations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "smcsde/errors.hpp"
#include "smcsde/kernels.hpp"

namespace smcsde {

namespace {

// Row-reduction rank check; obs matrices are tiny.
std::size_t matrix_rank(Matrix a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    std::size_t rank = 0;
    for (std::size_t col = 0; col < n && rank < m; ++col) {
        std::size_t pivot = rank;
        for (std::size_t r = rank + 1; r < m; ++r) {
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) {
                pivot = r;
            }
        }
        if (std::abs(a(pivot, col)) < 1e-12) {
            continue;
        }
        for (std::size_t c = 0; c < n; ++c) {
            std::swap(a(rank, c), a(pivot, c));
        }
        for (std::size_t r = 0; r < m; ++r) {
            if (r == rank) {
                continue;
            }
            const double factor = a(r, col) / a(rank, col);
            for (std::size_t c = 0; c < n; ++c) {
                a(r, c) -= factor * a(rank, c);
            }
        }
        ++rank;
    }
    return rank;
}

} // namespace

ObservationSlot::ObservationSlot(std::size_t time_index, Matrix points,
                                 double sigma_obs, std::size_t h_nearest,
                                 ObsMode mode)
    : time_index_(time_index),
      points_(std::move(points)),
      sigma_obs_(sigma_obs),
      h_nearest_(h_nearest),
      mode_(mode) {
    if (points_.rows() == 0) {
        throw ContractViolation("observation slot needs at least one point");
    }
    if (!(sigma_obs_ > 0.0)) {
        throw ContractViolation("observation noise scale must be positive");
    }
    if (mode_ == ObsMode::kKnn &&
        (h_nearest_ < 1 || h_nearest_ > points_.rows())) {
        throw ContractViolation("knn slot requires 1 <= H <= number of points");
    }
    if (mode_ == ObsMode::kSingle && points_.rows() != 1) {
        throw ContractViolation("single-mode slot must hold exactly one point");
    }
}

ObservationSet::ObservationSet(std::size_t state_dim) : state_dim_(state_dim) {}

ObservationSet::ObservationSet(std::size_t state_dim, Matrix obs_matrix)
    : state_dim_(state_dim), obs_matrix_(std::move(obs_matrix)) {
    if (obs_matrix_.cols() != state_dim_) {
        throw ContractViolation("observation matrix column count must equal state dim");
    }
    if (matrix_rank(obs_matrix_) != obs_matrix_.rows()) {
        throw ContractViolation("observation matrix must have full row rank");
    }
}

void ObservationSet::add_slot(ObservationSlot slot) {
    if (slot.obs_dim() != obs_dim()) {
        throw ContractViolation("slot point dimension does not match observation dim");
    }
    const std::size_t idx = slot.time_index();
    if (!slots_.emplace(idx, std::move(slot)).second) {
        throw ContractViolation("duplicate observation slot at grid index " +
                                std::to_string(idx));
    }
}

void ObservationSet::mark_terminal(std::size_t grid_index) {
    if (!has_slot(grid_index)) {
        throw ContractViolation("terminal flag requires a slot at the given index");
    }
    terminal_index_ = grid_index;
}

const ObservationSlot* ObservationSet::slot(std::size_t grid_index) const {
    const auto it = slots_.find(grid_index);
    return it == slots_.end() ? nullptr : &it->second;
}

void ObservationSet::project(std::span<const double> x, std::span<double> y) const {
    if (identity_projection()) {
        std::copy(x.begin(), x.end(), y.begin());
        return;
    }
    for (std::size_t r = 0; r < obs_matrix_.rows(); ++r) {
        y[r] = kern::active().dot(obs_matrix_.row(r), x.data(), state_dim_);
    }
}

double log_weight_single(const ObservationSlot& slot, std::span<const double> x_proj) {
    if (slot.mode() != ObsMode::kSingle) {
        throw ContractViolation("log_weight_single requires a single-mode slot");
    }
    if (x_proj.size() != slot.obs_dim()) {
        throw ContractViolation("log_weight_single dimension mismatch");
    }
    double dist2 = 0.0;
    const double* y = slot.points().row(0);
    for (std::size_t j = 0; j < x_proj.size(); ++j) {
        const double diff = y[j] - x_proj[j];
        dist2 += diff * diff;
    }
    const double s2 = slot.sigma_obs() * slot.sigma_obs();
    return -0.5 * dist2 / s2;
}

double log_weight_knn(const ObservationSlot& slot, std::span<const double> x_proj) {
    if (slot.mode() != ObsMode::kKnn) {
        throw ContractViolation("log_weight_knn requires a knn-mode slot");
    }
    if (x_proj.size() != slot.obs_dim()) {
        throw ContractViolation("log_weight_knn dimension mismatch");
    }
    const std::size_t n = slot.points().rows();
    const std::size_t h = slot.h_nearest();
    Vec dist2(n);
    kern::active().sqdist_rows(slot.points().data(), n, slot.obs_dim(),
                               x_proj.data(), dist2.data());
    double sum = 0.0;
    if (h == n) {
        for (double v : dist2) {
            sum += v;
        }
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h) - 1,
                         order.end(), [&](std::size_t a, std::size_t b) {
                             if (dist2[a] != dist2[b]) {
                                 return dist2[a] < dist2[b];
                             }
                             return a < b; // ties toward the lower index
                         });
        // fixed ascending-index order so summation is deterministic
        std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h));
        for (std::size_t i = 0; i < h; ++i) {
            sum += dist2[order[i]];
        }
    }
    const double s2 = slot.sigma_obs() * slot.sigma_obs();
    return -0.5 * sum / s2;
}

std::optional<Vec> weights_at(const ObservationSet& obs, std::size_t grid_index,
                              const Matrix& particles) {
    const ObservationSlot* slot = obs.slot(grid_index);
    if (slot == nullptr) {
        return std::nullopt;
    }
    const std::size_t n = particles.rows();
    Vec out(n);
    Vec proj(obs.obs_dim());
    for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> x_proj;
        if (obs.identity_projection()) {
            x_proj = particles.row_span(i);
        } else {
            obs.project(particles.row_span(i), proj);
            x_proj = proj;
        }
        out[i] = slot->mode() == ObsMode::kSingle ? log_weight_single(*slot, x_proj)
                                                  : log_weight_knn(*slot, x_proj);
    }
    return out;
}

Vec normalize_log_weights(std::span<const double> log_weights) {
    if (log_weights.empty()) {
        throw ContractViolation("cannot normalize an empty weight vector");
    }
    const double lse = kern::active().logsumexp(log_weights.data(), log_weights.size());
    if (!std::isfinite(lse)) {
        throw DegenerateWeightsError("all log-weights are -inf or non-finite");
    }
    Vec probs(log_weights.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        probs[i] = std::exp(log_weights[i] - lse);
    }
    return probs;
}

} // namespace smcsde
