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

#include "smcsde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "smcsde/errors.hpp"
#include "smcsde/kernels.hpp"
#include "smcsde/rng.hpp"

namespace smcsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix distance_matrix(const SampleSet& a, const SampleSet& b) {
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    const std::size_t d = a.dim();
    Matrix cost(na, nb);
    for (std::size_t i = 0; i < na; ++i) {
        kern::active().sqdist_rows(b.points.data(), nb, d, a.points.row(i),
                                   cost.row(i));
        for (std::size_t j = 0; j < nb; ++j) {
            cost(i, j) = std::sqrt(cost(i, j));
        }
    }
    return cost;
}

Vec uniform_weights(std::size_t n) { return Vec(n, 1.0 / static_cast<double>(n)); }

SampleSet subsample(const SampleSet& s, std::size_t cap, RngStream& rng) {
    const std::size_t n = s.size();
    // draw cap indices without replacement (partial Fisher-Yates)
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.next_uniform() * static_cast<double>(n - i));
        std::swap(idx[i], idx[std::min(j, n - 1)]);
    }
    Matrix pts(cap, s.dim());
    for (std::size_t i = 0; i < cap; ++i) {
        for (std::size_t j = 0; j < s.dim(); ++j) {
            pts(i, j) = s.points(idx[i], j);
        }
    }
    if (s.weights) {
        Vec w(cap);
        double total = 0.0;
        for (std::size_t i = 0; i < cap; ++i) {
            w[i] = (*s.weights)[idx[i]];
            total += w[i];
        }
        if (total <= 0.0) {
            throw ContractViolation("subsampled weights sum to zero");
        }
        for (double& v : w) {
            v /= total;
        }
        return SampleSet::weighted(std::move(pts), std::move(w));
    }
    return SampleSet::uniform(std::move(pts));
}

} // namespace

SampleSet SampleSet::uniform(Matrix points) {
    if (points.rows() == 0) {
        throw ContractViolation("sample set needs at least one point");
    }
    return SampleSet{std::move(points), std::nullopt};
}

SampleSet SampleSet::weighted(Matrix points, Vec weights) {
    if (points.rows() == 0) {
        throw ContractViolation("sample set needs at least one point");
    }
    if (weights.size() != points.rows()) {
        throw ContractViolation("weight count must match point count");
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            throw ContractViolation("sample weights must be nonnegative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ContractViolation("sample weights must sum to 1");
    }
    return SampleSet{std::move(points), std::move(weights)};
}

// Shortest augmenting path assignment with dual potentials; O(n^3).
double solve_assignment(const Matrix& cost) {
    if (cost.rows() != cost.cols()) {
        throw ContractViolation("assignment requires a square cost matrix");
    }
    const std::size_t n = cost.rows();
    // 1-based arrays; p[j] = row matched to column j
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0);
    std::vector<std::size_t> way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            const double* crow = cost.row(i0 - 1);
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = crow[j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
        total += cost(p[j] - 1, j - 1);
    }
    return total;
}

// Successive shortest paths with dual potentials over the dense bipartite
// graph. Supplies and demands may be any nonnegative reals with equal totals.
double solve_transport(const Matrix& cost, const Vec& supply, const Vec& demand) {
    const std::size_t na = supply.size();
    const std::size_t nb = demand.size();
    if (cost.rows() != na || cost.cols() != nb) {
        throw ContractViolation("transport cost matrix has wrong shape");
    }
    double total_supply = 0.0;
    double total_demand = 0.0;
    for (double s : supply) {
        total_supply += s;
    }
    for (double dmd : demand) {
        total_demand += dmd;
    }
    if (std::abs(total_supply - total_demand) > 1e-9 * std::max(1.0, total_supply)) {
        throw ContractViolation("transport requires equal supply and demand mass");
    }

    Vec res_supply = supply;
    Vec res_demand = demand;
    Matrix flow(na, nb, 0.0);
    Vec pot_a(na, 0.0); // potentials; reduced forward cost c - pot_a + pot_b >= 0
    Vec pot_b(nb, 0.0);

    const double mass_tol = 1e-14 * std::max(1.0, total_supply);
    double remaining = total_supply;
    const std::size_t max_phases = 64 * (na + nb) + 64;
    std::size_t phases = 0;

    std::vector<double> dist_a(na);
    std::vector<double> dist_b(nb);
    std::vector<char> done_a(na);
    std::vector<char> done_b(nb);
    std::vector<std::int64_t> par_b(nb);  // supplier feeding consumer j on the path
    std::vector<std::int64_t> par_a(na);  // consumer preceding supplier i (backward arc)

    while (remaining > mass_tol) {
        if (++phases > max_phases) {
            throw NumericalDivergence("transport solver failed to converge");
        }
        std::fill(dist_a.begin(), dist_a.end(), kInf);
        std::fill(dist_b.begin(), dist_b.end(), kInf);
        std::fill(done_a.begin(), done_a.end(), 0);
        std::fill(done_b.begin(), done_b.end(), 0);
        std::fill(par_b.begin(), par_b.end(), -1);
        std::fill(par_a.begin(), par_a.end(), -1);
        for (std::size_t i = 0; i < na; ++i) {
            if (res_supply[i] > mass_tol) {
                dist_a[i] = 0.0;
            }
        }

        std::int64_t target = -1;
        while (true) {
            // pick the unvisited node with the smallest tentative distance
            double best = kInf;
            std::int64_t node = -1;
            bool node_is_a = true;
            for (std::size_t i = 0; i < na; ++i) {
                if (!done_a[i] && dist_a[i] < best) {
                    best = dist_a[i];
                    node = static_cast<std::int64_t>(i);
                    node_is_a = true;
                }
            }
            for (std::size_t j = 0; j < nb; ++j) {
                if (!done_b[j] && dist_b[j] < best) {
                    best = dist_b[j];
                    node = static_cast<std::int64_t>(j);
                    node_is_a = false;
                }
            }
            if (node < 0) {
                break;
            }
            if (!node_is_a && res_demand[static_cast<std::size_t>(node)] > mass_tol) {
                target = node;
                break;
            }
            if (node_is_a) {
                const std::size_t i = static_cast<std::size_t>(node);
                done_a[i] = 1;
                const double* crow = cost.row(i);
                for (std::size_t j = 0; j < nb; ++j) {
                    if (done_b[j]) {
                        continue;
                    }
                    const double rc = std::max(0.0, crow[j] - pot_a[i] + pot_b[j]);
                    if (dist_a[i] + rc < dist_b[j]) {
                        dist_b[j] = dist_a[i] + rc;
                        par_b[j] = static_cast<std::int64_t>(i);
                    }
                }
            } else {
                const std::size_t j = static_cast<std::size_t>(node);
                done_b[j] = 1;
                for (std::size_t i = 0; i < na; ++i) {
                    if (done_a[i] || flow(i, j) <= 0.0) {
                        continue;
                    }
                    const double rc = std::max(0.0, pot_a[i] - pot_b[j] - cost(i, j));
                    if (dist_b[j] + rc < dist_a[i]) {
                        dist_a[i] = dist_b[j] + rc;
                        par_a[i] = static_cast<std::int64_t>(j);
                    }
                }
            }
        }
        if (target < 0) {
            throw NumericalDivergence("transport solver found no augmenting path");
        }
        const double dist_target = dist_b[static_cast<std::size_t>(target)];

        // dual update keeps all reduced costs nonnegative
        for (std::size_t i = 0; i < na; ++i) {
            if (dist_a[i] < kInf) {
                pot_a[i] -= std::min(dist_a[i], dist_target);
            }
        }
        for (std::size_t j = 0; j < nb; ++j) {
            if (dist_b[j] < kInf) {
                pot_b[j] -= std::min(dist_b[j], dist_target);
            }
        }

        // bottleneck along the alternating path
        double delta = res_demand[static_cast<std::size_t>(target)];
        {
            std::int64_t j = target;
            while (true) {
                const std::int64_t i = par_b[static_cast<std::size_t>(j)];
                if (par_a[static_cast<std::size_t>(i)] < 0) {
                    delta = std::min(delta, res_supply[static_cast<std::size_t>(i)]);
                    break;
                }
                const std::int64_t j_prev = par_a[static_cast<std::size_t>(i)];
                delta = std::min(delta, flow(static_cast<std::size_t>(i),
                                             static_cast<std::size_t>(j_prev)));
                j = j_prev;
            }
        }
        // apply the augmentation
        {
            std::int64_t j = target;
            while (true) {
                const std::int64_t i = par_b[static_cast<std::size_t>(j)];
                flow(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) += delta;
                if (par_a[static_cast<std::size_t>(i)] < 0) {
                    res_supply[static_cast<std::size_t>(i)] -= delta;
                    break;
                }
                const std::int64_t j_prev = par_a[static_cast<std::size_t>(i)];
                flow(static_cast<std::size_t>(i), static_cast<std::size_t>(j_prev)) -= delta;
                j = j_prev;
            }
            res_demand[static_cast<std::size_t>(target)] -= delta;
        }
        remaining -= delta;
    }

    double total = 0.0;
    for (std::size_t i = 0; i < na; ++i) {
        total += kern::active().dot(flow.row(i), cost.row(i), nb);
    }
    return total;
}

double emd(const SampleSet& a, const SampleSet& b) {
    if (a.dim() != b.dim()) {
        throw ContractViolation("emd requires equal point dimensions");
    }
    const Matrix cost = distance_matrix(a, b);
    if (!a.weights && !b.weights && a.size() == b.size()) {
        return solve_assignment(cost) / static_cast<double>(a.size());
    }
    const Vec supply = a.weights ? *a.weights : uniform_weights(a.size());
    const Vec demand = b.weights ? *b.weights : uniform_weights(b.size());
    return solve_transport(cost, supply, demand);
}

EmdResult emd_capped(const SampleSet& a, const SampleSet& b, std::size_t cap,
                     std::uint64_t seed) {
    EmdResult out;
    RngStream rng(seed, 0x7Eu << 24);
    const SampleSet* pa = &a;
    const SampleSet* pb = &b;
    SampleSet sa{Matrix(), std::nullopt};
    SampleSet sb{Matrix(), std::nullopt};
    if (cap > 0 && a.size() > cap) {
        sa = subsample(a, cap, rng);
        pa = &sa;
        out.subsampled = true;
    }
    if (cap > 0 && b.size() > cap) {
        sb = subsample(b, cap, rng);
        pb = &sb;
        out.subsampled = true;
    }
    out.n_a = pa->size();
    out.n_b = pb->size();
    out.value = emd(*pa, *pb);
    return out;
}

Trajectory mean_trajectory(const std::vector<Trajectory>& pool) {
    if (pool.empty()) {
        throw ContractViolation("mean_trajectory requires a nonempty pool");
    }
    const Trajectory& first = pool.front();
    for (const Trajectory& t : pool) {
        if (t.states.rows() != first.states.rows() ||
            t.states.cols() != first.states.cols() ||
            t.grid->times != first.grid->times) {
            throw ContractViolation("mean_trajectory requires a shared grid");
        }
    }
    Trajectory out;
    out.grid = first.grid;
    out.states.resize(first.states.rows(), first.states.cols());
    for (const Trajectory& t : pool) {
        kern::active().axpy(1.0, t.states.data(), out.states.data(), out.states.size());
    }
    const double inv = 1.0 / static_cast<double>(pool.size());
    for (std::size_t i = 0; i < out.states.size(); ++i) {
        out.states.data()[i] *= inv;
    }
    return out;
}

double trajectory_mse_paths(const Trajectory& a, const Trajectory& b) {
    if (a.states.rows() != b.states.rows() || a.states.cols() != b.states.cols()) {
        throw ContractViolation("trajectories must share a grid for pathwise mse");
    }
    double total = 0.0;
    for (std::size_t r = 0; r < a.states.rows(); ++r) {
        for (std::size_t j = 0; j < a.states.cols(); ++j) {
            const double diff = a.states(r, j) - b.states(r, j);
            total += diff * diff;
        }
    }
    return total / static_cast<double>(a.states.rows());
}

double trajectory_mse(const Trajectory& mean, const ObservationSet& obs) {
    if (obs.slots().empty()) {
        throw ContractViolation("trajectory_mse requires at least one observation slot");
    }
    double total = 0.0;
    std::size_t count = 0;
    Vec proj(obs.obs_dim());
    for (const auto& [idx, slot] : obs.slots()) {
        if (idx >= mean.states.rows()) {
            throw ContractViolation("observation slot lies outside the trajectory grid");
        }
        std::span<const double> x_proj;
        if (obs.identity_projection()) {
            x_proj = mean.states.row_span(idx);
        } else {
            obs.project(mean.states.row_span(idx), proj);
            x_proj = proj;
        }
        const Matrix& pts = slot.points();
        for (std::size_t p = 0; p < pts.rows(); ++p) {
            double dist2 = 0.0;
            for (std::size_t j = 0; j < pts.cols(); ++j) {
                const double diff = x_proj[j] - pts(p, j);
                dist2 += diff * diff;
            }
            total += dist2;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

} // namespace smcsde
