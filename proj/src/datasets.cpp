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

#include "smcsde/datasets.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "smcsde/csv.hpp"
#include "smcsde/errors.hpp"

namespace smcsde {

using json = nlohmann::json;

namespace {

constexpr std::uint32_t kLaneTruth = 0x31u << 24;
constexpr std::uint32_t kLaneObsNoise = 0x32u << 24;
constexpr std::uint32_t kLaneShape = 0x33u << 24;

GridPtr shared_grid(double t0, double t_end, double dt) {
    return std::make_shared<const TimeGrid>(make_uniform_grid(t0, t_end, dt));
}

} // namespace

std::size_t snap_to_grid(const TimeGrid& grid, double t) {
    const double dt = grid.deltas.front();
    const double pos = (t - grid.t0) / dt;
    const double rounded = std::round(pos);
    if (rounded < 0.0 || rounded > static_cast<double>(grid.n_steps) ||
        std::abs(t - (grid.t0 + rounded * dt)) > 0.5 * dt) {
        throw ConfigError("time " + std::to_string(t) +
                          " is farther than half a step from every grid time");
    }
    return static_cast<std::size_t>(rounded);
}

BatchDriftFn double_well_drift() {
    return [](const Matrix& states, double, Matrix& out) {
        for (std::size_t i = 0; i < states.size(); ++i) {
            const double x = states.data()[i];
            out.data()[i] = 4.0 * x * (1.0 - x * x);
        }
    };
}

Dataset gen_double_well(const DoubleWellParams& p, std::uint64_t seed) {
    Dataset ds;
    ds.grid = shared_grid(0.0, p.t_end, p.dt);
    ds.model.dim = 1;
    ds.model.drift = double_well_drift();
    ds.model.g = DiffusionSchedule::constant(p.g);
    ds.model.init = point_mass_init({p.init_x});

    if (p.n_obs == 0 || ds.grid->n_steps % p.n_obs != 0) {
        throw ConfigError("observation count must divide the step count");
    }
    const auto truth_paths = simulate(ds.model, ds.grid, 1, derive_seed(seed, 1));
    ds.truth = truth_paths.front();

    ds.obs = ObservationSet(1);
    RngStream obs_rng(seed, kLaneObsNoise);
    const std::size_t spacing = ds.grid->n_steps / p.n_obs;
    for (std::size_t k = 1; k <= p.n_obs; ++k) {
        const std::size_t idx = k * spacing;
        Matrix point(1, 1);
        point(0, 0) = ds.truth->states(idx, 0) + p.sigma_obs * obs_rng.next_gaussian();
        ds.obs.add_slot(ObservationSlot(idx, std::move(point), p.sigma_obs, 1,
                                        ObsMode::kSingle));
    }

    ds.manifest = json{{"name", "double_well"},
                       {"t_end", p.t_end},
                       {"dt", p.dt},
                       {"g", p.g},
                       {"sigma_obs", p.sigma_obs},
                       {"init_x", p.init_x},
                       {"n_obs", p.n_obs},
                       {"seed", seed}};
    return ds;
}

Dataset gen_two_circles(const TwoCirclesParams& p, std::uint64_t seed) {
    if (p.n_terminal < 10) {
        throw ConfigError("two-circles terminal set needs at least 10 samples");
    }
    Dataset ds;
    ds.grid = shared_grid(0.0, p.t_end, p.dt);
    ds.model.dim = 2;
    ds.model.drift = zero_drift();
    ds.model.g = DiffusionSchedule::piecewise_linear(
        {0.0, 0.5 * p.t_end, p.t_end}, {p.g_high, p.g_high, p.g_end});
    ds.model.init = gaussian_init({0.0, 0.0}, 1.0);

    const double inner_radius = p.outer_radius * p.radius_factor;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    // terminal constraint: equally spaced angles on both circles plus jitter
    Matrix terminal(p.n_terminal, 2);
    RngStream shape_rng(seed, kLaneShape);
    const std::size_t n_outer = p.n_terminal / 2;
    for (std::size_t i = 0; i < p.n_terminal; ++i) {
        const bool outer = i < n_outer;
        const std::size_t count = outer ? n_outer : p.n_terminal - n_outer;
        const std::size_t pos = outer ? i : i - n_outer;
        const double angle = two_pi * static_cast<double>(pos) / static_cast<double>(count);
        const double r = outer ? p.outer_radius : inner_radius;
        terminal(i, 0) = r * std::cos(angle) + p.jitter * shape_rng.next_gaussian();
        terminal(i, 1) = r * std::sin(angle) + p.jitter * shape_rng.next_gaussian();
    }

    const double mid_radius =
        p.mid_radius > 0.0 ? p.mid_radius : 0.5 * (p.outer_radius + inner_radius);
    Matrix mid(p.mid_points, 2);
    for (std::size_t i = 0; i < p.mid_points; ++i) {
        const double angle = two_pi * static_cast<double>(i) / static_cast<double>(p.mid_points);
        mid(i, 0) = mid_radius * std::cos(angle);
        mid(i, 1) = mid_radius * std::sin(angle);
    }

    ds.obs = ObservationSet(2);
    const std::size_t mid_idx = ds.grid->n_steps / 2;
    ds.obs.add_slot(ObservationSlot(mid_idx, std::move(mid), p.sigma_mid,
                                    std::min(p.h_mid, p.mid_points), ObsMode::kKnn));
    ds.obs.add_slot(ObservationSlot(ds.grid->n_steps, std::move(terminal),
                                    p.sigma_mid * p.terminal_sigma_scale,
                                    std::min(p.h_terminal, p.n_terminal),
                                    ObsMode::kKnn));
    ds.obs.mark_terminal(ds.grid->n_steps);

    ds.manifest = json{{"name", "two_circles"},
                       {"t_end", p.t_end},
                       {"dt", p.dt},
                       {"n_terminal", p.n_terminal},
                       {"outer_radius", p.outer_radius},
                       {"radius_factor", p.radius_factor},
                       {"jitter", p.jitter},
                       {"mid_points", p.mid_points},
                       {"mid_radius", mid_radius},
                       {"mid_radius_rule", "mean of the two terminal radii"},
                       {"sigma_mid", p.sigma_mid},
                       {"terminal_sigma_scale", p.terminal_sigma_scale},
                       {"h_mid", p.h_mid},
                       {"h_terminal", p.h_terminal},
                       {"g_high", p.g_high},
                       {"g_end", p.g_end},
                       {"seed", seed}};
    return ds;
}

Dataset gen_vehicle_synthetic(const VehicleParams& p, std::uint64_t seed) {
    if (p.dense_points == 0 || p.dense_points % p.thin_every != 0) {
        throw ConfigError("thinning factor must divide the dense point count");
    }
    Dataset ds;
    const double t_end = p.dt * static_cast<double>(p.dense_points);
    ds.grid = shared_grid(0.0, t_end, p.dt);
    ds.model.dim = 2;
    ds.model.drift = zero_drift();
    ds.model.g = DiffusionSchedule::constant(p.g);
    ds.model.init = point_mass_init({0.0, 0.0});

    // low-frequency sinusoid mix per coordinate, anchored at the origin
    RngStream shape_rng(seed, kLaneShape);
    double amp[2][2];
    double phase[2][2];
    double omega[2][2];
    for (int c = 0; c < 2; ++c) {
        for (int k = 0; k < 2; ++k) {
            amp[c][k] = 0.5 + shape_rng.next_uniform();
            phase[c][k] = 2.0 * std::numbers::pi * shape_rng.next_uniform();
            omega[c][k] = 2.0 * std::numbers::pi * static_cast<double>(k + 1) / t_end;
        }
    }
    Trajectory truth;
    truth.grid = ds.grid;
    truth.states.resize(ds.grid->n_times(), 2);
    RngStream noise_rng(seed, kLaneTruth);
    for (std::size_t r = 0; r < ds.grid->n_times(); ++r) {
        const double t = ds.grid->times[r];
        for (int c = 0; c < 2; ++c) {
            double v = 0.0;
            for (int k = 0; k < 2; ++k) {
                v += amp[c][k] * (std::sin(omega[c][k] * t + phase[c][k]) -
                                  std::sin(phase[c][k]));
            }
            if (r > 0) {
                v += p.track_noise * noise_rng.next_gaussian();
            }
            truth.states(r, c) = v;
        }
    }
    ds.truth = std::move(truth);

    ds.obs = ObservationSet(2);
    for (std::size_t k = 0; k < p.dense_points / p.thin_every; ++k) {
        const std::size_t idx = k * p.thin_every;
        Matrix point(1, 2);
        point(0, 0) = ds.truth->states(idx, 0);
        point(0, 1) = ds.truth->states(idx, 1);
        ds.obs.add_slot(ObservationSlot(idx, std::move(point), p.sigma_obs, 1,
                                        ObsMode::kSingle));
    }

    ds.manifest = json{{"name", "vehicle_synthetic"},
                       {"t_end", t_end},
                       {"dt", p.dt},
                       {"dense_points", p.dense_points},
                       {"thin_every", p.thin_every},
                       {"g", p.g},
                       {"sigma_obs", p.sigma_obs},
                       {"track_noise", p.track_noise},
                       {"seed", seed}};
    return ds;
}

Dataset load_marginals_csv(const std::vector<std::filesystem::path>& paths,
                           const std::vector<double>& times,
                           const MarginalParams& p) {
    if (paths.empty() || paths.size() != times.size()) {
        throw ConfigError("marginal loading needs one time per file");
    }
    Dataset ds;
    ds.grid = shared_grid(0.0, p.t_end, p.dt);
    ds.model.dim = 0; // fixed once the first file reveals the dimension

    std::optional<Matrix> first_slot_points;
    ObservationSet obs;
    std::set<std::size_t> seen;
    for (std::size_t f = 0; f < paths.size(); ++f) {
        const CsvTable table = read_csv(paths[f]);
        if (table.rows.rows() == 0) {
            throw ParseError("marginal file has no data rows: " + paths[f].string());
        }
        // accept either a leading time column or raw point rows
        const bool has_time = !table.header.empty() && table.header.front() == "t";
        const std::size_t d = table.rows.cols() - (has_time ? 1 : 0);
        if (d == 0) {
            throw ParseError("marginal file has no point columns: " + paths[f].string());
        }
        if (ds.model.dim == 0) {
            ds.model.dim = d;
            obs = ObservationSet(d);
        } else if (d != ds.model.dim) {
            throw ParseError("marginal files disagree on dimension: " +
                             paths[f].string());
        }
        Matrix pts(table.rows.rows(), d);
        for (std::size_t r = 0; r < pts.rows(); ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                pts(r, j) = table.rows(r, j + (has_time ? 1 : 0));
            }
        }
        const std::size_t idx = snap_to_grid(*ds.grid, times[f]);
        if (!seen.insert(idx).second) {
            throw ConfigError("two marginal files map to grid index " +
                              std::to_string(idx));
        }
        if (idx == 0) {
            first_slot_points = pts;
        }
        const std::size_t h = std::min<std::size_t>(p.h_nearest, pts.rows());
        obs.add_slot(ObservationSlot(idx, std::move(pts), p.sigma_obs, h, ObsMode::kKnn));
    }
    if (obs.has_slot(ds.grid->n_steps)) {
        obs.mark_terminal(ds.grid->n_steps);
    }
    ds.obs = std::move(obs);

    ds.model.drift = zero_drift();
    ds.model.g = DiffusionSchedule::constant(p.g);
    if (first_slot_points) {
        // start from the empirical marginal at t = 0 when one is provided
        auto pts = std::make_shared<Matrix>(std::move(*first_slot_points));
        ds.model.init = [pts](Matrix& out, RngStream& rng) {
            for (std::size_t i = 0; i < out.rows(); ++i) {
                const std::size_t pick = static_cast<std::size_t>(
                    rng.next_uniform() * static_cast<double>(pts->rows()));
                const std::size_t row = std::min(pick, pts->rows() - 1);
                for (std::size_t j = 0; j < out.cols(); ++j) {
                    out(i, j) = (*pts)(row, j);
                }
            }
        };
    } else {
        ds.model.init = gaussian_init(Vec(ds.model.dim, 0.0), 1.0);
    }

    std::vector<std::string> names;
    for (const auto& path : paths) {
        names.push_back(path.string());
    }
    ds.manifest = json{{"name", "marginal_transport"},
                       {"t_end", p.t_end},
                       {"dt", p.dt},
                       {"g", p.g},
                       {"sigma_obs", p.sigma_obs},
                       {"h_nearest", p.h_nearest},
                       {"files", names},
                       {"times", times}};
    return ds;
}

std::vector<std::filesystem::path> write_synthetic_marginals(
    const std::filesystem::path& dir, const MarginalParams& p,
    std::size_t points_per_slot, std::size_t n_slots, std::uint64_t seed) {
    if (n_slots < 2) {
        throw ConfigError("need at least two marginal slots");
    }
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    RngStream rng(seed, kLaneShape);
    for (std::size_t s = 0; s < n_slots; ++s) {
        const double t =
            p.t_end * static_cast<double>(s) / static_cast<double>(n_slots - 1);
        // cloud drifts diagonally and spreads over time
        const double cx = 2.0 * t;
        const double cy = -1.0 * t;
        const double spread = 0.5 + 0.5 * t;
        Matrix pts(points_per_slot, 2);
        Vec times(points_per_slot, t);
        for (std::size_t i = 0; i < points_per_slot; ++i) {
            pts(i, 0) = cx + spread * rng.next_gaussian();
            pts(i, 1) = cy + spread * rng.next_gaussian();
        }
        const auto path = dir / ("marginal_t" + std::to_string(s) + ".csv");
        write_points_csv(path, times, pts);
        out.push_back(path);
    }
    return out;
}

} // namespace smcsde
