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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "smcsde/errors.hpp"
#include "smcsde/smoother.hpp"

using namespace smcsde;

namespace {

GridPtr grid_of(double t0, double t_end, double dt) {
    return std::make_shared<const TimeGrid>(make_uniform_grid(t0, t_end, dt));
}

SdeModel brownian_model(double g, double init_x = 0.0) {
    SdeModel m;
    m.dim = 1;
    m.drift = zero_drift();
    m.g = DiffusionSchedule::constant(g);
    m.init = point_mass_init({init_x});
    return m;
}

ObservationSlot point_slot(std::size_t idx, double y, double sigma) {
    Matrix pt(1, 1);
    pt(0, 0) = y;
    return ObservationSlot(idx, std::move(pt), sigma, 1, ObsMode::kSingle);
}

const DriftFn kDoubleWell = [](std::span<const double> x, double,
                               std::span<double> out) {
    out[0] = 4.0 * x[0] * (1.0 - x[0] * x[0]);
};

} // namespace

TEST_CASE("mean-change record") {
    SUBCASE("zero drift leaves the raw state difference, bit for bit") {
        auto m = brownian_model(1.0);
        const Vec x0 = {0.3712345678901234};
        const Vec x1 = {-1.894432101234567};
        const Vec d = record_diff(m, x0, x1, 0.0, 0.01);
        CHECK(d[0] == x1[0] - x0[0]);
    }
    SUBCASE("linear drift gives (x1 - x0) (1 + a dt)") {
        const double a = -0.7;
        SdeModel m;
        m.dim = 1;
        m.drift = pointwise_drift(
            [a](std::span<const double> x, double, std::span<double> out) {
                out[0] = a * x[0];
            });
        m.g = DiffusionSchedule::constant(1.0);
        m.init = point_mass_init({0.0});
        const double x0 = 0.4, x1 = 1.3, dt = 0.05;
        const Vec d = record_diff(m, Vec{x0}, Vec{x1}, 0.0, dt);
        CHECK(d[0] == doctest::Approx((x1 - x0) * (1.0 + a * dt)).epsilon(1e-14));
    }
    SUBCASE("equal endpoints cancel") {
        SdeModel m;
        m.dim = 1;
        m.drift = pointwise_drift(kDoubleWell);
        m.g = DiffusionSchedule::constant(1.0);
        m.init = point_mass_init({0.0});
        const Vec d = record_diff(m, Vec{0.8}, Vec{0.8}, 0.3, 0.01);
        CHECK(d[0] == 0.0);
    }
}

TEST_CASE("bootstrap initial reference") {
    SUBCASE("no observations, no noise: the deterministic Euler path") {
        SdeModel m;
        m.dim = 1;
        m.drift = pointwise_drift(kDoubleWell);
        m.g = DiffusionSchedule::constant(0.0);
        m.init = point_mass_init({0.4});
        ObservationSet obs(1);
        ChainConfig cfg;
        cfg.n_particles = 8;
        cfg.n_iterations = 1;
        cfg.burn_in = 0;
        cfg.seed = 3;
        const auto ref = init_reference(m, obs, grid_of(0.0, 0.5, 0.05), cfg);
        double x = 0.4;
        CHECK(ref.states.states(0, 0) == 0.4);
        for (std::size_t r = 1; r < ref.states.states.rows(); ++r) {
            x = x + 0.05 * (4.0 * x * (1.0 - x * x));
            CHECK(ref.states.states(r, 0) == doctest::Approx(x).epsilon(1e-15));
        }
    }
    SUBCASE("a single particle is returned regardless of weights") {
        auto m = brownian_model(1.0);
        ObservationSet obs(1);
        obs.add_slot(point_slot(5, 10.0, 0.1)); // far away, tiny weight
        ChainConfig cfg;
        cfg.n_particles = 1;
        cfg.seed = 11;
        const auto grid = grid_of(0.0, 0.1, 0.01);
        const auto ref = init_reference(m, obs, grid, cfg);
        const auto paths = simulate(m, grid, 1, 0); // different stream; just shape
        CHECK(ref.states.states.rows() == paths[0].states.rows());
    }
    SUBCASE("bootstrap filtering moments track the exact filter") {
        // zero drift, g = 1, three observation slots
        auto m = brownian_model(1.0);
        m.init = gaussian_init({0.0}, 1.0);
        const double dt = 0.01;
        const double sigma_obs = 0.5;
        const auto grid = grid_of(0.0, 0.5, dt);
        const std::map<std::size_t, double> slot_values = {
            {15, 0.6}, {30, -0.4}, {45, 0.9}};
        ObservationSet obs(1);
        for (const auto& [idx, y] : slot_values) {
            obs.add_slot(point_slot(idx, y, sigma_obs));
        }
        ChainConfig cfg;
        cfg.n_particles = 4000;
        cfg.seed = 99;
        FilterDiagnostics diag;
        (void)init_reference(m, obs, grid, cfg, &diag);

        const auto kalman = oracles::kalman_filter(grid->n_steps, slot_values, 0.0, 1.0,
                                                   1.0, dt, sigma_obs * sigma_obs);
        for (const auto& [idx, y] : slot_values) {
            const double se =
                std::sqrt(diag.slot_var.at(idx)[0] / diag.slot_ess.at(idx));
            CHECK(std::abs(diag.slot_mean.at(idx)[0] - kalman.mean[idx]) <
                  3.0 * se + 0.02);
            CHECK(diag.slot_var.at(idx)[0] ==
                  doctest::Approx(kalman.var[idx]).epsilon(0.25));
        }
    }
}

TEST_CASE("degenerate weights carry the step index") {
    auto m = brownian_model(1.0, 1e200);
    ObservationSet obs(1);
    obs.add_slot(point_slot(0, 0.0, 1e-3)); // squared distance overflows to inf
    ChainConfig cfg;
    cfg.n_particles = 4;
    cfg.seed = 1;
    try {
        (void)init_reference(m, obs, grid_of(0.0, 0.1, 0.01), cfg);
        FAIL("expected degenerate weights");
    } catch (const DegenerateWeightsError& e) {
        CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
}

TEST_CASE("conditional sweep") {
    SUBCASE("one particle reproduces the reference bit-exactly") {
        auto m = brownian_model(1.0);
        m.init = gaussian_init({0.0}, 1.0);
        const auto grid = grid_of(0.0, 0.3, 0.01);
        ObservationSet obs(1);
        obs.add_slot(point_slot(15, 0.2, 0.5));
        ChainConfig cfg;
        cfg.n_particles = 1;
        cfg.seed = 5;
        const auto ref = init_reference(m, obs, grid, cfg);
        const auto next = cpfas_sweep(m, obs, grid, ref, cfg, 1);
        CHECK(next.states.states == ref.states.states);
    }

    SUBCASE("zero diffusion cannot support ancestor sampling") {
        SdeModel m = brownian_model(0.0);
        const auto grid = grid_of(0.0, 0.1, 0.01);
        ObservationSet obs(1);
        ChainConfig cfg;
        cfg.n_particles = 3;
        cfg.seed = 2;
        const auto ref = init_reference(m, obs, grid, cfg);
        CHECK_THROWS_AS(cpfas_sweep(m, obs, grid, ref, cfg, 1),
                        DegenerateTransitionError);
    }

    SUBCASE("diff history stays consistent with the stored lineage") {
        SdeModel m;
        m.dim = 1;
        m.drift = pointwise_drift(kDoubleWell);
        m.g = DiffusionSchedule::constant(1.0);
        m.init = gaussian_init({0.0}, 0.5);
        const auto grid = grid_of(0.0, 0.2, 0.01);
        ObservationSet obs(1);
        obs.add_slot(point_slot(10, 0.5, 0.5));
        obs.add_slot(point_slot(20, -0.5, 0.5));
        ChainConfig cfg;
        cfg.n_particles = 30;
        cfg.seed = 17;
        auto ref = init_reference(m, obs, grid, cfg);
        for (std::uint32_t it = 1; it <= 3; ++it) {
            ref = cpfas_sweep(m, obs, grid, ref, cfg, it);
            for (std::size_t j = 0; j < grid->n_steps; ++j) {
                const Vec expected =
                    record_diff(m, ref.states.states.row_span(j),
                                ref.states.states.row_span(j + 1), grid->times[j],
                                grid->deltas[j]);
                CHECK(ref.diffs(j, 0) == expected[0]);
            }
        }
    }
}

TEST_CASE("chain driver") {
    auto m = brownian_model(1.0);
    m.init = gaussian_init({0.0}, 1.0);
    const auto grid = grid_of(0.0, 0.2, 0.01);
    ObservationSet obs(1);
    obs.add_slot(point_slot(10, 0.3, 0.5));

    SUBCASE("one iteration with no burn-in equals init + one sweep") {
        ChainConfig cfg;
        cfg.n_particles = 20;
        cfg.n_iterations = 1;
        cfg.burn_in = 0;
        cfg.seed = 23;
        const auto kept = run_chain(m, obs, grid, cfg);
        REQUIRE(kept.size() == 1);
        const auto ref0 = init_reference(m, obs, grid, cfg);
        const auto manual = cpfas_sweep(m, obs, grid, ref0, cfg, 1);
        CHECK(kept[0].states.states == manual.states.states);
        CHECK(kept[0].diffs == manual.diffs);
    }

    SUBCASE("burn-in defaults to half the iterations") {
        ChainConfig cfg;
        cfg.n_particles = 10;
        cfg.n_iterations = 8;
        cfg.seed = 29;
        const auto kept = run_chain(m, obs, grid, cfg);
        CHECK(kept.size() == 4);
    }

    SUBCASE("invalid configs are rejected") {
        ChainConfig cfg;
        cfg.n_particles = 0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg.n_particles = 5;
        cfg.n_iterations = 4;
        cfg.burn_in = 4;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }

    SUBCASE("parallel chains are deterministic and order-independent") {
        ChainConfig cfg;
        cfg.n_particles = 15;
        cfg.n_iterations = 6;
        cfg.burn_in = 2;
        cfg.n_chains = 3;
        cfg.seed = 31;
        cfg.max_workers = 2;
        const auto pooled_a = run_chains_parallel(m, obs, grid, cfg);
        const auto pooled_b = run_chains_parallel(m, obs, grid, cfg);
        ChainConfig seq = cfg;
        seq.max_workers = 1;
        const auto pooled_c = run_chains_parallel(m, obs, grid, seq);
        REQUIRE(pooled_a.size() == 12);
        REQUIRE(pooled_b.size() == pooled_a.size());
        REQUIRE(pooled_c.size() == pooled_a.size());
        for (std::size_t i = 0; i < pooled_a.size(); ++i) {
            CHECK(pooled_a[i].states.states == pooled_b[i].states.states);
            CHECK(pooled_a[i].states.states == pooled_c[i].states.states);
            CHECK(pooled_a[i].chain_id == pooled_c[i].chain_id);
        }
    }
}

TEST_CASE("smoothing marginals approach the closed-form smoother") {
    // zero drift, g = 1, two observation slots; pooled reference moments vs
    // the backward-pass baseline, at two chain lengths
    auto m = brownian_model(1.0);
    m.init = gaussian_init({0.0}, 1.0);
    const double dt = 0.02;
    const double sigma_obs = 0.5;
    const auto grid = grid_of(0.0, 1.0, dt);
    const std::map<std::size_t, double> slot_values = {{20, 0.8}, {40, -0.5}};
    ObservationSet obs(1);
    for (const auto& [idx, y] : slot_values) {
        obs.add_slot(point_slot(idx, y, sigma_obs));
    }
    const auto rts = oracles::rts_smoother(grid->n_steps, slot_values, 0.0, 1.0, 1.0,
                                           dt, sigma_obs * sigma_obs);

    auto pooled_error = [&](std::size_t iterations) {
        ChainConfig cfg;
        cfg.n_particles = 50;
        cfg.n_iterations = iterations;
        cfg.burn_in = iterations / 2;
        cfg.seed = 37;
        const auto kept = run_chain(m, obs, grid, cfg);
        double worst = 0.0;
        for (const auto& [idx, y] : slot_values) {
            std::vector<double> values;
            for (const auto& ref : kept) {
                values.push_back(ref.states.states(idx, 0));
            }
            worst = std::max(worst, std::abs(oracles::mean_of(values) - rts.mean[idx]));
        }
        return worst;
    };

    const double err_small = pooled_error(100);
    const double err_large = pooled_error(1000);
    CHECK(err_large < err_small + 0.05);
    CHECK(err_large < 0.12);
}

TEST_CASE("no observations: reference terminal samples follow the prior") {
    auto m = brownian_model(1.0);
    ObservationSet obs(1);
    const auto grid = grid_of(0.0, 1.0, 0.02);
    ChainConfig cfg;
    cfg.n_particles = 50;
    cfg.n_iterations = 500;
    cfg.burn_in = 0;
    cfg.seed = 41;
    const auto kept = run_chain(m, obs, grid, cfg);
    std::vector<double> terminal;
    for (const auto& ref : kept) {
        terminal.push_back(ref.states.states(grid->n_steps, 0));
    }
    const double d = oracles::ks_statistic_normal(terminal, 1.0);
    CHECK(oracles::ks_pvalue(d, terminal.size()) > 0.001);
}

TEST_CASE("particle index order does not bias the smoother") {
    // two init samplers emitting the same four points in opposite orders;
    // summary statistics over repeated seeds agree within Monte Carlo noise
    const Vec points = {-1.5, -0.5, 0.5, 1.5};
    auto make_init = [&](bool reversed) {
        return [&points, reversed](Matrix& out, RngStream&) {
            for (std::size_t i = 0; i < out.rows(); ++i) {
                const std::size_t k = i % points.size();
                out(i, 0) = points[reversed ? points.size() - 1 - k : k];
            }
        };
    };
    const auto grid = grid_of(0.0, 0.3, 0.01);
    ObservationSet obs(1);
    obs.add_slot(point_slot(15, 0.25, 0.5));

    auto summary = [&](bool reversed) {
        auto m = brownian_model(1.0);
        m.init = make_init(reversed);
        std::vector<double> terminals;
        for (std::uint64_t seed = 0; seed < 300; ++seed) {
            ChainConfig cfg;
            cfg.n_particles = 4;
            cfg.seed = 1000 + seed;
            const auto ref = init_reference(m, obs, grid, cfg);
            terminals.push_back(ref.states.states(grid->n_steps, 0));
        }
        return terminals;
    };
    const auto a = summary(false);
    const auto b = summary(true);
    const double se = std::sqrt(oracles::var_of(a) / static_cast<double>(a.size()) +
                                oracles::var_of(b) / static_cast<double>(b.size()));
    CHECK(std::abs(oracles::mean_of(a) - oracles::mean_of(b)) < 3.5 * se + 0.02);
}
