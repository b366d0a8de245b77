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
#include <random>

#include "oracles.hpp"
#include "smcsde/errors.hpp"
#include "smcsde/metrics.hpp"

using namespace smcsde;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(i, j) = rows[i][j];
        }
    }
    return m;
}

SampleSet set_of(const std::vector<std::vector<double>>& rows) {
    return SampleSet::uniform(from_rows(rows));
}

std::vector<std::vector<double>> random_points(std::mt19937& gen, std::size_t n,
                                               std::size_t d, double scale) {
    std::uniform_real_distribution<double> unif(-scale, scale);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& row : rows) {
        for (double& v : row) {
            v = unif(gen);
        }
    }
    return rows;
}

GridPtr grid_of(double t0, double t_end, double dt) {
    return std::make_shared<const TimeGrid>(make_uniform_grid(t0, t_end, dt));
}

Trajectory constant_path(const GridPtr& grid, std::vector<double> value) {
    Trajectory t;
    t.grid = grid;
    t.states.resize(grid->n_times(), value.size());
    for (std::size_t r = 0; r < t.states.rows(); ++r) {
        for (std::size_t j = 0; j < value.size(); ++j) {
            t.states(r, j) = value[j];
        }
    }
    return t;
}

} // namespace

TEST_CASE("transport distance on pinned examples") {
    CHECK(emd(set_of({{0.0}}), set_of({{3.0}})) == doctest::Approx(3.0));
    CHECK(emd(set_of({{0.0}, {1.0}}), set_of({{1.0}, {2.0}})) == doctest::Approx(1.0));
    const auto same = set_of({{0.2, -1.0}, {4.0, 2.0}, {1.0, 1.0}});
    CHECK(emd(same, same) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(emd(set_of({{0.0}}), set_of({{0.0, 1.0}})), ContractViolation);
}

TEST_CASE("assignment solve equals brute force on random small instances") {
    std::mt19937 gen(5);
    std::uniform_int_distribution<std::size_t> size_dist(1, 6);
    std::uniform_int_distribution<std::size_t> dim_dist(1, 3);
    for (int rep = 0; rep < 120; ++rep) {
        const std::size_t n = size_dist(gen);
        const std::size_t d = dim_dist(gen);
        const auto a = random_points(gen, n, d, 2.0);
        const auto b = random_points(gen, n, d, 2.0);
        const double fast = emd(set_of(a), set_of(b));
        const double brute = oracles::brute_force_emd(a, b);
        CHECK(fast == doctest::Approx(brute).epsilon(1e-9));
    }
}

TEST_CASE("unequal-size uniform sets match the 1D quantile coupling") {
    std::mt19937 gen(13);
    std::uniform_int_distribution<std::size_t> size_dist(1, 40);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t na = size_dist(gen);
        std::size_t nb = size_dist(gen);
        if (na == nb) {
            nb = na + 1;
        }
        std::vector<double> a(na), b(nb);
        for (double& v : a) {
            v = unif(gen);
        }
        for (double& v : b) {
            v = unif(gen);
        }
        Matrix ma(na, 1), mb(nb, 1);
        for (std::size_t i = 0; i < na; ++i) {
            ma(i, 0) = a[i];
        }
        for (std::size_t i = 0; i < nb; ++i) {
            mb(i, 0) = b[i];
        }
        const double fast = emd(SampleSet::uniform(ma), SampleSet::uniform(mb));
        CHECK(fast == doctest::Approx(oracles::w1_1d_uniform(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("weighted sets reduce to replicated uniform sets") {
    // {x1 w=2/3, x2 w=1/3} equals the uniform set {x1, x1, x2}
    Matrix pts(2, 1);
    pts(0, 0) = -1.0;
    pts(1, 0) = 2.0;
    const auto weighted = SampleSet::weighted(pts, {2.0 / 3.0, 1.0 / 3.0});
    const auto replicated = set_of({{-1.0}, {-1.0}, {2.0}});
    const auto target = set_of({{0.0}, {0.5}, {3.0}});
    CHECK(emd(weighted, target) == doctest::Approx(emd(replicated, target)).epsilon(1e-9));
}

TEST_CASE("transport distance is a metric on small random sets") {
    std::mt19937 gen(31);
    std::uniform_int_distribution<std::size_t> size_dist(2, 6);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = size_dist(gen);
        const auto a = set_of(random_points(gen, n, 2, 1.5));
        const auto b = set_of(random_points(gen, n, 2, 1.5));
        const auto c = set_of(random_points(gen, n, 2, 1.5));
        const double ab = emd(a, b);
        const double ba = emd(b, a);
        const double ac = emd(a, c);
        const double cb = emd(c, b);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-10));
        CHECK(ab <= ac + cb + 1e-9);
    }
}

TEST_CASE("translating both sets leaves the distance unchanged") {
    std::mt19937 gen(47);
    const auto a_rows = random_points(gen, 5, 3, 2.0);
    const auto b_rows = random_points(gen, 7, 3, 2.0);
    const double base = emd(set_of(a_rows), set_of(b_rows));
    auto shift = [](std::vector<std::vector<double>> rows) {
        for (auto& row : rows) {
            row[0] += 13.25;
            row[1] -= 4.5;
            row[2] += 0.125;
        }
        return rows;
    };
    const double shifted = emd(set_of(shift(a_rows)), set_of(shift(b_rows)));
    CHECK(shifted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("size cap subsamples reproducibly") {
    std::mt19937 gen(3);
    const auto big = set_of(random_points(gen, 300, 2, 1.0));
    const auto small = set_of(random_points(gen, 40, 2, 1.0));
    const EmdResult r1 = emd_capped(big, small, 100, 7);
    const EmdResult r2 = emd_capped(big, small, 100, 7);
    CHECK(r1.subsampled);
    CHECK(r1.n_a == 100);
    CHECK(r1.n_b == 40);
    CHECK(r1.value == r2.value);
    const EmdResult uncapped = emd_capped(big, small, 0, 7);
    CHECK_FALSE(uncapped.subsampled);
}

TEST_CASE("pool mean trajectory") {
    const auto grid = grid_of(0.0, 1.0, 0.25);
    SUBCASE("a single path is its own mean") {
        const auto t = constant_path(grid, {2.0, -1.0});
        const auto m = mean_trajectory({t});
        CHECK(m.states == t.states);
    }
    SUBCASE("two constant paths average pointwise") {
        const auto m =
            mean_trajectory({constant_path(grid, {0.0}), constant_path(grid, {2.0})});
        for (std::size_t r = 0; r < m.states.rows(); ++r) {
            CHECK(m.states(r, 0) == doctest::Approx(1.0));
        }
    }
    SUBCASE("permutation of the pool does not change the mean") {
        std::vector<Trajectory> pool = {constant_path(grid, {0.5}),
                                        constant_path(grid, {1.25}),
                                        constant_path(grid, {-3.0})};
        const auto m1 = mean_trajectory(pool);
        std::swap(pool[0], pool[2]);
        const auto m2 = mean_trajectory(pool);
        for (std::size_t r = 0; r < m1.states.rows(); ++r) {
            CHECK(m1.states(r, 0) == doctest::Approx(m2.states(r, 0)).epsilon(1e-15));
        }
    }
    SUBCASE("grids must match") {
        const auto other = grid_of(0.0, 2.0, 0.5);
        CHECK_THROWS_AS(
            mean_trajectory({constant_path(grid, {0.0}), constant_path(other, {0.0})}),
            ContractViolation);
    }
}

TEST_CASE("trajectory error against observations") {
    const auto grid = grid_of(0.0, 1.0, 0.25);
    ObservationSet obs(1);
    Matrix p1(1, 1);
    p1(0, 0) = 0.5;
    obs.add_slot(ObservationSlot(2, std::move(p1), 1.0, 1, ObsMode::kSingle));

    SUBCASE("exact hit gives zero") {
        const auto t = constant_path(grid, {0.5});
        CHECK(trajectory_mse(t, obs) == doctest::Approx(0.0));
    }
    SUBCASE("single slot squared error") {
        const auto t = constant_path(grid, {0.0});
        CHECK(trajectory_mse(t, obs) == doctest::Approx(0.25));
    }
    SUBCASE("multiple points average") {
        ObservationSet multi(1);
        Matrix pts(2, 1);
        pts(0, 0) = 1.0;
        pts(1, 0) = -1.0;
        multi.add_slot(ObservationSlot(1, std::move(pts), 1.0, 2, ObsMode::kKnn));
        const auto t = constant_path(grid, {0.0});
        CHECK(trajectory_mse(t, multi) == doctest::Approx(1.0));
    }
    SUBCASE("no slots is a contract violation") {
        ObservationSet empty(1);
        CHECK_THROWS_AS(trajectory_mse(constant_path(grid, {0.0}), empty),
                        ContractViolation);
    }
}
