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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "smcsde/errors.hpp"
#include "smcsde/observations.hpp"

using namespace smcsde;

namespace {

Matrix points_1d(std::initializer_list<double> values) {
    Matrix m(values.size(), 1);
    std::size_t i = 0;
    for (double v : values) {
        m(i++, 0) = v;
    }
    return m;
}

ObservationSlot single_slot(std::size_t idx, std::initializer_list<double> y,
                            double sigma) {
    Matrix pt(1, y.size());
    std::size_t j = 0;
    for (double v : y) {
        pt(0, j++) = v;
    }
    return ObservationSlot(idx, std::move(pt), sigma, 1, ObsMode::kSingle);
}

// reference: sort all squared distances, sum the h smallest
double knn_brute(const Matrix& pts, std::span<const double> x, std::size_t h,
                 double sigma) {
    std::vector<double> d2(pts.rows());
    for (std::size_t p = 0; p < pts.rows(); ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < pts.cols(); ++j) {
            const double diff = pts(p, j) - x[j];
            acc += diff * diff;
        }
        d2[p] = acc;
    }
    std::sort(d2.begin(), d2.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
        sum += d2[i];
    }
    return -0.5 * sum / (sigma * sigma);
}

} // namespace

TEST_CASE("slot construction enforces its invariants") {
    CHECK_THROWS_AS(ObservationSlot(0, Matrix(0, 1), 1.0, 1, ObsMode::kSingle),
                    ContractViolation);
    CHECK_THROWS_AS(ObservationSlot(0, points_1d({1.0}), 0.0, 1, ObsMode::kSingle),
                    ContractViolation);
    CHECK_THROWS_AS(ObservationSlot(0, points_1d({1.0, 2.0}), 1.0, 3, ObsMode::kKnn),
                    ContractViolation);
    CHECK_THROWS_AS(ObservationSlot(0, points_1d({1.0, 2.0}), 1.0, 0, ObsMode::kKnn),
                    ContractViolation);
}

TEST_CASE("single-point log weight") {
    const auto slot = single_slot(0, {1.0, 0.0}, 1.0);
    CHECK(log_weight_single(slot, Vec{1.0, 0.0}) == 0.0);
    CHECK(log_weight_single(slot, Vec{0.0, 0.0}) == doctest::Approx(-0.5));

    const auto sharp = single_slot(0, {1.0, 0.0}, 0.1);
    CHECK(log_weight_single(sharp, Vec{0.0, 0.0}) == doctest::Approx(-50.0));

    CHECK_THROWS_AS(log_weight_single(slot, Vec{0.0}), ContractViolation);
}

TEST_CASE("nearest-neighbour log weight") {
    SUBCASE("closest of {1, -2} to 0 is 1") {
        ObservationSlot slot(0, points_1d({1.0, -2.0}), 1.0, 1, ObsMode::kKnn);
        CHECK(log_weight_knn(slot, Vec{0.0}) == doctest::Approx(-0.5));
    }
    SUBCASE("both of {1, -1} from 0") {
        ObservationSlot slot(0, points_1d({1.0, -1.0}), 1.0, 2, ObsMode::kKnn);
        CHECK(log_weight_knn(slot, Vec{0.0}) == doctest::Approx(-1.0));
    }
    SUBCASE("points on a circle are equidistant from the center") {
        const std::size_t n = 10;
        Matrix pts(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
            pts(i, 0) = std::cos(a);
            pts(i, 1) = std::sin(a);
        }
        ObservationSlot slot(0, std::move(pts), 0.5, 3, ObsMode::kKnn);
        CHECK(log_weight_knn(slot, Vec{0.0, 0.0}) ==
              doctest::Approx(knn_brute(slot.points(), Vec{0.0, 0.0}, 3, 0.5)));
        CHECK(log_weight_knn(slot, Vec{0.0, 0.0}) == doctest::Approx(-6.0));
    }
}

TEST_CASE("knn weight properties") {
    std::mt19937 gen(21);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 3 + gen() % 8;
        const std::size_t d = 1 + gen() % 3;
        Matrix pts(n, d);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            pts.data()[i] = unif(gen);
        }
        Vec x(d);
        for (auto& v : x) {
            v = unif(gen);
        }
        const std::size_t h = 1 + gen() % n;
        const double sigma = 0.3 + 0.5 * unif(gen) * unif(gen);

        ObservationSlot slot(0, pts, sigma, h, ObsMode::kKnn);
        const double w = log_weight_knn(slot, x);
        CHECK(w == doctest::Approx(knn_brute(pts, x, h, sigma)).epsilon(1e-12));

        // permuting the point rows changes nothing
        Matrix shuffled(n, d);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), gen);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                shuffled(i, j) = pts(order[i], j);
            }
        }
        ObservationSlot slot_shuffled(0, std::move(shuffled), sigma, h, ObsMode::kKnn);
        CHECK(log_weight_knn(slot_shuffled, x) == doctest::Approx(w).epsilon(1e-12));

        // H = n equals the plain sum over all points
        ObservationSlot slot_all(0, pts, sigma, n, ObsMode::kKnn);
        CHECK(log_weight_knn(slot_all, x) ==
              doctest::Approx(knn_brute(pts, x, n, sigma)).epsilon(1e-12));

        // halving sigma quadruples the magnitude
        ObservationSlot slot_half(0, pts, 0.5 * sigma, h, ObsMode::kKnn);
        CHECK(log_weight_knn(slot_half, x) == doctest::Approx(4.0 * w).epsilon(1e-10));
    }
}

TEST_CASE("weights_at dispatch") {
    ObservationSet obs(1);
    obs.add_slot(single_slot(5, {0.5}, 1.0));

    Matrix particles(2, 1);
    particles(0, 0) = 0.0;
    particles(1, 0) = 1.0;

    SUBCASE("no slot means uniform sentinel") {
        CHECK_FALSE(weights_at(obs, 3, particles).has_value());
    }
    SUBCASE("equidistant particles get equal weights") {
        const auto lw = weights_at(obs, 5, particles);
        REQUIRE(lw.has_value());
        CHECK((*lw)[0] == doctest::Approx((*lw)[1]));
    }
    SUBCASE("knn slot matches the per-particle loop") {
        ObservationSet knn_obs(1);
        Matrix pts = points_1d({-1.0, 0.25, 2.0, 0.8});
        ObservationSlot slot(2, pts, 0.5 * 0.01, 2, ObsMode::kKnn);
        knn_obs.add_slot(slot);
        const auto lw = weights_at(knn_obs, 2, particles);
        REQUIRE(lw.has_value());
        for (std::size_t i = 0; i < particles.rows(); ++i) {
            CHECK((*lw)[i] ==
                  doctest::Approx(log_weight_knn(slot, particles.row_span(i))));
        }
    }
}

TEST_CASE("observation set invariants") {
    ObservationSet obs(1);
    obs.add_slot(single_slot(1, {0.0}, 1.0));
    CHECK_THROWS_AS(obs.add_slot(single_slot(1, {2.0}, 1.0)), ContractViolation);
    CHECK_THROWS_AS(obs.mark_terminal(7), ContractViolation);

    // rank-deficient projection is rejected
    Matrix bad(2, 2);
    bad(0, 0) = 1.0;
    bad(0, 1) = 2.0;
    bad(1, 0) = 2.0;
    bad(1, 1) = 4.0;
    CHECK_THROWS_AS(ObservationSet(2, std::move(bad)), ContractViolation);

    Matrix proj(1, 2);
    proj(0, 0) = 1.0;
    proj(0, 1) = 0.0;
    ObservationSet projected(2, std::move(proj));
    Vec out(1);
    projected.project(Vec{3.0, 9.0}, out);
    CHECK(out[0] == 3.0);
}

TEST_CASE("log-weight normalization") {
    SUBCASE("two equal weights") {
        const Vec p = normalize_log_weights(Vec{0.0, 0.0});
        CHECK(p[0] == doctest::Approx(0.5));
        CHECK(p[1] == doctest::Approx(0.5));
    }
    SUBCASE("ratio one to three") {
        const Vec p = normalize_log_weights(Vec{std::log(1.0), std::log(3.0)});
        CHECK(p[0] == doctest::Approx(0.25));
        CHECK(p[1] == doctest::Approx(0.75));
    }
    SUBCASE("shift invariance is exact") {
        const Vec lw = {-3.0, -1.0, -2.5, 0.0};
        Vec shifted = lw;
        for (double& v : shifted) {
            v += 1000.0;
        }
        const Vec a = normalize_log_weights(lw);
        const Vec b = normalize_log_weights(shifted);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));
        }
        double sum = 0.0;
        for (double v : a) {
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("all -inf is degenerate") {
        const double ninf = -std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(normalize_log_weights(Vec{ninf, ninf}), DegenerateWeightsError);
    }
}
