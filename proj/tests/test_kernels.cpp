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
#include <vector>

#include "smcsde/kernels.hpp"
#include "smcsde/rng.hpp"

using namespace smcsde;

namespace {

std::vector<double> random_vec(std::size_t n, RngStream& rng, double scale = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) {
        x = scale * rng.next_gaussian();
    }
    return v;
}

bool close_rel(double a, double b, double tol) {
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) <= tol * scale;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b,
                 double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CAPTURE(i);
        CHECK(close_rel(a[i], b[i], tol));
    }
}

} // namespace

TEST_CASE("scalar em_update matches the explicit formula") {
    const auto& k = kern::scalar::ops;
    std::vector<double> x = {1.0, 2.0};
    std::vector<double> f = {0.5, -0.25};
    std::vector<double> n = {1.0, -1.0};
    std::vector<double> y(2);
    k.em_update(x.data(), f.data(), n.data(), 0.1, 0.2, y.data(), 2);
    CHECK(y[0] == doctest::Approx(1.0 + 0.05 + 0.2).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(2.0 - 0.025 - 0.2).epsilon(1e-15));
}

TEST_CASE("scalar gemm_nn against a tiny hand computation") {
    const auto& k = kern::scalar::ops;
    // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
    std::vector<double> a = {1, 2, 3, 4};
    std::vector<double> b = {5, 6, 7, 8};
    std::vector<double> c(4);
    k.gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2);
    CHECK(c == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("gemm_nt and gemm_tn agree with gemm_nn on transposed operands") {
    const auto& k = kern::scalar::ops;
    RngStream rng(11);
    const std::size_t m = 7, kk = 5, n = 9;
    auto a = random_vec(m * kk, rng);
    auto b = random_vec(kk * n, rng);
    std::vector<double> c_ref(m * n);
    k.gemm_nn(a.data(), b.data(), c_ref.data(), m, kk, n);

    // B^T stored (n x kk)
    std::vector<double> bt(n * kk);
    for (std::size_t i = 0; i < kk; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            bt[j * kk + i] = b[i * n + j];
        }
    }
    std::vector<double> c_nt(m * n);
    k.gemm_nt(a.data(), bt.data(), c_nt.data(), m, kk, n);
    check_close(c_ref, c_nt, 1e-12);

    // A^T stored (kk x m)
    std::vector<double> at(kk * m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < kk; ++j) {
            at[j * m + i] = a[i * kk + j];
        }
    }
    std::vector<double> c_tn(m * n);
    k.gemm_tn(at.data(), b.data(), c_tn.data(), m, kk, n);
    check_close(c_ref, c_tn, 1e-12);
}

TEST_CASE("logsumexp is shift invariant and handles -inf entries") {
    const auto& k = kern::scalar::ops;
    std::vector<double> lw = {-1.0, 0.0, 2.0};
    const double base = k.logsumexp(lw.data(), lw.size());
    for (double& v : lw) {
        v += 1000.0;
    }
    CHECK(k.logsumexp(lw.data(), lw.size()) == doctest::Approx(base + 1000.0));

    std::vector<double> with_inf = {-std::numeric_limits<double>::infinity(), 0.0};
    CHECK(k.logsumexp(with_inf.data(), 2) == doctest::Approx(0.0));
}

#if defined(__x86_64__)

TEST_CASE("vector kernels match scalar within rounding error") {
    if (!kern::avx2_available()) {
        return; // nothing to compare on this machine
    }
    const auto& s = kern::scalar::ops;
    const auto& v = kern::avx2::ops;
    RngStream rng(42);

    for (std::size_t len : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 13u, 64u, 129u}) {
        CAPTURE(len);
        auto x = random_vec(len, rng);
        auto f = random_vec(len, rng);
        auto n = random_vec(len, rng);
        std::vector<double> ys(len), yv(len);
        s.em_update(x.data(), f.data(), n.data(), 0.01, 0.37, ys.data(), len);
        v.em_update(x.data(), f.data(), n.data(), 0.01, 0.37, yv.data(), len);
        check_close(ys, yv, 1e-14);

        auto x1 = random_vec(len, rng);
        auto f1 = random_vec(len, rng);
        std::vector<double> ds(len), dv(len);
        s.mean_diff(x.data(), x1.data(), f.data(), f1.data(), 0.01, ds.data(), len);
        v.mean_diff(x.data(), x1.data(), f.data(), f1.data(), 0.01, dv.data(), len);
        check_close(ds, dv, 1e-14);

        CHECK(close_rel(s.sumsq(x.data(), len), v.sumsq(x.data(), len), 1e-13));
        CHECK(close_rel(s.dot(x.data(), f.data(), len), v.dot(x.data(), f.data(), len),
                        1e-13));
        CHECK(close_rel(s.logsumexp(x.data(), len), v.logsumexp(x.data(), len), 1e-13));

        std::vector<double> ts = x, tv = x;
        s.tanh_inplace(ts.data(), len);
        v.tanh_inplace(tv.data(), len);
        CHECK(ts == tv); // both call libm tanh

        auto g = random_vec(len, rng);
        std::vector<double> gs = g, gv = g;
        s.tanh_backward(gs.data(), ts.data(), len);
        v.tanh_backward(gv.data(), ts.data(), len);
        check_close(gs, gv, 1e-14);

        std::vector<double> as = x, av = x;
        s.axpy(0.31, f.data(), as.data(), len);
        v.axpy(0.31, f.data(), av.data(), len);
        check_close(as, av, 1e-14);
    }
}

TEST_CASE("vector distance and matmul kernels match scalar across shapes") {
    if (!kern::avx2_available()) {
        return;
    }
    const auto& s = kern::scalar::ops;
    const auto& v = kern::avx2::ops;
    RngStream rng(7);

    for (std::size_t d : {1u, 2u, 3u, 5u, 8u}) {
        for (std::size_t n : {1u, 2u, 5u, 33u}) {
            CAPTURE(d);
            CAPTURE(n);
            auto pts = random_vec(n * d, rng, 2.0);
            auto q = random_vec(d, rng, 2.0);
            std::vector<double> outs(n), outv(n);
            s.sqdist_rows(pts.data(), n, d, q.data(), outs.data());
            v.sqdist_rows(pts.data(), n, d, q.data(), outv.data());
            check_close(outs, outv, 1e-13);
        }
    }

    struct Shape {
        std::size_t m, k, n;
    };
    for (const Shape& sh : {Shape{1, 3, 1}, Shape{4, 8, 8}, Shape{5, 7, 11},
                            Shape{16, 34, 128}, Shape{33, 128, 2}}) {
        CAPTURE(sh.m);
        CAPTURE(sh.n);
        auto a = random_vec(sh.m * sh.k, rng);
        auto b = random_vec(sh.k * sh.n, rng);
        std::vector<double> cs(sh.m * sh.n), cv(sh.m * sh.n);
        s.gemm_nn(a.data(), b.data(), cs.data(), sh.m, sh.k, sh.n);
        v.gemm_nn(a.data(), b.data(), cv.data(), sh.m, sh.k, sh.n);
        check_close(cs, cv, 1e-12);

        auto bt = random_vec(sh.n * sh.k, rng);
        s.gemm_nt(a.data(), bt.data(), cs.data(), sh.m, sh.k, sh.n);
        v.gemm_nt(a.data(), bt.data(), cv.data(), sh.m, sh.k, sh.n);
        check_close(cs, cv, 1e-12);

        auto at = random_vec(sh.k * sh.m, rng);
        s.gemm_tn(at.data(), b.data(), cs.data(), sh.m, sh.k, sh.n);
        v.gemm_tn(at.data(), b.data(), cv.data(), sh.m, sh.k, sh.n);
        check_close(cs, cv, 1e-12);

        std::vector<double> bias = random_vec(sh.n, rng);
        std::vector<double> rs = cs, rv = cs;
        s.add_bias_rows(rs.data(), bias.data(), sh.m, sh.n);
        v.add_bias_rows(rv.data(), bias.data(), sh.m, sh.n);
        check_close(rs, rv, 1e-14);

        std::vector<double> sums_s(sh.n), sums_v(sh.n);
        s.colsum(cs.data(), sh.m, sh.n, sums_s.data());
        v.colsum(cs.data(), sh.m, sh.n, sums_v.data());
        check_close(sums_s, sums_v, 1e-12);
    }
}

#endif // x86-64

TEST_CASE("batched em_update equals elementwise application") {
    const auto& k = kern::active();
    RngStream rng(3);
    auto x = random_vec(64, rng);
    auto f = random_vec(64, rng);
    auto n = random_vec(64, rng);
    std::vector<double> whole(64), parts(64);
    k.em_update(x.data(), f.data(), n.data(), 0.05, 1.3, whole.data(), 64);
    for (std::size_t i = 0; i < 64; ++i) {
        k.em_update(x.data() + i, f.data() + i, n.data() + i, 0.05, 1.3,
                    parts.data() + i, 1);
    }
    // scalar tail of the vector kernel uses fma; whole-array path does too
    check_close(whole, parts, 1e-15);
}
