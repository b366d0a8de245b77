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

// AVX2 + FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; nothing here runs unless the dispatcher verified CPU support.

#if defined(__x86_64__) || defined(_M_X64)

#include "smcsde/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace smcsde::kern::avx2 {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void em_update(const double* x, const double* f, const double* n, double dt,
               double s, double* y, std::size_t len) {
    const __m256d vdt = _mm256_set1_pd(dt);
    const __m256d vs = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        __m256d acc = _mm256_fmadd_pd(vdt, _mm256_loadu_pd(f + i), _mm256_loadu_pd(x + i));
        acc = _mm256_fmadd_pd(vs, _mm256_loadu_pd(n + i), acc);
        _mm256_storeu_pd(y + i, acc);
    }
    for (; i < len; ++i) {
        y[i] = std::fma(s, n[i], std::fma(dt, f[i], x[i]));
    }
}

void mean_diff(const double* x0, const double* x1, const double* f0,
               const double* f1, double dt, double* out, std::size_t len) {
    const __m256d vdt = _mm256_set1_pd(dt);
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(x1 + i), _mm256_loadu_pd(x0 + i));
        const __m256d df = _mm256_sub_pd(_mm256_loadu_pd(f1 + i), _mm256_loadu_pd(f0 + i));
        _mm256_storeu_pd(out + i, _mm256_fmadd_pd(vdt, df, dx));
    }
    for (; i < len; ++i) {
        out[i] = std::fma(dt, f1[i] - f0[i], x1[i] - x0[i]);
    }
}

void sqdist_rows(const double* pts, std::size_t n, std::size_t d,
                 const double* q, double* out) {
    if (d == 1) {
        const __m256d vq = _mm256_set1_pd(q[0]);
        std::size_t p = 0;
        for (; p + 4 <= n; p += 4) {
            const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(pts + p), vq);
            _mm256_storeu_pd(out + p, _mm256_mul_pd(diff, diff));
        }
        for (; p < n; ++p) {
            const double diff = pts[p] - q[0];
            out[p] = diff * diff;
        }
        return;
    }
    if (d == 2) {
        const __m256d vq = _mm256_setr_pd(q[0], q[1], q[0], q[1]);
        std::size_t p = 0;
        for (; p + 2 <= n; p += 2) {
            const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(pts + 2 * p), vq);
            const __m256d sq = _mm256_mul_pd(diff, diff);
            // lanes: [dx0^2, dy0^2, dx1^2, dy1^2]
            const __m256d sums = _mm256_hadd_pd(sq, sq);
            out[p] = _mm_cvtsd_f64(_mm256_castpd256_pd128(sums));
            out[p + 1] = _mm_cvtsd_f64(_mm256_extractf128_pd(sums, 1));
        }
        for (; p < n; ++p) {
            const double dx = pts[2 * p] - q[0];
            const double dy = pts[2 * p + 1] - q[1];
            out[p] = dx * dx + dy * dy;
        }
        return;
    }
    for (std::size_t p = 0; p < n; ++p) {
        const double* row = pts + p * d;
        __m256d vacc = _mm256_setzero_pd();
        std::size_t j = 0;
        for (; j + 4 <= d; j += 4) {
            const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(q + j));
            vacc = _mm256_fmadd_pd(diff, diff, vacc);
        }
        double acc = hsum(vacc);
        for (; j < d; ++j) {
            const double diff = row[j] - q[j];
            acc += diff * diff;
        }
        out[p] = acc;
    }
}

double sumsq(const double* x, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d v0 = _mm256_loadu_pd(x + i);
        const __m256d v1 = _mm256_loadu_pd(x + i + 4);
        a0 = _mm256_fmadd_pd(v0, v0, a0);
        a1 = _mm256_fmadd_pd(v1, v1, a1);
    }
    double acc = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) {
        acc += x[i] * x[i];
    }
    return acc;
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), a1);
    }
    double acc = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double logsumexp(const double* x, std::size_t n) {
    __m256d vmax = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(x + i));
    }
    double mx = -std::numeric_limits<double>::infinity();
    alignas(32) double tmp[4];
    _mm256_store_pd(tmp, vmax);
    for (double v : tmp) {
        mx = std::max(mx, v);
    }
    for (; i < n; ++i) {
        mx = std::max(mx, x[i]);
    }
    if (!std::isfinite(mx)) {
        return mx;
    }
    // exp stays scalar libm so scalar and vector variants agree exactly
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        acc += std::exp(x[j] - mx);
    }
    return mx + std::log(acc);
}

// 4x8 register-tiled microkernel shared by gemm_nn and gemm_tn. `lda` walks
// A either row-wise (nn) or column-wise (tn).
template <bool Transposed>
void gemm_block(const double* a, const double* b, double* c, std::size_t m,
                std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    auto a_at = [&](std::size_t i, std::size_t p) {
        return Transposed ? a[p * m + i] : a[i * k + p];
    };
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        std::size_t j = 0;
        for (; j + 8 <= n; j += 8) {
            __m256d acc00 = _mm256_setzero_pd(), acc01 = _mm256_setzero_pd();
            __m256d acc10 = _mm256_setzero_pd(), acc11 = _mm256_setzero_pd();
            __m256d acc20 = _mm256_setzero_pd(), acc21 = _mm256_setzero_pd();
            __m256d acc30 = _mm256_setzero_pd(), acc31 = _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                const double* brow = b + p * n + j;
                const __m256d b0 = _mm256_loadu_pd(brow);
                const __m256d b1 = _mm256_loadu_pd(brow + 4);
                const __m256d a0 = _mm256_set1_pd(a_at(i, p));
                const __m256d a1 = _mm256_set1_pd(a_at(i + 1, p));
                const __m256d a2 = _mm256_set1_pd(a_at(i + 2, p));
                const __m256d a3 = _mm256_set1_pd(a_at(i + 3, p));
                acc00 = _mm256_fmadd_pd(a0, b0, acc00);
                acc01 = _mm256_fmadd_pd(a0, b1, acc01);
                acc10 = _mm256_fmadd_pd(a1, b0, acc10);
                acc11 = _mm256_fmadd_pd(a1, b1, acc11);
                acc20 = _mm256_fmadd_pd(a2, b0, acc20);
                acc21 = _mm256_fmadd_pd(a2, b1, acc21);
                acc30 = _mm256_fmadd_pd(a3, b0, acc30);
                acc31 = _mm256_fmadd_pd(a3, b1, acc31);
            }
            _mm256_storeu_pd(c + (i + 0) * n + j, acc00);
            _mm256_storeu_pd(c + (i + 0) * n + j + 4, acc01);
            _mm256_storeu_pd(c + (i + 1) * n + j, acc10);
            _mm256_storeu_pd(c + (i + 1) * n + j + 4, acc11);
            _mm256_storeu_pd(c + (i + 2) * n + j, acc20);
            _mm256_storeu_pd(c + (i + 2) * n + j + 4, acc21);
            _mm256_storeu_pd(c + (i + 3) * n + j, acc30);
            _mm256_storeu_pd(c + (i + 3) * n + j + 4, acc31);
        }
        for (; j < n; ++j) {
            for (std::size_t r = 0; r < 4; ++r) {
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) {
                    acc = std::fma(a_at(i + r, p), b[p * n + j], acc);
                }
                c[(i + r) * n + j] = acc;
            }
        }
    }
    for (; i < m; ++i) {
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t p = 0; p < k; ++p) {
                acc = _mm256_fmadd_pd(_mm256_set1_pd(a_at(i, p)),
                                      _mm256_loadu_pd(b + p * n + j), acc);
            }
            _mm256_storeu_pd(c + i * n + j, acc);
        }
        for (; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc = std::fma(a_at(i, p), b[p * n + j], acc);
            }
            c[i * n + j] = acc;
        }
    }
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
    gemm_block<false>(a, b, c, m, k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
    gemm_block<true>(a, b, c, m, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            crow[j] = dot(arow, b + j * k, k);
        }
    }
}

void add_bias_rows(double* c, const double* bias, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j),
                                                     _mm256_loadu_pd(bias + j)));
        }
        for (; j < n; ++j) {
            crow[j] += bias[j];
        }
    }
}

void colsum(const double* a, std::size_t m, std::size_t n, double* out) {
    std::memset(out, 0, n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            _mm256_storeu_pd(out + j, _mm256_add_pd(_mm256_loadu_pd(out + j),
                                                    _mm256_loadu_pd(arow + j)));
        }
        for (; j < n; ++j) {
            out[j] += arow[j];
        }
    }
}

void tanh_inplace(double* x, std::size_t n) {
    // libm tanh in both variants keeps scalar/vector results identical
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::tanh(x[i]);
    }
}

void tanh_backward(double* g, const double* h, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d hv = _mm256_loadu_pd(h + i);
        const __m256d factor = _mm256_fnmadd_pd(hv, hv, one);
        _mm256_storeu_pd(g + i, _mm256_mul_pd(_mm256_loadu_pd(g + i), factor));
    }
    for (; i < n; ++i) {
        g[i] *= 1.0 - h[i] * h[i];
    }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) {
        y[i] = std::fma(alpha, x[i], y[i]);
    }
}

} // namespace

const Ops ops = {
    em_update, mean_diff,     sqdist_rows, sumsq,  dot,          logsumexp,
    gemm_nn,   gemm_nt,       gemm_tn,     add_bias_rows, colsum,
    tanh_inplace, tanh_backward, axpy,
};

} // namespace smcsde::kern::avx2

#endif // x86-64
