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

#include "smcsde/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace smcsde::kern::scalar {
namespace {

void em_update(const double* x, const double* f, const double* n, double dt,
               double s, double* y, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) {
        y[i] = x[i] + dt * f[i] + s * n[i];
    }
}

void mean_diff(const double* x0, const double* x1, const double* f0,
               const double* f1, double dt, double* out, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) {
        out[i] = (x1[i] - x0[i]) + dt * (f1[i] - f0[i]);
    }
}

void sqdist_rows(const double* pts, std::size_t n, std::size_t d,
                 const double* q, double* out) {
    for (std::size_t p = 0; p < n; ++p) {
        const double* row = pts + p * d;
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = row[j] - q[j];
            acc += diff * diff;
        }
        out[p] = acc;
    }
}

double sumsq(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] * x[i];
    }
    return acc;
}

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double logsumexp(const double* x, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        mx = std::max(mx, x[i]);
    }
    if (!std::isfinite(mx)) {
        return mx; // all -inf (or a stray inf); caller guards
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += std::exp(x[i] - mx);
    }
    return mx + std::log(acc);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += arow[p] * brow[p];
            }
            crow[j] = acc;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

void add_bias_rows(double* c, const double* bias, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            crow[j] += bias[j];
        }
    }
}

void colsum(const double* a, std::size_t m, std::size_t n, double* out) {
    std::memset(out, 0, n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += arow[j];
        }
    }
}

void tanh_inplace(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::tanh(x[i]);
    }
}

void tanh_backward(double* g, const double* h, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        g[i] *= 1.0 - h[i] * h[i];
    }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

} // namespace

const Ops ops = {
    em_update, mean_diff,     sqdist_rows, sumsq,  dot,          logsumexp,
    gemm_nn,   gemm_nt,       gemm_tn,     add_bias_rows, colsum,
    tanh_inplace, tanh_backward, axpy,
};

} // namespace smcsde::kern::scalar
