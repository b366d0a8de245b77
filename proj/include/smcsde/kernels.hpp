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
#include <string>

namespace smcsde::kern {

// Data-parallel inner loops behind the whole pipeline. Each kernel exists as
// a scalar reference implementation and (on x86-64 with AVX2+FMA) a vector
// variant; the active set is chosen once at startup. The two variants agree
// to rounding error, not bitwise: the vector code reassociates sums.
struct Ops {
    // y[i] = x[i] + dt * f[i] + s * n[i]
    void (*em_update)(const double* x, const double* f, const double* n,
                      double dt, double s, double* y, std::size_t len);
    // out[i] = (x1[i] - x0[i]) + dt * (f1[i] - f0[i])
    void (*mean_diff)(const double* x0, const double* x1, const double* f0,
                      const double* f1, double dt, double* out, std::size_t len);
    // out[p] = sum_j (pts[p*d + j] - q[j])^2 for p in [0, n)
    void (*sqdist_rows)(const double* pts, std::size_t n, std::size_t d,
                        const double* q, double* out);
    double (*sumsq)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    // log(sum_i exp(x[i])); -inf entries allowed, at least one finite entry
    // assumed by the caller.
    double (*logsumexp)(const double* x, std::size_t n);
    // C(MxN) = A(MxK) * B(KxN), row-major, C overwritten
    void (*gemm_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
    // C(MxN) = A(MxK) * B^T with B stored (NxK) row-major
    void (*gemm_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
    // C(MxN) = A^T * B with A stored (KxM), B stored (KxN) row-major
    void (*gemm_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n);
    // rows of C(MxN) += bias(N)
    void (*add_bias_rows)(double* c, const double* bias, std::size_t m, std::size_t n);
    // out[j] = sum_i a[i*n + j]
    void (*colsum)(const double* a, std::size_t m, std::size_t n, double* out);
    // elementwise x = tanh(x); both variants call libm tanh so results match
    // bitwise, only the surrounding loop differs
    void (*tanh_inplace)(double* x, std::size_t n);
    // g[i] *= (1 - h[i]^2) where h = tanh(z) from the forward pass
    void (*tanh_backward)(double* g, const double* h, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

namespace scalar {
extern const Ops ops;
}

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
extern const Ops ops; // call only if avx2_available()
}
bool avx2_available();
#endif

// Active kernel set. Resolved on first use: AVX2 when the CPU supports it,
// scalar otherwise. SMCSDE_KERNELS=scalar|avx2 overrides.
const Ops& active();
const std::string& active_name();

} // namespace smcsde::kern
