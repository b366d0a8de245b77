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

// Closed-form and brute-force baselines used only by tests. Everything here
// is independent of the library's computational path.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

namespace oracles {

// ---------------------------------------------------------------------------
// Scalar linear-Gaussian state-space baselines on the discretized model
//   x_{j+1} = phi x_j + w,  w ~ N(0, q)
//   y_j     = x_j + v,      v ~ N(0, r)   at slot indices only
// ---------------------------------------------------------------------------

struct KalmanResult {
    std::vector<double> mean; // per grid index, posterior given data up to it
    std::vector<double> var;
};

inline KalmanResult kalman_filter(std::size_t n_steps,
                                  const std::map<std::size_t, double>& slots,
                                  double x0_mean, double x0_var, double phi, double q,
                                  double r) {
    KalmanResult res;
    res.mean.resize(n_steps + 1);
    res.var.resize(n_steps + 1);
    double m = x0_mean;
    double p = x0_var;
    auto update = [&](std::size_t j) {
        const auto it = slots.find(j);
        if (it != slots.end()) {
            const double k = p / (p + r);
            m = m + k * (it->second - m);
            p = (1.0 - k) * p;
        }
        res.mean[j] = m;
        res.var[j] = p;
    };
    update(0);
    for (std::size_t j = 1; j <= n_steps; ++j) {
        m = phi * m;
        p = phi * phi * p + q;
        update(j);
    }
    return res;
}

inline KalmanResult rts_smoother(std::size_t n_steps,
                                 const std::map<std::size_t, double>& slots,
                                 double x0_mean, double x0_var, double phi, double q,
                                 double r) {
    // forward pass storing filtered and one-step-ahead moments
    std::vector<double> mf(n_steps + 1), pf(n_steps + 1);
    std::vector<double> mp(n_steps + 1), pp(n_steps + 1);
    double m = x0_mean;
    double p = x0_var;
    mp[0] = m;
    pp[0] = p;
    auto update = [&](std::size_t j) {
        const auto it = slots.find(j);
        if (it != slots.end()) {
            const double k = p / (p + r);
            m = m + k * (it->second - m);
            p = (1.0 - k) * p;
        }
        mf[j] = m;
        pf[j] = p;
    };
    update(0);
    for (std::size_t j = 1; j <= n_steps; ++j) {
        m = phi * m;
        p = phi * phi * p + q;
        mp[j] = m;
        pp[j] = p;
        update(j);
    }
    KalmanResult res;
    res.mean = mf;
    res.var = pf;
    for (std::size_t j = n_steps; j-- > 0;) {
        const double gain = pf[j] * phi / pp[j + 1];
        res.mean[j] = mf[j] + gain * (res.mean[j + 1] - mp[j + 1]);
        res.var[j] = pf[j] + gain * gain * (res.var[j + 1] - pp[j + 1]);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Transport baselines
// ---------------------------------------------------------------------------

// Exact W1 between equal-size uniform sets by enumerating all matchings.
inline double brute_force_emd(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b) {
    const std::size_t n = a.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < a[i].size(); ++k) {
                const double diff = a[i][k] - b[perm[i]][k];
                d2 += diff * diff;
            }
            total += std::sqrt(d2);
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

// Exact 1D W1 between uniform sets of any sizes via the quantile coupling.
inline double w1_1d_uniform(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double wa = 1.0 / static_cast<double>(a.size());
    const double wb = 1.0 / static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double ra = wa, rb = wb;
    double total = 0.0;
    while (i < a.size() && j < b.size()) {
        const double mass = std::min(ra, rb);
        total += mass * std::abs(a[i] - b[j]);
        ra -= mass;
        rb -= mass;
        if (ra <= 1e-15) {
            ++i;
            ra = wa;
        }
        if (rb <= 1e-15) {
            ++j;
            rb = wb;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Distribution tests and Monte Carlo error helpers
// ---------------------------------------------------------------------------

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Kolmogorov-Smirnov statistic against N(0, sigma^2).
inline double ks_statistic_normal(std::vector<double> samples, double sigma) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = std_normal_cdf(samples[i] / sigma);
        const double hi = (static_cast<double>(i) + 1.0) / n - cdf;
        const double lo = cdf - static_cast<double>(i) / n;
        d = std::max({d, hi, lo});
    }
    return d;
}

// Asymptotic Kolmogorov distribution tail: P(D > d) for sample size n.
inline double ks_pvalue(double d, std::size_t n) {
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * lambda * lambda * k * k);
        sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
        if (term < 1e-12) {
            break;
        }
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

inline double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return s / static_cast<double>(v.size() - 1);
}

// Standard error of the mean of a correlated sequence via batch means.
inline double batch_means_se(const std::vector<double>& chain, std::size_t n_batches) {
    const std::size_t len = chain.size() / n_batches;
    std::vector<double> means;
    for (std::size_t b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            s += chain[b * len + i];
        }
        means.push_back(s / static_cast<double>(len));
    }
    return std::sqrt(var_of(means) / static_cast<double>(n_batches));
}

} // namespace oracles
