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

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace smcsde {

// Philox4x32-10 counter-based generator. A stream is identified by a 64-bit
// key plus three 32-bit lane indices folded into the counter, so any
// (seed, lane) combination yields an independent, order-free random sequence.
// Draws are reproducible regardless of how work is scheduled across threads.
namespace philox {

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

} // namespace philox

// SplitMix64 finalizer; used to derive sub-seeds from (seed, index...) tuples.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index + 0x632BE59BD9B4E019ull));
}

class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint32_t lane1 = 0,
                       std::uint32_t lane2 = 0, std::uint32_t lane3 = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          lanes_{lane1, lane2, lane3} {}

    std::uint64_t next_u64() {
        if (buf_pos_ >= 2) {
            refill();
        }
        return buf_[buf_pos_++];
    }

    // Uniform on [0, 1).
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second draw of each pair is cached.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_uniform(); // (0, 1]
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    void fill_gaussian(std::span<double> out) {
        for (double& v : out) {
            v = next_gaussian();
        }
    }

private:
    void refill() {
        const std::uint32_t c0 = static_cast<std::uint32_t>(block_index_);
        const std::uint32_t c1 = static_cast<std::uint32_t>(block_index_ >> 32) ^ lanes_[0];
        auto out = philox::block({c0, c1, lanes_[1], lanes_[2]}, key_);
        buf_[0] = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
        buf_[1] = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
        buf_pos_ = 0;
        ++block_index_;
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 3> lanes_;
    std::uint64_t block_index_ = 0;
    std::uint64_t buf_[2] = {0, 0};
    int buf_pos_ = 2;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Index of the category selected by uniform draw u under normalized
// probabilities probs (sum to 1).
inline std::size_t categorical_index(std::span<const double> probs, double u) {
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) {
            return i;
        }
    }
    return probs.empty() ? 0 : probs.size() - 1;
}

} // namespace smcsde
