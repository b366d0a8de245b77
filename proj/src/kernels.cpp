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

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace smcsde::kern {

#if defined(__x86_64__) || defined(_M_X64)
bool avx2_available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

namespace {

struct Selection {
    const Ops* ops;
    std::string name;
};

Selection select() {
    const char* forced = std::getenv("SMCSDE_KERNELS");
    if (forced != nullptr) {
        const std::string want(forced);
        if (want == "scalar") {
            return {&scalar::ops, "scalar"};
        }
#if defined(__x86_64__) || defined(_M_X64)
        if (want == "avx2") {
            if (!avx2_available()) {
                throw std::runtime_error("SMCSDE_KERNELS=avx2 but CPU lacks AVX2/FMA");
            }
            return {&avx2::ops, "avx2"};
        }
#endif
        throw std::runtime_error("unknown SMCSDE_KERNELS value: " + want);
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_available()) {
        return {&avx2::ops, "avx2"};
    }
#endif
    return {&scalar::ops, "scalar"};
}

const Selection& selection() {
    static const Selection sel = select();
    return sel;
}

} // namespace

const Ops& active() { return *selection().ops; }

const std::string& active_name() { return selection().name; }

} // namespace smcsde::kern
