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
#include <vector>

namespace smcsde {

// Uniform time discretization of [t0, T]: n_steps intervals, n_steps + 1
// timestamps.
struct TimeGrid {
    double t0 = 0.0;
    double t_end = 0.0;
    std::size_t n_steps = 0;
    std::vector<double> times;  // n_steps + 1, strictly increasing
    std::vector<double> deltas; // n_steps, all positive

    std::size_t n_times() const { return times.size(); }
};

// Builds the grid with n_steps = (T - t0) / dt. The step count must be an
// integer to within 1e-9 relative; otherwise a ConfigError names the triple.
TimeGrid make_uniform_grid(double t0, double t_end, double dt);

} // namespace smcsde
