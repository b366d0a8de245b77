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

#include "smcsde/grid.hpp"

#include <cmath>
#include <sstream>

#include "smcsde/errors.hpp"

namespace smcsde {

TimeGrid make_uniform_grid(double t0, double t_end, double dt) {
    if (!(t_end > t0)) {
        throw ConfigError("time grid requires T > t0");
    }
    if (!(dt > 0.0)) {
        throw ConfigError("time grid requires dt > 0");
    }
    const double ratio = (t_end - t0) / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        std::ostringstream msg;
        msg << "(T - t0) / dt is not an integer step count: t0=" << t0
            << " T=" << t_end << " dt=" << dt << " gives " << ratio << " steps";
        throw ConfigError(msg.str());
    }
    TimeGrid grid;
    grid.t0 = t0;
    grid.t_end = t_end;
    grid.n_steps = static_cast<std::size_t>(rounded);
    grid.times.resize(grid.n_steps + 1);
    grid.deltas.assign(grid.n_steps, dt);
    for (std::size_t j = 0; j <= grid.n_steps; ++j) {
        grid.times[j] = t0 + static_cast<double>(j) * dt;
    }
    grid.times[grid.n_steps] = t_end;
    grid.deltas[grid.n_steps - 1] = t_end - grid.times[grid.n_steps - 1];
    return grid;
}

} // namespace smcsde
