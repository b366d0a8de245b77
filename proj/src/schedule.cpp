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

#include "smcsde/schedule.hpp"

#include <algorithm>

#include "smcsde/errors.hpp"

namespace smcsde {

DiffusionSchedule DiffusionSchedule::constant(double value) {
    if (value < 0.0) {
        throw ConfigError("diffusion schedule value must be nonnegative");
    }
    return DiffusionSchedule(value);
}

DiffusionSchedule DiffusionSchedule::piecewise_linear(std::vector<double> times,
                                                      std::vector<double> values) {
    if (times.size() < 2 || times.size() != values.size()) {
        throw ConfigError("piecewise schedule needs matching times/values, at least two");
    }
    if (!std::is_sorted(times.begin(), times.end())) {
        throw ConfigError("piecewise schedule breakpoints must be increasing");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (times[i] <= times[i - 1]) {
            throw ConfigError("piecewise schedule breakpoints must be strictly increasing");
        }
    }
    for (double v : values) {
        if (v < 0.0) {
            throw ConfigError("diffusion schedule value must be nonnegative");
        }
    }
    DiffusionSchedule sched(0.0);
    sched.times_ = std::move(times);
    sched.values_ = std::move(values);
    return sched;
}

double DiffusionSchedule::operator()(double t) const {
    if (times_.empty()) {
        return value_;
    }
    if (t <= times_.front()) {
        return values_.front();
    }
    if (t >= times_.back()) {
        return values_.back();
    }
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
    return values_[lo] + w * (values_[hi] - values_[lo]);
}

} // namespace smcsde
