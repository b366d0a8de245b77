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

#include <vector>

namespace smcsde {

// Diffusion coefficient g(t) >= 0: either constant or piecewise-linear in a
// list of (time, value) breakpoints. Evaluation clamps outside the breakpoint
// range.
class DiffusionSchedule {
public:
    DiffusionSchedule() : DiffusionSchedule(0.0) {}

    static DiffusionSchedule constant(double value);
    static DiffusionSchedule piecewise_linear(std::vector<double> times,
                                              std::vector<double> values);

    double operator()(double t) const;

    bool is_constant() const { return times_.empty(); }
    double constant_value() const { return value_; }
    const std::vector<double>& breakpoint_times() const { return times_; }
    const std::vector<double>& breakpoint_values() const { return values_; }

private:
    explicit DiffusionSchedule(double value) : value_(value) {}

    double value_ = 0.0;
    std::vector<double> times_;
    std::vector<double> values_;
};

} // namespace smcsde
