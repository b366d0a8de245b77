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

#include <stdexcept>
#include <string>

namespace smcsde {

// Invalid user-facing configuration (bad grid spec, bad config file, missing
// stage dependency). CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; carries a line number in the message.
class ParseError : public ConfigError {
public:
    explicit ParseError(const std::string& msg) : ConfigError(msg) {}
};

// Ancestor sampling requested where the transition density is degenerate
// (zero diffusion).
class DegenerateTransitionError : public ConfigError {
public:
    explicit DegenerateTransitionError(const std::string& msg) : ConfigError(msg) {}
};

// API misuse: dimension mismatches, empty pools, violated preconditions.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Non-finite state or loss encountered at runtime.
class NumericalDivergence : public std::runtime_error {
public:
    explicit NumericalDivergence(const std::string& msg) : std::runtime_error(msg) {}
};

// Every log-weight is -inf; no particle carries mass.
class DegenerateWeightsError : public std::runtime_error {
public:
    explicit DegenerateWeightsError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace smcsde
