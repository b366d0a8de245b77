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

#include <filesystem>
#include <string>
#include <vector>

#include "smcsde/matrix.hpp"
#include "smcsde/sde.hpp"
#include "smcsde/smoother.hpp"

namespace smcsde {

// Shortest representation that parses back to the same double.
std::string format_value(double v);
// Scientific form with 15 significant digits; used for the time column.
std::string format_time(double t);

// Header: t,x0,...,x{d-1},path_id ; one row per (path, time).
void write_trajectories_csv(const std::filesystem::path& path,
                            const std::vector<Trajectory>& paths);

// Header: t,dx0,...,dx{d-1},ref_id ; the mean-change records of a pool.
void write_diffs_csv(const std::filesystem::path& path,
                     const std::vector<ReferenceTrajectory>& refs);

struct CsvTable {
    std::vector<std::string> header;
    Matrix rows;
};

// Numeric CSV with a header line. Ragged or non-numeric rows raise ParseError
// with the offending line number.
CsvTable read_csv(const std::filesystem::path& path);

// Inverse of write_trajectories_csv: trajectories grouped by path_id, grid
// rebuilt from the time column.
std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path);

// Rows (t, y...) written with header t,y0,...,y{d-1}.
void write_points_csv(const std::filesystem::path& path, const Vec& times,
                      const Matrix& points);

} // namespace smcsde
