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

#include "smcsde/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "smcsde/errors.hpp"

namespace smcsde {

std::string format_value(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_time(double t) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), t,
                                   std::chars_format::scientific, 14);
    return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot open file for writing: " + path.string());
    }
    return out;
}

double parse_field(const std::string& field, std::size_t line_no,
                   const std::filesystem::path& path) {
    double v = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) {
        ++begin;
    }
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end) {
        throw ParseError("non-numeric field '" + field + "' at line " +
                         std::to_string(line_no) + " of " + path.string());
    }
    return v;
}

} // namespace

void write_trajectories_csv(const std::filesystem::path& path,
                            const std::vector<Trajectory>& paths) {
    if (paths.empty()) {
        throw ContractViolation("no trajectories to write");
    }
    const std::size_t d = paths.front().dim();
    auto out = open_out(path);
    out << "t";
    for (std::size_t j = 0; j < d; ++j) {
        out << ",x" << j;
    }
    out << ",path_id\n";
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const Trajectory& traj = paths[p];
        for (std::size_t row = 0; row < traj.states.rows(); ++row) {
            out << format_time(traj.grid->times[row]);
            for (std::size_t j = 0; j < d; ++j) {
                out << ',' << format_value(traj.states(row, j));
            }
            out << ',' << p << '\n';
        }
    }
}

void write_diffs_csv(const std::filesystem::path& path,
                     const std::vector<ReferenceTrajectory>& refs) {
    if (refs.empty()) {
        throw ContractViolation("no references to write");
    }
    const std::size_t d = refs.front().diffs.cols();
    auto out = open_out(path);
    out << "t";
    for (std::size_t j = 0; j < d; ++j) {
        out << ",dx" << j;
    }
    out << ",ref_id\n";
    for (std::size_t r = 0; r < refs.size(); ++r) {
        const auto& ref = refs[r];
        for (std::size_t row = 0; row < ref.diffs.rows(); ++row) {
            out << format_time(ref.states.grid->times[row]);
            for (std::size_t j = 0; j < d; ++j) {
                out << ',' << format_value(ref.diffs(row, j));
            }
            out << ',' << r << '\n';
        }
    }
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open file: " + path.string());
    }
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> values;
    std::size_t n_cols = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = line.find(',', pos);
            fields.push_back(line.substr(pos, comma == std::string::npos
                                                  ? std::string::npos
                                                  : comma - pos));
            if (comma == std::string::npos) {
                break;
            }
            pos = comma + 1;
        }
        if (line_no == 1) {
            table.header = std::move(fields);
            n_cols = table.header.size();
            continue;
        }
        if (fields.size() != n_cols) {
            throw ParseError("row with " + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(n_cols) +
                             " at line " + std::to_string(line_no) + " of " +
                             path.string());
        }
        for (const auto& f : fields) {
            values.push_back(parse_field(f, line_no, path));
        }
    }
    if (table.header.empty()) {
        throw ParseError("empty file: " + path.string());
    }
    const std::size_t n_rows = values.size() / n_cols;
    table.rows.resize(n_rows, n_cols);
    std::copy(values.begin(), values.end(), table.rows.data());
    return table;
}

std::vector<Trajectory> read_trajectories_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    if (table.header.size() < 3 || table.header.front() != "t" ||
        table.header.back() != "path_id") {
        throw ParseError("unexpected trajectory header in " + path.string());
    }
    const std::size_t d = table.header.size() - 2;
    const std::size_t n_rows = table.rows.rows();
    if (n_rows == 0) {
        throw ParseError("no trajectory rows in " + path.string());
    }

    // rows arrive path-major; count rows of the first path to size the grid
    std::size_t rows_per_path = 0;
    const double first_id = table.rows(0, d + 1);
    while (rows_per_path < n_rows && table.rows(rows_per_path, d + 1) == first_id) {
        ++rows_per_path;
    }
    if (rows_per_path < 2 || n_rows % rows_per_path != 0) {
        throw ParseError("inconsistent path lengths in " + path.string());
    }
    auto grid = std::make_shared<TimeGrid>();
    grid->n_steps = rows_per_path - 1;
    grid->times.resize(rows_per_path);
    grid->deltas.resize(rows_per_path - 1);
    for (std::size_t r = 0; r < rows_per_path; ++r) {
        grid->times[r] = table.rows(r, 0);
    }
    for (std::size_t r = 0; r + 1 < rows_per_path; ++r) {
        grid->deltas[r] = grid->times[r + 1] - grid->times[r];
    }
    grid->t0 = grid->times.front();
    grid->t_end = grid->times.back();

    const std::size_t n_paths = n_rows / rows_per_path;
    std::vector<Trajectory> out(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
        out[p].grid = grid;
        out[p].states.resize(rows_per_path, d);
        for (std::size_t r = 0; r < rows_per_path; ++r) {
            const std::size_t row = p * rows_per_path + r;
            for (std::size_t j = 0; j < d; ++j) {
                out[p].states(r, j) = table.rows(row, j + 1);
            }
        }
    }
    return out;
}

void write_points_csv(const std::filesystem::path& path, const Vec& times,
                      const Matrix& points) {
    if (times.size() != points.rows()) {
        throw ContractViolation("time column and point rows must align");
    }
    auto out = open_out(path);
    out << "t";
    for (std::size_t j = 0; j < points.cols(); ++j) {
        out << ",y" << j;
    }
    out << '\n';
    for (std::size_t r = 0; r < points.rows(); ++r) {
        out << format_time(times[r]);
        for (std::size_t j = 0; j < points.cols(); ++j) {
            out << ',' << format_value(points(r, j));
        }
        out << '\n';
    }
}

} // namespace smcsde
