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

#include "smcsde/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "smcsde/csv.hpp"
#include "smcsde/drift_net.hpp"
#include "smcsde/errors.hpp"
#include "smcsde/kernels.hpp"
#include "smcsde/metrics.hpp"

namespace smcsde {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::vector<std::string> kStageOrder = {"generate", "smooth", "train", "sample",
                                              "eval"};

json experiment_defaults(const std::string& experiment) {
    json d;
    d["stages"] = kStageOrder;
    d["seed"] = 0;
    d["eval"] = {{"emd_cap", 2000}};
    d["sampling"] = {{"n_paths", 200}};
    d["progress_every"] = 0;
    if (experiment == "double_well") {
        d["double_well"] = {{"t_end", 40.0}, {"dt", 0.01},      {"g", 1.0},
                            {"sigma_obs", 0.3}, {"init_x", -1.0}, {"n_obs", 50}};
        d["smoother"] = {{"n_particles", 100}, {"n_iterations", 1000},
                         {"burn_in", 500},     {"n_chains", 1},
                         {"max_workers", 0}};
        d["training"] = {{"lr", 1e-4}, {"batch_size", 2048}, {"epochs", 200},
                         {"plain_sgd", false}};
    } else if (experiment == "two_circles") {
        d["two_circles"] = {{"t_end", 3.0},
                            {"dt", 0.01},
                            {"n_terminal", 500},
                            {"outer_radius", 10.0},
                            {"radius_factor", 0.5},
                            {"jitter", 0.05},
                            {"mid_points", 10},
                            {"mid_radius", -1.0},
                            {"sigma_mid", 0.5},
                            {"terminal_sigma_scale", 0.01},
                            {"h_mid", 3},
                            {"h_terminal", 5},
                            {"g_high", 5.0},
                            {"g_end", 0.01}};
        d["smoother"] = {{"n_particles", 1000}, {"n_iterations", 2000},
                         {"burn_in", 1000},     {"n_chains", 10},
                         {"max_workers", 0}};
        d["training"] = {{"lr", 1e-4}, {"batch_size", 1024}, {"epochs", 200},
                         {"plain_sgd", false}};
    } else if (experiment == "vehicle_synthetic") {
        d["vehicle_synthetic"] = {{"dt", 0.01},          {"dense_points", 1000},
                                  {"thin_every", 50},    {"g", 0.1},
                                  {"sigma_obs", 0.1},    {"track_noise", 0.01}};
        d["smoother"] = {{"n_particles", 1000}, {"n_iterations", 400},
                         {"burn_in", 200},      {"n_chains", 1},
                         {"max_workers", 0}};
        d["training"] = {{"lr", 1e-4}, {"batch_size", 2048}, {"epochs", 300},
                         {"plain_sgd", false}};
    } else if (experiment == "marginal_transport") {
        d["marginal_transport"] = {{"t_end", 4.0},     {"dt", 0.01},
                                   {"g", 1.0},         {"sigma_obs", 0.3},
                                   {"h_nearest", 5},   {"files", json::array()},
                                   {"times", json::array()},
                                   {"points_per_slot", 500},
                                   {"n_slots", 5}};
        d["smoother"] = {{"n_particles", 1000}, {"n_iterations", 500},
                         {"burn_in", 250},      {"n_chains", 8},
                         {"max_workers", 0}};
        d["training"] = {{"lr", 1e-4}, {"batch_size", 2048}, {"epochs", 200},
                         {"plain_sgd", false}};
    } else {
        throw ConfigError("unknown experiment: " + experiment);
    }
    return d;
}

void deep_merge(json& base, const json& overrides) {
    if (!overrides.is_object() || !base.is_object()) {
        base = overrides;
        return;
    }
    for (const auto& [key, value] : overrides.items()) {
        if (base.contains(key) && base[key].is_object() && value.is_object()) {
            deep_merge(base[key], value);
        } else {
            base[key] = value;
        }
    }
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << v;
    return out.str();
}

fs::path next_version_dir(const fs::path& base) {
    fs::create_directories(base);
    for (int v = 1; v < 1000; ++v) {
        std::ostringstream name;
        name << "v" << std::setw(3) << std::setfill('0') << v;
        const fs::path candidate = base / name.str();
        if (!fs::exists(candidate)) {
            fs::create_directories(candidate);
            return candidate;
        }
    }
    throw ConfigError("too many stage versions under " + base.string());
}

std::optional<fs::path> latest_version_dir(const fs::path& base) {
    if (!fs::exists(base)) {
        return std::nullopt;
    }
    std::optional<fs::path> best;
    for (const auto& entry : fs::directory_iterator(base)) {
        if (entry.is_directory() &&
            (!best || entry.path().filename() > best->filename())) {
            best = entry.path();
        }
    }
    return best;
}

void write_json(const fs::path& path, const json& doc) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    return json::parse(in);
}

// latest smooth output reconstructed into reference trajectories
std::vector<ReferenceTrajectory> load_pool(const fs::path& smooth_dir) {
    std::vector<fs::path> chain_files;
    for (const auto& entry : fs::directory_iterator(smooth_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("chain_", 0) == 0 && name.find("_diffs") == std::string::npos &&
            entry.path().extension() == ".csv") {
            chain_files.push_back(entry.path());
        }
    }
    std::sort(chain_files.begin(), chain_files.end());
    if (chain_files.empty()) {
        throw ConfigError("no chain output under " + smooth_dir.string());
    }
    std::vector<ReferenceTrajectory> pool;
    for (std::size_t c = 0; c < chain_files.size(); ++c) {
        const auto refs = read_trajectories_csv(chain_files[c]);
        fs::path diffs_path = chain_files[c];
        diffs_path.replace_extension();
        diffs_path += "_diffs.csv";
        const CsvTable diffs = read_csv(diffs_path);
        const std::size_t d = refs.front().dim();
        const std::size_t n_steps = refs.front().grid->n_steps;
        if (diffs.rows.rows() != refs.size() * n_steps) {
            throw ParseError("diff row count does not match references in " +
                             diffs_path.string());
        }
        for (std::size_t r = 0; r < refs.size(); ++r) {
            ReferenceTrajectory ref;
            ref.states = refs[r];
            ref.chain_id = static_cast<std::uint32_t>(c);
            ref.diffs.resize(n_steps, d);
            for (std::size_t j = 0; j < n_steps; ++j) {
                for (std::size_t k = 0; k < d; ++k) {
                    ref.diffs(j, k) = diffs.rows(r * n_steps + j, k + 1);
                }
            }
            pool.push_back(std::move(ref));
        }
    }
    return pool;
}

struct StageRecord {
    std::string name;
    fs::path dir;
    double wall_ms = 0.0;
    std::vector<fs::path> outputs;
};

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

Vec slot_times(const Dataset& ds) {
    Vec times;
    for (const auto& [idx, slot] : ds.obs.slots()) {
        times.push_back(ds.grid->times[idx]);
    }
    return times;
}

void write_dataset_files(const Dataset& ds, const fs::path& dir,
                         std::vector<fs::path>& outputs) {
    fs::create_directories(dir);
    // one row per (slot, point)
    std::size_t n_rows = 0;
    for (const auto& [idx, slot] : ds.obs.slots()) {
        n_rows += slot.points().rows();
    }
    Matrix pts(n_rows, ds.obs.obs_dim());
    Vec times(n_rows);
    std::size_t row = 0;
    for (const auto& [idx, slot] : ds.obs.slots()) {
        for (std::size_t p = 0; p < slot.points().rows(); ++p, ++row) {
            times[row] = ds.grid->times[idx];
            for (std::size_t j = 0; j < pts.cols(); ++j) {
                pts(row, j) = slot.points()(p, j);
            }
        }
    }
    const fs::path obs_path = dir / "observations.csv";
    write_points_csv(obs_path, times, pts);
    outputs.push_back(obs_path);
    if (ds.truth) {
        const fs::path truth_path = dir / "truth.csv";
        write_trajectories_csv(truth_path, {*ds.truth});
        outputs.push_back(truth_path);
    }
    const fs::path spec_path = dir / "spec.json";
    write_json(spec_path, ds.manifest);
    outputs.push_back(spec_path);
}

SampleSet states_at_index(const std::vector<ReferenceTrajectory>& pool,
                          std::size_t idx) {
    Matrix pts(pool.size(), pool.front().states.dim());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = 0; j < pts.cols(); ++j) {
            pts(i, j) = pool[i].states.states(idx, j);
        }
    }
    return SampleSet::uniform(std::move(pts));
}

SampleSet trajectory_states_at_index(const std::vector<Trajectory>& paths,
                                     std::size_t idx) {
    Matrix pts(paths.size(), paths.front().dim());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        for (std::size_t j = 0; j < pts.cols(); ++j) {
            pts(i, j) = paths[i].states(idx, j);
        }
    }
    return SampleSet::uniform(std::move(pts));
}

std::vector<Trajectory> ref_states(const std::vector<ReferenceTrajectory>& pool) {
    std::vector<Trajectory> out;
    out.reserve(pool.size());
    for (const auto& ref : pool) {
        out.push_back(ref.states);
    }
    return out;
}

void print_report(const json& rows, std::ostream& log) {
    log << std::left << std::setw(10) << "metric" << std::setw(14) << "source"
        << std::setw(14) << "time" << std::setw(16) << "value" << '\n';
    for (const auto& row : rows) {
        std::ostringstream value;
        value << std::setprecision(6) << row.at("value").get<double>();
        std::ostringstream time;
        if (row.contains("time") && !row.at("time").is_null()) {
            time << std::setprecision(6) << row.at("time").get<double>();
        } else {
            time << "-";
        }
        log << std::left << std::setw(10) << row.at("metric").get<std::string>()
            << std::setw(14) << row.at("source").get<std::string>() << std::setw(14)
            << time.str() << std::setw(16) << value.str() << '\n';
    }
}

json eval_report(const Dataset& ds, const std::vector<ReferenceTrajectory>* pool,
                 const std::vector<Trajectory>* samples, const std::string& against,
                 std::size_t emd_cap, std::uint64_t seed) {
    json rows = json::array();
    auto add_emd = [&](const std::string& source, const SampleSet& set,
                       const ObservationSlot& slot, double t, bool terminal) {
        const SampleSet target = SampleSet::uniform(slot.points());
        const EmdResult r = emd_capped(set, target, emd_cap, seed);
        rows.push_back(json{{"metric", "emd"},
                            {"source", source},
                            {"time", t},
                            {"value", r.value},
                            {"n_a", r.n_a},
                            {"n_b", r.n_b},
                            {"subsampled", r.subsampled},
                            {"seed", seed},
                            {"terminal", terminal}});
    };
    auto add_mse = [&](const std::string& source, const std::string& metric, double v) {
        rows.push_back(json{{"metric", metric},
                            {"source", source},
                            {"time", nullptr},
                            {"value", v},
                            {"n_a", 0},
                            {"n_b", 0},
                            {"subsampled", false},
                            {"seed", seed}});
    };

    if (against == "terminal") {
        for (const auto& [idx, slot] : ds.obs.slots()) {
            if (slot.mode() != ObsMode::kKnn) {
                continue;
            }
            const bool terminal = ds.obs.is_terminal_slot(idx);
            if (pool != nullptr && !pool->empty()) {
                add_emd("smoother", states_at_index(*pool, idx), slot,
                        ds.grid->times[idx], terminal);
            }
            if (samples != nullptr && !samples->empty()) {
                add_emd("learned", trajectory_states_at_index(*samples, idx), slot,
                        ds.grid->times[idx], terminal);
            }
        }
        if (rows.empty()) {
            throw ConfigError("no marginal-constraint slots to evaluate");
        }
    } else if (against == "observations") {
        if (pool != nullptr && !pool->empty()) {
            add_mse("smoother", "mse",
                    trajectory_mse(mean_trajectory(ref_states(*pool)), ds.obs));
        }
        if (samples != nullptr && !samples->empty()) {
            add_mse("learned", "mse", trajectory_mse(mean_trajectory(*samples), ds.obs));
        }
        if (rows.empty()) {
            throw ConfigError("no smoother or sample artifacts to evaluate");
        }
    } else if (against == "truth") {
        if (!ds.truth) {
            throw ConfigError("experiment has no dense ground truth");
        }
        if (pool != nullptr && !pool->empty()) {
            add_mse("smoother", "mse_truth",
                    trajectory_mse_paths(mean_trajectory(ref_states(*pool)), *ds.truth));
        }
        if (samples != nullptr && !samples->empty()) {
            add_mse("learned", "mse_truth",
                    trajectory_mse_paths(mean_trajectory(*samples), *ds.truth));
        }
        if (rows.empty()) {
            throw ConfigError("no smoother or sample artifacts to evaluate");
        }
    } else {
        throw ConfigError("unknown eval target: " + against);
    }
    return rows;
}

} // namespace

fs::path default_output_root() {
    if (const char* env = std::getenv("SMCSDE_OUT")) {
        return fs::path(env);
    }
    return fs::path("runs");
}

std::uint64_t fnv1a64_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot hash missing file: " + path.string());
    }
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
        if (!in) {
            break;
        }
    }
    return h;
}

RunConfig RunConfig::from_file(const fs::path& path) {
    json doc;
    try {
        doc = read_json(path);
    } catch (const json::exception& e) {
        throw ParseError("config parse failure in " + path.string() + ": " + e.what());
    }
    return from_json(std::move(doc));
}

RunConfig RunConfig::from_json(json doc) {
    if (!doc.is_object() || !doc.contains("experiment")) {
        throw ConfigError("config must be an object with an 'experiment' key");
    }
    RunConfig cfg;
    cfg.experiment = doc.at("experiment").get<std::string>();
    json merged = experiment_defaults(cfg.experiment);
    merged["experiment"] = cfg.experiment;
    deep_merge(merged, doc);
    cfg.raw = std::move(merged);
    cfg.seed = cfg.raw.at("seed").get<std::uint64_t>();
    cfg.stages = cfg.raw.at("stages").get<std::vector<std::string>>();
    if (cfg.raw.contains("out_dir")) {
        cfg.out_dir = fs::path(cfg.raw.at("out_dir").get<std::string>());
    } else {
        cfg.out_dir = default_output_root() / cfg.experiment;
        cfg.raw["out_dir"] = cfg.out_dir.string();
    }

    // stages must be a subsequence of the canonical order
    std::size_t cursor = 0;
    for (const auto& stage : cfg.stages) {
        const auto it = std::find(kStageOrder.begin() + static_cast<std::ptrdiff_t>(cursor),
                                  kStageOrder.end(), stage);
        if (it == kStageOrder.end()) {
            throw ConfigError("invalid or out-of-order stage: " + stage);
        }
        cursor = static_cast<std::size_t>(it - kStageOrder.begin()) + 1;
    }
    if (cfg.stages.empty()) {
        throw ConfigError("config lists no stages");
    }
    return cfg;
}

std::string RunConfig::config_hash() const {
    json canon = raw;
    canon.erase("out_dir");
    const std::string dump = canon.dump();
    return hex64(fnv1a64(dump.data(), dump.size(), 0xCBF29CE484222325ull));
}

ChainConfig RunConfig::chain_config() const {
    const json& s = raw.at("smoother");
    ChainConfig ccfg;
    ccfg.n_particles = s.at("n_particles").get<std::size_t>();
    ccfg.n_iterations = s.at("n_iterations").get<std::size_t>();
    if (s.contains("burn_in") && !s.at("burn_in").is_null()) {
        ccfg.burn_in = s.at("burn_in").get<std::size_t>();
    }
    ccfg.n_chains = s.at("n_chains").get<std::size_t>();
    ccfg.max_workers = s.at("max_workers").get<std::size_t>();
    ccfg.seed = seed;
    ccfg.progress_every = raw.at("progress_every").get<std::size_t>();
    ccfg.validate();
    return ccfg;
}

Dataset build_dataset(const RunConfig& cfg) {
    const json& p = cfg.raw.at(cfg.experiment);
    if (cfg.experiment == "double_well") {
        DoubleWellParams dw;
        dw.t_end = p.at("t_end").get<double>();
        dw.dt = p.at("dt").get<double>();
        dw.g = p.at("g").get<double>();
        dw.sigma_obs = p.at("sigma_obs").get<double>();
        dw.init_x = p.at("init_x").get<double>();
        dw.n_obs = p.at("n_obs").get<std::size_t>();
        return gen_double_well(dw, cfg.seed);
    }
    if (cfg.experiment == "two_circles") {
        TwoCirclesParams tc;
        tc.t_end = p.at("t_end").get<double>();
        tc.dt = p.at("dt").get<double>();
        tc.n_terminal = p.at("n_terminal").get<std::size_t>();
        tc.outer_radius = p.at("outer_radius").get<double>();
        tc.radius_factor = p.at("radius_factor").get<double>();
        tc.jitter = p.at("jitter").get<double>();
        tc.mid_points = p.at("mid_points").get<std::size_t>();
        tc.mid_radius = p.at("mid_radius").get<double>();
        tc.sigma_mid = p.at("sigma_mid").get<double>();
        tc.terminal_sigma_scale = p.at("terminal_sigma_scale").get<double>();
        tc.h_mid = p.at("h_mid").get<std::size_t>();
        tc.h_terminal = p.at("h_terminal").get<std::size_t>();
        tc.g_high = p.at("g_high").get<double>();
        tc.g_end = p.at("g_end").get<double>();
        return gen_two_circles(tc, cfg.seed);
    }
    if (cfg.experiment == "vehicle_synthetic") {
        VehicleParams vp;
        vp.dt = p.at("dt").get<double>();
        vp.dense_points = p.at("dense_points").get<std::size_t>();
        vp.thin_every = p.at("thin_every").get<std::size_t>();
        vp.g = p.at("g").get<double>();
        vp.sigma_obs = p.at("sigma_obs").get<double>();
        vp.track_noise = p.at("track_noise").get<double>();
        return gen_vehicle_synthetic(vp, cfg.seed);
    }
    if (cfg.experiment == "marginal_transport") {
        MarginalParams mp;
        mp.t_end = p.at("t_end").get<double>();
        mp.dt = p.at("dt").get<double>();
        mp.g = p.at("g").get<double>();
        mp.sigma_obs = p.at("sigma_obs").get<double>();
        mp.h_nearest = p.at("h_nearest").get<std::size_t>();
        std::vector<fs::path> files;
        for (const auto& f : p.at("files")) {
            files.emplace_back(f.get<std::string>());
        }
        std::vector<double> times = p.at("times").get<std::vector<double>>();
        if (files.empty()) {
            // default to the generate stage's synthetic marginals
            const std::size_t n_slots = p.at("n_slots").get<std::size_t>();
            for (std::size_t s = 0; s < n_slots; ++s) {
                files.push_back(cfg.out_dir / "data" / "marginal_transport" /
                                ("marginal_t" + std::to_string(s) + ".csv"));
                if (times.size() < n_slots) {
                    times.push_back(mp.t_end * static_cast<double>(s) /
                                    static_cast<double>(n_slots - 1));
                }
            }
        }
        for (const auto& f : files) {
            if (!fs::exists(f)) {
                throw ConfigError("marginal file missing (run the generate stage "
                                  "first): " +
                                  f.string());
            }
        }
        return load_marginals_csv(files, times, mp);
    }
    throw ConfigError("unknown experiment: " + cfg.experiment);
}

int run_pipeline(const RunConfig& cfg, std::ostream& log) {
    try {
        fs::create_directories(cfg.out_dir);
        write_json(cfg.out_dir / "config.json", cfg.raw);

        json manifest;
        manifest["config_hash"] = cfg.config_hash();
        manifest["kernels"] = kern::active_name();
        manifest["stages"] = json::array();

        std::optional<Dataset> dataset;
        auto get_dataset = [&]() -> Dataset& {
            if (!dataset) {
                dataset = build_dataset(cfg);
            }
            return *dataset;
        };

        std::vector<ReferenceTrajectory> pool;
        std::optional<DriftNet> net;
        std::vector<Trajectory> samples;

        for (const auto& stage : cfg.stages) {
            Timer timer;
            StageRecord rec;
            rec.name = stage;
            log << "== stage " << stage << '\n';

            if (stage == "generate") {
                rec.dir = cfg.out_dir / "data" / cfg.experiment;
                if (cfg.experiment == "marginal_transport") {
                    const json& p = cfg.raw.at(cfg.experiment);
                    if (p.at("files").empty()) {
                        MarginalParams mp;
                        mp.t_end = p.at("t_end").get<double>();
                        mp.dt = p.at("dt").get<double>();
                        mp.sigma_obs = p.at("sigma_obs").get<double>();
                        mp.h_nearest = p.at("h_nearest").get<std::size_t>();
                        const auto files = write_synthetic_marginals(
                            rec.dir, mp, p.at("points_per_slot").get<std::size_t>(),
                            p.at("n_slots").get<std::size_t>(), cfg.seed);
                        rec.outputs.insert(rec.outputs.end(), files.begin(), files.end());
                    }
                }
                write_dataset_files(get_dataset(), rec.dir, rec.outputs);
            } else if (stage == "smooth") {
                Dataset& ds = get_dataset();
                ChainConfig ccfg = cfg.chain_config();
                std::vector<ChainStats> stats;
                pool = run_chains_parallel(ds.model, ds.obs, ds.grid, ccfg, &stats);
                rec.dir = next_version_dir(cfg.out_dir / "smooth");
                for (std::size_t c = 0; c < ccfg.n_chains; ++c) {
                    std::vector<Trajectory> chain_paths;
                    std::vector<ReferenceTrajectory> chain_refs;
                    for (const auto& ref : pool) {
                        if (ref.chain_id == c) {
                            chain_paths.push_back(ref.states);
                            chain_refs.push_back(ref);
                        }
                    }
                    std::ostringstream base;
                    base << "chain_" << std::setw(3) << std::setfill('0') << c;
                    const fs::path traj_path = rec.dir / (base.str() + ".csv");
                    const fs::path diff_path = rec.dir / (base.str() + "_diffs.csv");
                    const fs::path meta_path = rec.dir / (base.str() + ".json");
                    write_trajectories_csv(traj_path, chain_paths);
                    write_diffs_csv(diff_path, chain_refs);
                    write_json(meta_path,
                               json{{"chain_id", c},
                                    {"seed", derive_seed(ccfg.seed, c)},
                                    {"n_iterations", ccfg.n_iterations},
                                    {"burn_in", ccfg.resolved_burn_in()},
                                    {"n_particles", ccfg.n_particles},
                                    {"reference_change_rate",
                                     stats[c].reference_change_rate()}});
                    rec.outputs.push_back(traj_path);
                    rec.outputs.push_back(diff_path);
                    rec.outputs.push_back(meta_path);
                }
            } else if (stage == "train") {
                if (pool.empty()) {
                    const auto latest = latest_version_dir(cfg.out_dir / "smooth");
                    if (!latest) {
                        throw ConfigError("train stage requires smoother output");
                    }
                    pool = load_pool(*latest);
                }
                Dataset& ds = get_dataset();
                DriftNet candidate = DriftNet::standard(
                    ds.model.dim, ds.grid->t_end - ds.grid->t0, ds.grid->deltas.front());
                candidate.init_params(derive_seed(cfg.seed, 0x7261));
                TrainOptions topts;
                const json& t = cfg.training();
                topts.lr = t.at("lr").get<double>();
                topts.batch_size = t.at("batch_size").get<std::size_t>();
                topts.epochs = t.at("epochs").get<std::size_t>();
                topts.plain_sgd = t.at("plain_sgd").get<bool>();
                topts.seed = derive_seed(cfg.seed, 0x7262);
                const TrainResult result = train(candidate, pool, topts);
                net = std::move(candidate);

                rec.dir = next_version_dir(cfg.out_dir / "train");
                const fs::path ckpt = rec.dir / "checkpoint.bin";
                const json train_manifest = {
                    {"seed", topts.seed},
                    {"lr", topts.lr},
                    {"batch_size", topts.batch_size},
                    {"epochs", topts.epochs},
                    {"optimizer", topts.plain_sgd ? "sgd" : "adam"},
                    {"initial_loss", result.initial_loss},
                    {"final_loss", result.final_loss}};
                net->save_checkpoint(ckpt, train_manifest.dump());
                const fs::path curve = rec.dir / "training.json";
                json curve_doc = train_manifest;
                curve_doc["epoch_loss"] = result.epoch_loss;
                write_json(curve, curve_doc);
                rec.outputs.push_back(ckpt);
                rec.outputs.push_back(curve);
                log << "   loss " << result.initial_loss << " -> " << result.final_loss
                    << '\n';
            } else if (stage == "sample") {
                if (!net) {
                    const auto latest = latest_version_dir(cfg.out_dir / "train");
                    if (!latest || !fs::exists(*latest / "checkpoint.bin")) {
                        throw ConfigError("sample stage requires a checkpoint");
                    }
                    net = DriftNet::load_checkpoint(*latest / "checkpoint.bin").net;
                }
                Dataset& ds = get_dataset();
                const std::size_t n_paths =
                    cfg.sampling().at("n_paths").get<std::size_t>();
                samples = sample_learned(*net, ds.model.g, ds.grid, ds.model.init,
                                         n_paths, derive_seed(cfg.seed, 0x7361));
                rec.dir = next_version_dir(cfg.out_dir / "sample");
                const fs::path traj = rec.dir / "trajectories.csv";
                write_trajectories_csv(traj, samples);
                rec.outputs.push_back(traj);
            } else if (stage == "eval") {
                if (pool.empty()) {
                    if (const auto latest = latest_version_dir(cfg.out_dir / "smooth")) {
                        pool = load_pool(*latest);
                    }
                }
                if (samples.empty()) {
                    if (const auto latest = latest_version_dir(cfg.out_dir / "sample")) {
                        if (fs::exists(*latest / "trajectories.csv")) {
                            samples = read_trajectories_csv(*latest / "trajectories.csv");
                        }
                    }
                }
                if (pool.empty() && samples.empty()) {
                    throw ConfigError("eval stage requires smoother or sample output");
                }
                Dataset& ds = get_dataset();
                const std::size_t cap = cfg.eval_opts().at("emd_cap").get<std::size_t>();
                bool has_knn = false;
                for (const auto& [idx, slot] : ds.obs.slots()) {
                    has_knn = has_knn || slot.mode() == ObsMode::kKnn;
                }
                const std::string target = has_knn ? "terminal" : "observations";
                json rows = eval_report(ds, &pool, &samples, target, cap, cfg.seed);
                if (!has_knn && ds.truth) {
                    const json truth_rows =
                        eval_report(ds, &pool, &samples, "truth", cap, cfg.seed);
                    rows.insert(rows.end(), truth_rows.begin(), truth_rows.end());
                }
                rec.dir = next_version_dir(cfg.out_dir / "eval");
                const fs::path report = rec.dir / "report.json";
                write_json(report, rows);
                rec.outputs.push_back(report);
                print_report(rows, log);
            } else {
                throw ConfigError("unknown stage: " + stage);
            }

            rec.wall_ms = timer.ms();
            json stage_doc = {{"name", rec.name},
                              {"dir", rec.dir.string()},
                              {"wall_ms", rec.wall_ms},
                              {"outputs", json::object()}};
            for (const auto& path : rec.outputs) {
                stage_doc["outputs"][path.filename().string()] =
                    hex64(fnv1a64_file(path));
            }
            manifest["stages"].push_back(stage_doc);
            log << "   done in " << rec.wall_ms << " ms\n";
        }

        write_json(cfg.out_dir / "manifest.json", manifest);
        return 0;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 1;
    }
}

int eval_run(const fs::path& run_dir, const std::string& against, std::ostream& log) {
    try {
        const fs::path config_path = run_dir / "config.json";
        if (!fs::exists(config_path)) {
            throw ConfigError("no config.json under " + run_dir.string());
        }
        RunConfig cfg = RunConfig::from_json(read_json(config_path));
        cfg.out_dir = run_dir;
        Dataset ds = build_dataset(cfg);

        std::vector<ReferenceTrajectory> pool;
        if (const auto latest = latest_version_dir(run_dir / "smooth")) {
            pool = load_pool(*latest);
        }
        std::vector<Trajectory> samples;
        if (const auto latest = latest_version_dir(run_dir / "sample")) {
            if (fs::exists(*latest / "trajectories.csv")) {
                samples = read_trajectories_csv(*latest / "trajectories.csv");
            }
        }
        if (pool.empty() && samples.empty()) {
            throw ConfigError("run has neither smoother nor sample output");
        }
        const std::size_t cap = cfg.eval_opts().at("emd_cap").get<std::size_t>();
        const json rows = eval_report(ds, &pool, &samples, against, cap, cfg.seed);
        const fs::path dir = next_version_dir(run_dir / "eval");
        write_json(dir / "report.json", rows);
        print_report(rows, log);
        return 0;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 1;
    }
}

int generate_only(const std::string& experiment, std::uint64_t seed,
                  const fs::path& out_dir, std::ostream& log) {
    json doc;
    doc["experiment"] = experiment;
    doc["seed"] = seed;
    doc["stages"] = json::array({"generate"});
    if (!out_dir.empty()) {
        doc["out_dir"] = out_dir.string();
    }
    try {
        const RunConfig cfg = RunConfig::from_json(std::move(doc));
        return run_pipeline(cfg, log);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace smcsde
