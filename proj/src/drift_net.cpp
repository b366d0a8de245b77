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

#include "smcsde/drift_net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smcsde/errors.hpp"
#include "smcsde/kernels.hpp"

namespace smcsde {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

using json = nlohmann::json;

SinusoidalEmbedding SinusoidalEmbedding::geometric(std::size_t n_freqs,
                                                   double period_max,
                                                   double period_min) {
    if (n_freqs == 0 || !(period_max > 0.0) || !(period_min > 0.0)) {
        throw ContractViolation("embedding needs positive periods and n_freqs >= 1");
    }
    SinusoidalEmbedding emb;
    emb.freqs.resize(n_freqs);
    constexpr double two_pi = 6.283185307179586476925286766559;
    if (n_freqs == 1) {
        emb.freqs[0] = two_pi / period_max;
        return emb;
    }
    const double log_ratio = std::log(period_min / period_max);
    for (std::size_t k = 0; k < n_freqs; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(n_freqs - 1);
        const double period = period_max * std::exp(frac * log_ratio);
        emb.freqs[k] = two_pi / period;
    }
    return emb;
}

void SinusoidalEmbedding::embed(double t, double* out) const {
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        out[2 * k] = std::sin(freqs[k] * t);
        out[2 * k + 1] = std::cos(freqs[k] * t);
    }
}

Vec SinusoidalEmbedding::embed(double t) const {
    Vec out(dim());
    embed(t, out.data());
    return out;
}

void TrainingBatch::validate() const {
    const std::size_t b = inputs.rows();
    if (b == 0) {
        throw ContractViolation("training batch must be nonempty");
    }
    if (times.size() != b || deltas.size() != b || targets.rows() != b ||
        targets.cols() != inputs.cols()) {
        throw ContractViolation("training batch fields are not aligned");
    }
}

DriftNet::DriftNet(std::size_t state_dim, SinusoidalEmbedding embedding,
                   std::vector<std::size_t> hidden_widths)
    : state_dim_(state_dim),
      embedding_(std::move(embedding)),
      hidden_(std::move(hidden_widths)) {
    if (state_dim_ == 0) {
        throw ContractViolation("drift net needs state_dim >= 1");
    }
    std::vector<std::size_t> widths;
    widths.push_back(input_dim());
    for (std::size_t h : hidden_) {
        if (h == 0) {
            throw ContractViolation("hidden widths must be positive");
        }
        widths.push_back(h);
    }
    widths.push_back(state_dim_);
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        LayerView view;
        view.in = widths[l];
        view.out = widths[l + 1];
        view.w_off = offset;
        offset += view.in * view.out;
        view.b_off = offset;
        offset += view.out;
        layers_.push_back(view);
    }
    params_.assign(offset, 0.0);
}

DriftNet DriftNet::standard(std::size_t state_dim, double horizon, double dt) {
    auto emb = SinusoidalEmbedding::geometric(16, 4.0 * horizon, dt);
    return DriftNet(state_dim, std::move(emb), {128, 128, 128, 128});
}

void DriftNet::init_params(std::uint64_t seed) {
    RngStream rng(seed, 0x5Au << 24);
    for (const LayerView& l : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (std::size_t i = 0; i < l.in * l.out; ++i) {
            params_[l.w_off + i] = bound * (2.0 * rng.next_uniform() - 1.0);
        }
        for (std::size_t i = 0; i < l.out; ++i) {
            params_[l.b_off + i] = 0.0;
        }
    }
}

namespace {

bool params_finite(const Vec& p) {
    for (double v : p) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

} // namespace

// Per-invocation activation/gradient buffers.
struct NetScratch {
    std::vector<Matrix> acts;  // acts[0] is the assembled input
    std::vector<Matrix> grads; // gradient w.r.t. pre-bias outputs per layer

    void prepare(const DriftNet& net, std::size_t batch,
                 const std::vector<DriftNet::LayerView>& layers, bool backward) {
        acts.resize(layers.size() + 1);
        acts[0].resize(batch, net.input_dim());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            acts[l + 1].resize(batch, layers[l].out);
        }
        if (backward) {
            grads.resize(layers.size());
            for (std::size_t l = 0; l < layers.size(); ++l) {
                grads[l].resize(batch, layers[l].out);
            }
        }
    }
};

namespace {

void assemble_input(const DriftNet& net, const Matrix& states,
                    const double* times_or_null, double shared_t, Matrix& a0) {
    const std::size_t b = states.rows();
    const std::size_t d = states.cols();
    const auto& emb = net.embedding();
    Vec shared_emb;
    if (times_or_null == nullptr) {
        shared_emb = emb.embed(shared_t);
    }
    for (std::size_t i = 0; i < b; ++i) {
        double* row = a0.row(i);
        std::memcpy(row, states.row(i), d * sizeof(double));
        if (times_or_null == nullptr) {
            std::memcpy(row + d, shared_emb.data(), shared_emb.size() * sizeof(double));
        } else {
            emb.embed(times_or_null[i], row + d);
        }
    }
}

} // namespace

namespace detail {

void forward_layers(const Vec& params, const std::vector<DriftNet::LayerView>& layers,
                    NetScratch& ws) {
    const auto& k = kern::active();
    const std::size_t b = ws.acts[0].rows();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& lay = layers[l];
        k.gemm_nn(ws.acts[l].data(), params.data() + lay.w_off, ws.acts[l + 1].data(),
                  b, lay.in, lay.out);
        k.add_bias_rows(ws.acts[l + 1].data(), params.data() + lay.b_off, b, lay.out);
        if (l + 1 < layers.size()) {
            k.tanh_inplace(ws.acts[l + 1].data(), b * lay.out);
        }
    }
}

// dOut must sit in ws.grads.back(); accumulates into grad (same layout as
// params). Returns nothing; ws.grads[l] ends up holding dLoss/dZ_l.
void backward_layers(const Vec& params, const std::vector<DriftNet::LayerView>& layers,
                     NetScratch& ws, Vec& grad) {
    const auto& k = kern::active();
    const std::size_t b = ws.acts[0].rows();
    for (std::size_t l = layers.size(); l-- > 0;) {
        const auto& lay = layers[l];
        const Matrix& delta = ws.grads[l];
        k.gemm_tn(ws.acts[l].data(), delta.data(), grad.data() + lay.w_off, lay.in, b,
                  lay.out);
        k.colsum(delta.data(), b, lay.out, grad.data() + lay.b_off);
        if (l > 0) {
            Matrix& prev = ws.grads[l - 1];
            k.gemm_nt(delta.data(), params.data() + lay.w_off, prev.data(), b, lay.out,
                      lay.in);
            k.tanh_backward(prev.data(), ws.acts[l].data(), b * layers[l - 1].out);
        }
    }
}

} // namespace detail

Vec DriftNet::forward(std::span<const double> x, double t) const {
    if (x.size() != state_dim_) {
        throw ContractViolation("drift net input has wrong dimension");
    }
    Matrix states(1, state_dim_);
    std::memcpy(states.row(0), x.data(), state_dim_ * sizeof(double));
    Matrix out(1, state_dim_);
    forward_batch(states, t, out);
    return Vec(out.row(0), out.row(0) + state_dim_);
}

void DriftNet::forward_batch(const Matrix& states, double t, Matrix& out) const {
    if (!params_finite(params_)) {
        throw NumericalDivergence("drift net parameters are not finite");
    }
    NetScratch ws;
    ws.prepare(*this, states.rows(), layers_, false);
    assemble_input(*this, states, nullptr, t, ws.acts[0]);
    detail::forward_layers(params_, layers_, ws);
    out = ws.acts.back();
}

double DriftNet::loss_impl(const TrainingBatch& batch, Vec* grad,
                           NetScratch& ws) const {
    batch.validate();
    const std::size_t b = batch.size();
    const std::size_t d = batch.inputs.cols();
    ws.prepare(*this, b, layers_, grad != nullptr);
    assemble_input(*this, batch.inputs, batch.times.data(), 0.0, ws.acts[0]);
    detail::forward_layers(params_, layers_, ws);

    const Matrix& out = ws.acts.back();
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(b);
    Matrix* dout = grad != nullptr ? &ws.grads.back() : nullptr;
    for (std::size_t i = 0; i < b; ++i) {
        const double delta = batch.deltas[i];
        const double* orow = out.row(i);
        const double* yrow = batch.targets.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double r = orow[j] * delta - yrow[j];
            total += r * r;
            if (dout != nullptr) {
                (*dout)(i, j) = 2.0 * delta * r * inv_b;
            }
        }
    }
    if (grad != nullptr) {
        detail::backward_layers(params_, layers_, ws, *grad);
    }
    return total * inv_b;
}

double DriftNet::loss(const TrainingBatch& batch, Vec& grad) const {
    grad.assign(params_.size(), 0.0);
    NetScratch ws;
    return loss_impl(batch, &grad, ws);
}

double DriftNet::loss_only(const TrainingBatch& batch) const {
    NetScratch ws;
    return loss_impl(batch, nullptr, ws);
}

BatchDriftFn DriftNet::as_batch_drift() const {
    auto net = std::make_shared<DriftNet>(*this);
    return [net](const Matrix& states, double t, Matrix& out) {
        net->forward_batch(states, t, out);
    };
}

TrainingBatch build_training_set(const std::vector<ReferenceTrajectory>& pool) {
    if (pool.empty()) {
        throw ContractViolation("training pool is empty");
    }
    std::size_t total = 0;
    const std::size_t d = pool.front().states.dim();
    for (const auto& ref : pool) {
        if (ref.diffs.rows() + 1 != ref.states.states.rows() || ref.diffs.cols() != d) {
            throw ContractViolation("reference trajectory lacks aligned diff records");
        }
        total += ref.diffs.rows();
    }
    TrainingBatch set;
    set.inputs.resize(total, d);
    set.targets.resize(total, d);
    set.times.resize(total);
    set.deltas.resize(total);
    std::size_t row = 0;
    for (const auto& ref : pool) {
        const TimeGrid& grid = *ref.states.grid;
        for (std::size_t j = 0; j < ref.diffs.rows(); ++j) {
            std::memcpy(set.inputs.row(row), ref.states.states.row(j), d * sizeof(double));
            std::memcpy(set.targets.row(row), ref.diffs.row(j), d * sizeof(double));
            set.times[row] = grid.times[j];
            set.deltas[row] = grid.deltas[j];
            ++row;
        }
    }
    return set;
}

namespace {

void gather_batch(const TrainingBatch& all, std::span<const std::uint32_t> idx,
                  TrainingBatch& out) {
    const std::size_t d = all.inputs.cols();
    out.inputs.resize(idx.size(), d);
    out.targets.resize(idx.size(), d);
    out.times.resize(idx.size());
    out.deltas.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::memcpy(out.inputs.row(i), all.inputs.row(idx[i]), d * sizeof(double));
        std::memcpy(out.targets.row(i), all.targets.row(idx[i]), d * sizeof(double));
        out.times[i] = all.times[idx[i]];
        out.deltas[i] = all.deltas[idx[i]];
    }
}

double dataset_loss(const DriftNet& net, const TrainingBatch& all,
                    std::size_t chunk_size) {
    const std::size_t n = all.size();
    double total = 0.0;
    TrainingBatch chunk;
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::size_t start = 0; start < n; start += chunk_size) {
        const std::size_t len = std::min(chunk_size, n - start);
        gather_batch(all, {idx.data() + start, len}, chunk);
        total += net.loss_only(chunk) * static_cast<double>(len);
    }
    return total / static_cast<double>(n);
}

} // namespace

TrainResult train(DriftNet& net, const std::vector<ReferenceTrajectory>& pool,
                  const TrainOptions& opts) {
    const TrainingBatch all = build_training_set(pool);
    const std::size_t n = all.size();
    const std::size_t bs = std::max<std::size_t>(1, opts.batch_size);

    TrainResult result;
    result.initial_loss = dataset_loss(net, all, bs);

    Vec& theta = net.params();
    Vec grad(theta.size(), 0.0);
    Vec m(theta.size(), 0.0);
    Vec v(theta.size(), 0.0);
    std::size_t adam_t = 0;

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    TrainingBatch batch;

    // Two halves of each mini-batch evaluated concurrently; the combination
    // order is fixed so results do not depend on scheduling.
    const std::size_t n_workers = 2;

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        RngStream shuffle_rng(opts.seed, 0x6Bu << 24, static_cast<std::uint32_t>(epoch));
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(
                shuffle_rng.next_uniform() * static_cast<double>(i));
            std::swap(order[i - 1], order[std::min(j, i - 1)]);
        }

        double epoch_total = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += bs, ++batch_index) {
            const std::size_t len = std::min(bs, n - start);
            double loss_val = 0.0;
            if (len >= 64 && n_workers > 1) {
                const std::size_t half = len / 2;
                TrainingBatch b0, b1;
                gather_batch(all, {order.data() + start, half}, b0);
                gather_batch(all, {order.data() + start + half, len - half}, b1);
                Vec g0(theta.size(), 0.0);
                Vec g1(theta.size(), 0.0);
                auto fut = std::async(std::launch::async,
                                      [&]() { return net.loss(b1, g1); });
                const double l0 = net.loss(b0, g0);
                const double l1 = fut.get();
                const double w0 = static_cast<double>(half) / static_cast<double>(len);
                const double w1 = 1.0 - w0;
                loss_val = l0 * w0 + l1 * w1;
                for (std::size_t i = 0; i < grad.size(); ++i) {
                    grad[i] = g0[i] * w0 + g1[i] * w1;
                }
            } else {
                gather_batch(all, {order.data() + start, len}, batch);
                loss_val = net.loss(batch, grad);
            }
            if (!std::isfinite(loss_val)) {
                std::ostringstream msg;
                msg << "training loss diverged at epoch " << epoch << ", batch "
                    << batch_index;
                throw NumericalDivergence(msg.str());
            }
            epoch_total += loss_val * static_cast<double>(len);

            if (opts.plain_sgd) {
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    theta[i] -= opts.lr * grad[i];
                }
            } else {
                ++adam_t;
                const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(adam_t));
                const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(adam_t));
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * grad[i];
                    v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * grad[i] * grad[i];
                    const double mhat = m[i] / bc1;
                    const double vhat = v[i] / bc2;
                    theta[i] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
                }
            }
        }
        result.epoch_loss.push_back(epoch_total / static_cast<double>(n));
    }

    result.final_loss = dataset_loss(net, all, bs);
    return result;
}

std::vector<Trajectory> sample_learned(const DriftNet& net,
                                       const DiffusionSchedule& schedule,
                                       const GridPtr& grid, const InitSampler& init,
                                       std::size_t n_paths, std::uint64_t seed) {
    SdeModel model;
    model.dim = net.state_dim();
    model.drift = net.as_batch_drift();
    model.g = schedule;
    model.init = init;
    return simulate(model, grid, n_paths, seed);
}

void DriftNet::save_checkpoint(const std::filesystem::path& path,
                               const std::string& manifest_json) const {
    json header;
    header["state_dim"] = state_dim_;
    header["hidden"] = hidden_;
    header["freqs"] = embedding_.freqs;
    if (!manifest_json.empty()) {
        header["manifest"] = json::parse(manifest_json);
    }
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot open checkpoint for writing: " + path.string());
    }
    const char magic[8] = {'S', 'M', 'C', 'S', 'D', 'E', 'N', '1'};
    out.write(magic, sizeof(magic));
    const std::uint32_t head_len = static_cast<std::uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    const std::uint64_t count = params_.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(params_.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
    if (!out) {
        throw ConfigError("checkpoint write failed: " + path.string());
    }
}

DriftNet::Loaded DriftNet::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open checkpoint: " + path.string());
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, "SMCSDEN1", 8) != 0) {
        throw ParseError("not a drift-net checkpoint: " + path.string());
    }
    std::uint32_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    std::string head(head_len, '\0');
    in.read(head.data(), head_len);
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in) {
        throw ParseError("truncated checkpoint header: " + path.string());
    }
    json header = json::parse(head);

    SinusoidalEmbedding emb;
    emb.freqs = header.at("freqs").get<std::vector<double>>();
    DriftNet net(header.at("state_dim").get<std::size_t>(), std::move(emb),
                 header.at("hidden").get<std::vector<std::size_t>>());
    if (net.params_.size() != count) {
        throw ParseError("checkpoint parameter count mismatch");
    }
    in.read(reinterpret_cast<char*>(net.params_.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) {
        throw ParseError("truncated checkpoint parameters: " + path.string());
    }
    std::string manifest;
    if (header.contains("manifest")) {
        manifest = header["manifest"].dump();
    }
    return Loaded{std::move(net), std::move(manifest)};
}

} // namespace smcsde
