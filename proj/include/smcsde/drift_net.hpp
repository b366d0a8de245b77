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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smcsde/matrix.hpp"
#include "smcsde/sde.hpp"
#include "smcsde/smoother.hpp"

namespace smcsde {

// Fixed sinusoidal features of the time input: [sin(w_k t), cos(w_k t)] per
// frequency, frequencies on a geometric ladder.
struct SinusoidalEmbedding {
    std::vector<double> freqs;

    // Ladder of n periods from p_max down to p_min (both > 0).
    static SinusoidalEmbedding geometric(std::size_t n_freqs, double period_max,
                                         double period_min);

    std::size_t dim() const { return 2 * freqs.size(); }
    void embed(double t, double* out) const;
    Vec embed(double t) const;
};

// Supervision tuples for the mean-matching regression: predict
// drift(x, t) * delta ~= target.
struct TrainingBatch {
    Matrix inputs;  // B x d_x
    Vec times;      // B
    Vec deltas;     // B
    Matrix targets; // B x d_x

    std::size_t size() const { return inputs.rows(); }
    void validate() const;
};

struct TrainOptions {
    double lr = 1e-4;
    std::size_t batch_size = 2048;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;
    bool plain_sgd = false; // default optimizer is adaptive with bias correction
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainResult {
    Vec epoch_loss;         // mean sample loss per epoch
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

struct NetScratch;

// Feed-forward drift f(x, t): input [x, embedding(t)], tanh hidden layers,
// linear output of dimension d_x. Parameters live in one flat vector.
class DriftNet {
public:
    struct LayerView {
        std::size_t w_off, b_off, in, out;
    };

    DriftNet(std::size_t state_dim, SinusoidalEmbedding embedding,
             std::vector<std::size_t> hidden_widths);

    // Four tanh layers of width 128 with a 16-frequency embedding whose
    // periods run from 4 * horizon down to the step length.
    static DriftNet standard(std::size_t state_dim, double horizon, double dt);

    void init_params(std::uint64_t seed);

    std::size_t state_dim() const { return state_dim_; }
    std::size_t input_dim() const { return state_dim_ + embedding_.dim(); }
    const SinusoidalEmbedding& embedding() const { return embedding_; }
    const std::vector<std::size_t>& hidden_widths() const { return hidden_; }
    std::size_t n_params() const { return params_.size(); }
    Vec& params() { return params_; }
    const Vec& params() const { return params_; }
    const std::vector<LayerView>& layer_views() const { return layers_; }

    // Single-point evaluation; batched calls produce the same values row by
    // row.
    Vec forward(std::span<const double> x, double t) const;

    // Evaluates the drift for every row of `states` at one shared time.
    void forward_batch(const Matrix& states, double t, Matrix& out) const;

    // Mean over the batch of |f(x_b, t_b) * delta_b - target_b|^2, with the
    // gradient w.r.t. the flat parameter vector accumulated into `grad`
    // (overwritten, same length as params).
    double loss(const TrainingBatch& batch, Vec& grad) const;
    double loss_only(const TrainingBatch& batch) const;

    // Drift functor for simulate(); not safe for concurrent calls (owns one
    // scratch workspace).
    BatchDriftFn as_batch_drift() const;

    void save_checkpoint(const std::filesystem::path& path,
                         const std::string& manifest_json) const;
    struct Loaded {
        DriftNet net;
        std::string manifest_json;
    };
    static Loaded load_checkpoint(const std::filesystem::path& path);

private:
    double loss_impl(const TrainingBatch& batch, Vec* grad, NetScratch& ws) const;

    std::size_t state_dim_;
    SinusoidalEmbedding embedding_;
    std::vector<std::size_t> hidden_;
    std::vector<LayerView> layers_;
    Vec params_;
};

// Flattens (state, time, delta, mean-change target) tuples from every
// transition of every reference trajectory in the pool.
TrainingBatch build_training_set(const std::vector<ReferenceTrajectory>& pool);

// Mini-batch training of the mean-matching regression; epoch shuffles and
// parameter init are seed-deterministic.
TrainResult train(DriftNet& net, const std::vector<ReferenceTrajectory>& pool,
                  const TrainOptions& opts);

// Euler-Maruyama sampling from the learned drift; observations play no role
// here.
std::vector<Trajectory> sample_learned(const DriftNet& net,
                                       const DiffusionSchedule& schedule,
                                       const GridPtr& grid, const InitSampler& init,
                                       std::size_t n_paths, std::uint64_t seed);

} // namespace smcsde
