// SPDX-License-Identifier: Apache-2.0
//
// musa-mud: grant-free MUSA uplink multi-user detection
// Copyright (C) 2026 The musa-mud authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef MUSA_NN_HPP
#define MUSA_NN_HPP

#include "musa/dataset.hpp"
#include "musa/rng.hpp"
#include "musa/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

/// Minimal multilayer perceptron for multi-label activity classification.
///
/// Batches are row-major in the mathematical sense: one sample per row of an
/// Eigen matrix. Dense weights are stored out x in, so a layer computes
/// Z = X W^T + 1 b^T.
namespace musa::nn
{

enum class Mode
{
    Train,
    Inference
};

struct Dense
{
    RMatrix weight; // out x in
    RVector bias;
    RMatrix grad_weight;
    RVector grad_bias;
    RMatrix input; // cached for backward
};

struct BatchNorm
{
    RVector gamma;
    RVector beta;
    RVector running_mean;
    RVector running_var;
    RVector grad_gamma;
    RVector grad_beta;
    double epsilon = 1e-5;
    double momentum = 0.9;
    RMatrix normalized; // cached x_hat
    RVector inv_std;
};

struct Relu
{
    RMatrix mask;
};

// Inverted dropout: kept units are scaled by 1 / (1 - p) at train time.
struct Dropout
{
    double p = 0.0;
    RMatrix mask;
};

using Layer = std::variant<Dense, BatchNorm, Relu, Dropout>;

struct Architecture
{
    std::size_t inputs = 8;  // 2L
    std::size_t outputs = 8; // N
    std::size_t hidden_width = 256;
    // Dense layers between the input dense and the output dense.
    std::size_t hidden_dense_layers = 2;
    double dropout = 0.1;
    // true: dense -> batchnorm -> relu; false: dense -> relu -> batchnorm.
    bool norm_before_activation = true;
    double bn_epsilon = 1e-5;
    double bn_momentum = 0.9;

    void validate() const;
    bool operator==(const Architecture &) const = default;
};

// Identity of the data a model was trained on.
struct ModelInfo
{
    std::uint64_t codebook_hash = 0;
    std::uint64_t config_hash = 0;
    bool operator==(const ModelInfo &) const = default;
};

// A view of one trainable tensor and its gradient, both contiguous.
struct ParamView
{
    double *value;
    const double *grad;
    Eigen::Index size;
};

class Mlp
{
public:
    // He-uniform weights, zero biases, identity batchnorm.
    static Mlp build(const Architecture &arch, std::uint64_t seed);

    Mlp(Architecture arch, std::vector<Layer> layers);

    const Architecture &architecture() const noexcept { return arch_; }
    const std::vector<Layer> &layers() const noexcept { return layers_; }
    std::vector<Layer> &layers() noexcept { return layers_; }

    ModelInfo info;

    // Pre-sigmoid outputs. Train mode uses batch statistics, updates running
    // statistics, draws dropout masks from rng, and caches what backward needs.
    RMatrix forward_logits(const RMatrix &batch, Mode mode, Rng *rng = nullptr);

    // Sigmoid probabilities.
    RMatrix forward(const RMatrix &batch, Mode mode, Rng *rng = nullptr);

    // Inference-mode probabilities without touching any cached state.
    RMatrix predict(const RMatrix &batch) const;

    // Backpropagates dLoss/dlogits through the cached train-mode pass and
    // overwrites every parameter gradient.
    void backward(const RMatrix &grad_logits);

    std::vector<ParamView> parameters();

    std::size_t parameter_count() const;

    bool parameters_finite() const;

    // Same parameters and running statistics, caches ignored.
    bool same_parameters(const Mlp &other) const;

private:
    RMatrix inference_logits(const RMatrix &batch) const;

    Architecture arch_;
    std::vector<Layer> layers_;
};

// Layer stack implied by an architecture, with empty tensors.
std::vector<Layer> layer_plan(const Architecture &arch);

RMatrix sigmoid(const RMatrix &logits);

inline constexpr double kProbabilityClamp = 1e-7;

// Mean binary cross-entropy over all entries, probabilities clamped to [eps, 1 - eps].
double bce_loss(const RMatrix &probabilities, const RMatrix &labels);

// dLoss/dlogits for bce_loss(sigmoid(logits), labels); zero where the clamp is active.
RMatrix bce_grad_logits(const RMatrix &probabilities, const RMatrix &labels);

// Layer-level primitives, exposed for testing.
RMatrix batchnorm_forward(BatchNorm &bn, const RMatrix &z, Mode mode);

// Binary keep mask: each entry is 1 with probability 1 - p, independently.
RMatrix dropout_mask(Eigen::Index rows, Eigen::Index width, double p, Rng &rng);
RVector dropout_mask(Eigen::Index width, double p, Rng &rng);

class Adam
{
public:
    Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    void step(const std::vector<ParamView> &params);
    std::size_t steps() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<RVector> m_, v_;
};

struct TrainConfig
{
    double learning_rate = 1e-3;
    std::size_t batch_size = 1000;
    std::size_t epochs = 20;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    // Decision threshold for the validation precision/recall.
    double threshold = 0.5;

    void validate() const;
};

struct EpochRecord
{
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> auc;
};

struct TrainResult
{
    Mlp model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    std::size_t steps = 0;
};

// One optimizer step on a batch; returns the batch loss before the update.
// Throws TrainingDiverged(step_index) on a non-finite loss or parameters.
double train_step(Mlp &model, Adam &adam, const RMatrix &batch, const RMatrix &labels, Rng &rng,
                  std::size_t step_index);

// Mini-batch Adam over the training split, validation after every epoch; the
// returned model carries the weights of the best validation loss.
TrainResult train(Mlp model, const Dataset &dataset, const TrainConfig &config);

// Gathers dataset rows [begin, end) as double matrices.
RMatrix dataset_inputs(const Dataset &dataset, std::size_t begin, std::size_t end);
RMatrix dataset_labels(const Dataset &dataset, std::size_t begin, std::size_t end);

double evaluate_loss(const Mlp &model, const Dataset &dataset, Split split);

// Checkpoint: versioned header, then little-endian float64 tensors in layer order.
void write_checkpoint(std::ostream &out, const Mlp &model);
Mlp read_checkpoint(std::istream &in);
void save_checkpoint(const std::string &path, const Mlp &model);
Mlp load_checkpoint(const std::string &path);

} // namespace musa::nn

#endif
