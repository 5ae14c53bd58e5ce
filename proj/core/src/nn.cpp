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

#include "musa/nn.hpp"

#include "musa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace musa::nn
{

namespace
{

template <class... Ts>
struct overloaded : Ts...
{
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Dense make_dense(std::size_t in, std::size_t out)
{
    Dense d;
    d.weight = RMatrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    d.bias = RVector::Zero(static_cast<Eigen::Index>(out));
    d.grad_weight = RMatrix::Zero(d.weight.rows(), d.weight.cols());
    d.grad_bias = RVector::Zero(d.bias.size());
    return d;
}

BatchNorm make_batchnorm(std::size_t width, double epsilon, double momentum)
{
    const auto w = static_cast<Eigen::Index>(width);
    BatchNorm bn;
    bn.gamma = RVector::Ones(w);
    bn.beta = RVector::Zero(w);
    bn.running_mean = RVector::Zero(w);
    bn.running_var = RVector::Ones(w);
    bn.grad_gamma = RVector::Zero(w);
    bn.grad_beta = RVector::Zero(w);
    bn.epsilon = epsilon;
    bn.momentum = momentum;
    return bn;
}

void append_block(std::vector<Layer> &layers, const Architecture &arch, std::size_t in)
{
    layers.emplace_back(make_dense(in, arch.hidden_width));
    if (arch.norm_before_activation)
    {
        layers.emplace_back(make_batchnorm(arch.hidden_width, arch.bn_epsilon, arch.bn_momentum));
        layers.emplace_back(Relu{});
    }
    else
    {
        layers.emplace_back(Relu{});
        layers.emplace_back(make_batchnorm(arch.hidden_width, arch.bn_epsilon, arch.bn_momentum));
    }
}

RMatrix dense_forward(const Dense &d, const RMatrix &x)
{
    if (x.cols() != d.weight.cols())
        throw ShapeError("dense layer expects " + std::to_string(d.weight.cols()) + " inputs, got " +
                         std::to_string(x.cols()));
    RMatrix z = x * d.weight.transpose();
    z.rowwise() += d.bias.transpose();
    return z;
}

RMatrix batchnorm_inference(const BatchNorm &bn, const RMatrix &z)
{
    const RVector scale = bn.gamma.array() / (bn.running_var.array() + bn.epsilon).sqrt();
    RMatrix out = (z.rowwise() - bn.running_mean.transpose()).array().rowwise() * scale.transpose().array();
    out.rowwise() += bn.beta.transpose();
    return out;
}

} // namespace

void Architecture::validate() const
{
    if (inputs == 0 || outputs == 0 || hidden_width == 0)
        throw ConfigError("network widths must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("dropout probability must lie in [0, 1)");
    if (!(bn_epsilon > 0.0) || !(bn_momentum >= 0.0 && bn_momentum < 1.0))
        throw ConfigError("invalid batchnorm epsilon or momentum");
}

std::vector<Layer> layer_plan(const Architecture &arch)
{
    arch.validate();
    std::vector<Layer> layers;
    append_block(layers, arch, arch.inputs);
    for (std::size_t i = 0; i < arch.hidden_dense_layers; ++i)
        append_block(layers, arch, arch.hidden_width);
    layers.emplace_back(Dropout{arch.dropout, {}});
    layers.emplace_back(make_dense(arch.hidden_width, arch.outputs));
    return layers;
}

Mlp::Mlp(Architecture arch, std::vector<Layer> layers) : arch_(std::move(arch)), layers_(std::move(layers))
{
    arch_.validate();
}

Mlp Mlp::build(const Architecture &arch, std::uint64_t seed)
{
    Mlp model(arch, layer_plan(arch));
    Rng rng = make_stream(seed, {0x1417ULL});
    for (Layer &layer : model.layers_)
        if (auto *d = std::get_if<Dense>(&layer))
        {
            const double limit = std::sqrt(6.0 / static_cast<double>(d->weight.cols()));
            for (Eigen::Index j = 0; j < d->weight.cols(); ++j)
                for (Eigen::Index i = 0; i < d->weight.rows(); ++i)
                    d->weight(i, j) = limit * (2.0 * uniform01(rng) - 1.0);
        }
    return model;
}

RMatrix dropout_mask(Eigen::Index rows, Eigen::Index width, double p, Rng &rng)
{
    if (!(p >= 0.0 && p < 1.0))
        throw ConfigError("dropout probability must lie in [0, 1)");
    RMatrix mask(rows, width);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < width; ++j)
            mask(i, j) = p > 0.0 && uniform01(rng) < p ? 0.0 : 1.0;
    return mask;
}

RVector dropout_mask(Eigen::Index width, double p, Rng &rng)
{
    return dropout_mask(1, width, p, rng).row(0).transpose();
}

RMatrix batchnorm_forward(BatchNorm &bn, const RMatrix &z, Mode mode)
{
    if (z.cols() != bn.gamma.size())
        throw ShapeError("batchnorm width mismatch");
    if (mode == Mode::Inference)
        return batchnorm_inference(bn, z);

    if (z.rows() < 2)
        throw ShapeError("batchnorm in train mode needs at least two samples per batch");
    const RVector mean = z.colwise().mean().transpose();
    const RMatrix centered = z.rowwise() - mean.transpose();
    const RVector var = centered.array().square().colwise().mean().transpose();
    bn.inv_std = (var.array() + bn.epsilon).rsqrt();
    bn.normalized = centered.array().rowwise() * bn.inv_std.transpose().array();
    bn.running_mean = bn.momentum * bn.running_mean + (1.0 - bn.momentum) * mean;
    bn.running_var = bn.momentum * bn.running_var + (1.0 - bn.momentum) * var;

    RMatrix out = bn.normalized.array().rowwise() * bn.gamma.transpose().array();
    out.rowwise() += bn.beta.transpose();
    return out;
}

RMatrix Mlp::forward_logits(const RMatrix &batch, Mode mode, Rng *rng)
{
    if (batch.cols() != static_cast<Eigen::Index>(arch_.inputs))
        throw ShapeError("batch width " + std::to_string(batch.cols()) + " does not match model input width " +
                         std::to_string(arch_.inputs));
    if (mode == Mode::Inference)
        return inference_logits(batch);

    RMatrix x = batch;
    for (Layer &layer : layers_)
    {
        x = std::visit(overloaded{
                           [&](Dense &d) -> RMatrix {
                               d.input = x;
                               return dense_forward(d, x);
                           },
                           [&](BatchNorm &bn) -> RMatrix { return batchnorm_forward(bn, x, Mode::Train); },
                           [&](Relu &r) -> RMatrix {
                               r.mask = (x.array() > 0.0).cast<double>();
                               return x.cwiseProduct(r.mask);
                           },
                           [&](Dropout &d) -> RMatrix {
                               if (d.p == 0.0)
                               {
                                   d.mask.resize(0, 0);
                                   return x;
                               }
                               if (rng == nullptr)
                                   throw ConfigError("train-mode dropout needs a random generator");
                               d.mask = dropout_mask(x.rows(), x.cols(), d.p, *rng) / (1.0 - d.p);
                               return x.cwiseProduct(d.mask);
                           },
                       },
                       layer);
    }
    return x;
}

RMatrix Mlp::forward(const RMatrix &batch, Mode mode, Rng *rng)
{
    if (mode == Mode::Inference)
        return predict(batch);
    return sigmoid(forward_logits(batch, mode, rng));
}

RMatrix Mlp::predict(const RMatrix &batch) const
{
    return sigmoid(inference_logits(batch));
}

RMatrix Mlp::inference_logits(const RMatrix &batch) const
{
    if (batch.cols() != static_cast<Eigen::Index>(arch_.inputs))
        throw ShapeError("batch width " + std::to_string(batch.cols()) + " does not match model input width " +
                         std::to_string(arch_.inputs));
    RMatrix x = batch;
    for (const Layer &layer : layers_)
    {
        std::visit(overloaded{
                       [&](const Dense &d) { x = dense_forward(d, x); },
                       [&](const BatchNorm &bn) { x = batchnorm_inference(bn, x); },
                       [&](const Relu &) { x = x.cwiseMax(0.0); },
                       [&](const Dropout &) {},
                   },
                   layer);
    }
    return x;
}

void Mlp::backward(const RMatrix &grad_logits)
{
    RMatrix g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    {
        std::visit(overloaded{
                       [&](Dense &d) {
                           if (d.input.rows() != g.rows())
                               throw ShapeError("backward called without a matching train-mode forward");
                           d.grad_weight.noalias() = g.transpose() * d.input;
                           d.grad_bias = g.colwise().sum().transpose();
                           g = g * d.weight;
                       },
                       [&](BatchNorm &bn) {
                           const double b = static_cast<double>(g.rows());
                           bn.grad_gamma = g.cwiseProduct(bn.normalized).colwise().sum().transpose();
                           bn.grad_beta = g.colwise().sum().transpose();
                           const RMatrix dxhat = g.array().rowwise() * bn.gamma.transpose().array();
                           const RVector sum_dxhat = dxhat.colwise().sum().transpose();
                           const RVector sum_dxhat_xhat = dxhat.cwiseProduct(bn.normalized).colwise().sum().transpose();
                           RMatrix inner = (b * dxhat).rowwise() - sum_dxhat.transpose();
                           inner -= (bn.normalized.array().rowwise() * sum_dxhat_xhat.transpose().array()).matrix();
                           g = (inner.array().rowwise() * (bn.inv_std.transpose().array() / b)).matrix();
                       },
                       [&](Relu &r) { g = g.cwiseProduct(r.mask); },
                       [&](Dropout &d) {
                           if (d.mask.size() != 0)
                               g = g.cwiseProduct(d.mask);
                       },
                   },
                   *it);
    }
}

std::vector<ParamView> Mlp::parameters()
{
    std::vector<ParamView> out;
    for (Layer &layer : layers_)
    {
        if (auto *d = std::get_if<Dense>(&layer))
        {
            out.push_back({d->weight.data(), d->grad_weight.data(), d->weight.size()});
            out.push_back({d->bias.data(), d->grad_bias.data(), d->bias.size()});
        }
        else if (auto *bn = std::get_if<BatchNorm>(&layer))
        {
            out.push_back({bn->gamma.data(), bn->grad_gamma.data(), bn->gamma.size()});
            out.push_back({bn->beta.data(), bn->grad_beta.data(), bn->beta.size()});
        }
    }
    return out;
}

std::size_t Mlp::parameter_count() const
{
    std::size_t count = 0;
    for (const Layer &layer : layers_)
    {
        if (const auto *d = std::get_if<Dense>(&layer))
            count += static_cast<std::size_t>(d->weight.size() + d->bias.size());
        else if (const auto *bn = std::get_if<BatchNorm>(&layer))
            count += static_cast<std::size_t>(bn->gamma.size() + bn->beta.size());
    }
    return count;
}

bool Mlp::parameters_finite() const
{
    for (const Layer &layer : layers_)
    {
        if (const auto *d = std::get_if<Dense>(&layer))
        {
            if (!d->weight.allFinite() || !d->bias.allFinite())
                return false;
        }
        else if (const auto *bn = std::get_if<BatchNorm>(&layer))
        {
            if (!bn->gamma.allFinite() || !bn->beta.allFinite() || !bn->running_mean.allFinite() ||
                !bn->running_var.allFinite())
                return false;
        }
    }
    return true;
}

bool Mlp::same_parameters(const Mlp &other) const
{
    if (!(arch_ == other.arch_) || layers_.size() != other.layers_.size())
        return false;
    for (std::size_t i = 0; i < layers_.size(); ++i)
    {
        if (layers_[i].index() != other.layers_[i].index())
            return false;
        if (const auto *d = std::get_if<Dense>(&layers_[i]))
        {
            const auto &o = std::get<Dense>(other.layers_[i]);
            if (d->weight != o.weight || d->bias != o.bias)
                return false;
        }
        else if (const auto *bn = std::get_if<BatchNorm>(&layers_[i]))
        {
            const auto &o = std::get<BatchNorm>(other.layers_[i]);
            if (bn->gamma != o.gamma || bn->beta != o.beta || bn->running_mean != o.running_mean ||
                bn->running_var != o.running_var)
                return false;
        }
    }
    return true;
}

RMatrix sigmoid(const RMatrix &logits)
{
    return logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
}

double bce_loss(const RMatrix &probabilities, const RMatrix &labels)
{
    if (probabilities.rows() != labels.rows() || probabilities.cols() != labels.cols())
        throw ShapeError("prediction and label shapes differ");
    if (probabilities.size() == 0)
        throw ShapeError("empty batch");
    double total = 0.0;
    for (Eigen::Index j = 0; j < probabilities.cols(); ++j)
        for (Eigen::Index i = 0; i < probabilities.rows(); ++i)
        {
            const double p = std::clamp(probabilities(i, j), kProbabilityClamp, 1.0 - kProbabilityClamp);
            const double y = labels(i, j);
            total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        }
    return total / static_cast<double>(probabilities.size());
}

RMatrix bce_grad_logits(const RMatrix &probabilities, const RMatrix &labels)
{
    if (probabilities.rows() != labels.rows() || probabilities.cols() != labels.cols())
        throw ShapeError("prediction and label shapes differ");
    const double scale = 1.0 / static_cast<double>(probabilities.size());
    RMatrix g(probabilities.rows(), probabilities.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j)
        for (Eigen::Index i = 0; i < g.rows(); ++i)
        {
            const double p = probabilities(i, j);
            const bool clamped = p < kProbabilityClamp || p > 1.0 - kProbabilityClamp;
            g(i, j) = clamped ? 0.0 : (p - labels(i, j)) * scale;
        }
    return g;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon)
{
    if (!(learning_rate >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
        !(epsilon > 0.0))
        throw ConfigError("invalid Adam hyperparameters");
}

void Adam::step(const std::vector<ParamView> &params)
{
    if (m_.empty())
    {
        for (const ParamView &p : params)
        {
            m_.push_back(RVector::Zero(p.size));
            v_.push_back(RVector::Zero(p.size));
        }
    }
    if (m_.size() != params.size())
        throw ShapeError("optimizer state does not match the parameter list");

    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k)
    {
        Eigen::Map<RVector> value(params[k].value, params[k].size);
        Eigen::Map<const RVector> grad(params[k].grad, params[k].size);
        m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad;
        v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad.cwiseAbs2();
        value.array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
    }
}

} // namespace musa::nn
