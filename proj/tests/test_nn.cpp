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

#include "generators.hpp"

#include "musa/errors.hpp"
#include "musa/nn.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

using namespace musa;
using namespace musa::nn;
using musa::test::random_real;

namespace
{

Architecture tiny(std::size_t inputs, std::size_t outputs, std::size_t width, std::size_t hidden, double dropout)
{
    Architecture a;
    a.inputs = inputs;
    a.outputs = outputs;
    a.hidden_width = width;
    a.hidden_dense_layers = hidden;
    a.dropout = dropout;
    return a;
}

RMatrix random_labels(Rng &rng, Eigen::Index rows, Eigen::Index cols)
{
    RMatrix y(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            y(i, j) = uniform01(rng) < 0.4 ? 1.0 : 0.0;
    return y;
}

// Train-mode loss with a dropout stream replayed from a fixed seed.
double replay_loss(Mlp &model, const RMatrix &x, const RMatrix &y, std::uint64_t seed)
{
    Rng rng = make_stream(seed);
    return bce_loss(sigmoid(model.forward_logits(x, Mode::Train, &rng)), y);
}

double central_difference(Mlp &model, double &value, const RMatrix &x, const RMatrix &y, std::uint64_t seed,
                          double h)
{
    const double saved = value;
    value = saved + h;
    const double up = replay_loss(model, x, y, seed);
    value = saved - h;
    const double down = replay_loss(model, x, y, seed);
    value = saved;
    return (up - down) / (2.0 * h);
}

// Largest relative error between backprop and central differences. A stencil
// that straddles a ReLU kink gives step-size dependent differences; such
// entries are skipped and counted.
double gradient_error(Mlp model, const RMatrix &x, const RMatrix &y, std::size_t *kinks = nullptr)
{
    const std::uint64_t seed = 99;
    Rng rng = make_stream(seed);
    const RMatrix probs = sigmoid(model.forward_logits(x, Mode::Train, &rng));
    model.backward(bce_grad_logits(probs, y));

    double worst = 0.0;
    std::size_t skipped = 0;
    const double h = 1e-5;
    for (const ParamView &p : model.parameters())
    {
        const RVector analytic = Eigen::Map<const RVector>(p.grad, p.size);
        for (Eigen::Index i = 0; i < p.size; ++i)
        {
            const double numeric = central_difference(model, p.value[i], x, y, seed, h);
            const double half = central_difference(model, p.value[i], x, y, seed, h / 2.0);
            if (std::abs(numeric - half) > 1e-6 * std::max(std::abs(numeric), 1e-3))
            {
                ++skipped;
                continue;
            }
            const double scale = std::max({std::abs(numeric), std::abs(analytic(i)), 1e-6});
            worst = std::max(worst, std::abs(numeric - analytic(i)) / scale);
        }
    }
    if (kinks)
        *kinks = skipped;
    return worst;
}

std::string checkpoint_bytes(const Mlp &model)
{
    std::ostringstream out;
    write_checkpoint(out, model);
    return out.str();
}

std::vector<double> flat_parameters(Mlp &model)
{
    std::vector<double> out;
    for (const ParamView &p : model.parameters())
        out.insert(out.end(), p.value, p.value + p.size);
    return out;
}

} // namespace

TEST(Mlp, LayerPlanFollowsArchitecture)
{
    const auto layers = layer_plan(tiny(8, 8, 256, 2, 0.1));
    // 3 x (dense, batchnorm, relu) + dropout + output dense.
    ASSERT_EQ(layers.size(), 11u);
    EXPECT_TRUE(std::holds_alternative<Dense>(layers[0]));
    EXPECT_TRUE(std::holds_alternative<BatchNorm>(layers[1]));
    EXPECT_TRUE(std::holds_alternative<Relu>(layers[2]));
    EXPECT_TRUE(std::holds_alternative<Dropout>(layers[9]));
    EXPECT_TRUE(std::holds_alternative<Dense>(layers[10]));
    EXPECT_EQ(std::get<Dense>(layers[0]).weight.cols(), 8);
    EXPECT_EQ(std::get<Dense>(layers[10]).weight.rows(), 8);

    Architecture post = tiny(8, 8, 16, 0, 0.0);
    post.norm_before_activation = false;
    const auto swapped = layer_plan(post);
    EXPECT_TRUE(std::holds_alternative<Relu>(swapped[1]));
    EXPECT_TRUE(std::holds_alternative<BatchNorm>(swapped[2]));
}

TEST(Mlp, ZeroWeightsGiveOneHalf)
{
    Mlp model(tiny(4, 3, 8, 2, 0.1), layer_plan(tiny(4, 3, 8, 2, 0.1)));
    Rng rng = make_stream(1);
    const RMatrix x = random_real(rng, 6, 4);
    EXPECT_TRUE((model.predict(x).array() == 0.5).all());
    EXPECT_TRUE((model.forward(x, Mode::Train, &rng).array() == 0.5).all());
}

TEST(Mlp, TrainAndInferenceAgreeWithoutDropoutOnMatchingStats)
{
    Architecture arch = tiny(6, 4, 16, 1, 0.0);
    arch.bn_momentum = 0.0; // running statistics become the last batch's
    Mlp model = Mlp::build(arch, 3);
    Rng rng = make_stream(2);
    const RMatrix x = random_real(rng, 32, 6);
    const RMatrix train_out = model.forward(x, Mode::Train, &rng);
    const RMatrix infer_out = model.forward(x, Mode::Inference);
    EXPECT_LT((train_out - infer_out).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mlp, HandComputedSingleUnit)
{
    Mlp model(tiny(2, 1, 1, 0, 0.0), layer_plan(tiny(2, 1, 1, 0, 0.0)));
    auto &in = std::get<Dense>(model.layers()[0]);
    in.weight << 2.0, -1.0;
    in.bias << 0.5;
    auto &out = std::get<Dense>(model.layers()[4]);
    out.weight << 3.0;
    out.bias << -1.0;

    RMatrix x(2, 2);
    x << 1.0, 0.0, 0.0, 1.0;
    // z = (2.5, -0.5), batch mean 1, biased variance 2.25.
    const double s = 1.5 / std::sqrt(2.25 + 1e-5);
    const double logit0 = 3.0 * s - 1.0;
    const double logit1 = 3.0 * 0.0 - 1.0; // relu clips -s
    Rng rng = make_stream(0);
    const RMatrix p = model.forward(x, Mode::Train, &rng);
    EXPECT_NEAR(p(0, 0), 1.0 / (1.0 + std::exp(-logit0)), 1e-14);
    EXPECT_NEAR(p(1, 0), 1.0 / (1.0 + std::exp(-logit1)), 1e-14);
}

TEST(Mlp, ShapeMismatchIsRejected)
{
    Mlp model = Mlp::build(tiny(4, 2, 8, 1, 0.0), 1);
    EXPECT_THROW(model.predict(RMatrix::Zero(3, 5)), ShapeError);
}

TEST(BatchNormLayer, ConstantBatchMapsToZero)
{
    BatchNorm bn = std::get<BatchNorm>(layer_plan(tiny(2, 1, 3, 0, 0.0))[1]);
    RMatrix z(4, 3);
    z.rowwise() = RVector::LinSpaced(3, -1.0, 5.0).transpose();
    EXPECT_LT(batchnorm_forward(bn, z, Mode::Train).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BatchNormLayer, StandardizesAndAppliesAffine)
{
    // A negligible epsilon so the variance identities hold to 1e-6.
    BatchNorm bn = std::get<BatchNorm>(layer_plan(tiny(2, 1, 5, 0, 0.0))[1]);
    bn.epsilon = 1e-12;
    Rng rng = make_stream(4);
    const RMatrix z = 7.0 * random_real(rng, 64, 5).array() + 3.0;
    const RMatrix out = batchnorm_forward(bn, z, Mode::Train);
    for (Eigen::Index j = 0; j < 5; ++j)
    {
        const double mean = out.col(j).mean();
        const double var = (out.col(j).array() - mean).square().mean();
        EXPECT_NEAR(mean, 0.0, 1e-6);
        EXPECT_NEAR(var, 1.0, 1e-6);
    }

    bn.gamma.setConstant(2.0);
    bn.beta.setConstant(3.0);
    const RMatrix affine = batchnorm_forward(bn, out, Mode::Train);
    for (Eigen::Index j = 0; j < 5; ++j)
    {
        const double mean = affine.col(j).mean();
        EXPECT_NEAR(mean, 3.0, 1e-6);
        EXPECT_NEAR((affine.col(j).array() - mean).square().mean(), 4.0, 1e-6);
    }
}

TEST(BatchNormLayer, SingleSampleTrainBatchIsRejected)
{
    BatchNorm bn = std::get<BatchNorm>(layer_plan(tiny(2, 1, 3, 0, 0.0))[1]);
    EXPECT_THROW(batchnorm_forward(bn, RMatrix::Ones(1, 3), Mode::Train), ShapeError);
    EXPECT_NO_THROW(batchnorm_forward(bn, RMatrix::Ones(1, 3), Mode::Inference));
}

TEST(BatchNormLayer, RunningStatisticsMoveTowardsBatch)
{
    BatchNorm bn = std::get<BatchNorm>(layer_plan(tiny(2, 1, 1, 0, 0.0))[1]);
    RMatrix z(2, 1);
    z << 1.0, 3.0;
    batchnorm_forward(bn, z, Mode::Train);
    EXPECT_NEAR(bn.running_mean(0), 0.9 * 0.0 + 0.1 * 2.0, 1e-15);
    EXPECT_NEAR(bn.running_var(0), 0.9 * 1.0 + 0.1 * 1.0, 1e-15);
}

TEST(DropoutLayer, MaskStatistics)
{
    Rng rng = make_stream(6);
    EXPECT_TRUE((dropout_mask(1000, 0.0, rng).array() == 1.0).all());
    const RVector mask = dropout_mask(100000, 0.1, rng);
    const double drop_rate = 1.0 - mask.mean();
    EXPECT_NEAR(drop_rate, 0.1, 0.005);
    // Inverted scaling keeps the expected activation.
    const double activation = 2.5;
    EXPECT_NEAR((mask.array() * activation / 0.9).mean(), activation, 0.02);
    EXPECT_THROW(dropout_mask(10, 1.0, rng), ConfigError);
}

TEST(Loss, Examples)
{
    const RMatrix y = (RMatrix(2, 2) << 1, 0, 0, 1).finished();
    EXPECT_LE(bce_loss(y, y), 1e-6);
    EXPECT_NEAR(bce_loss(RMatrix::Constant(2, 2, 0.5), y), std::log(2.0), 1e-15);

    const RMatrix p = (RMatrix(2, 2) << 0.9, 0.2, 0.3, 0.6).finished();
    const double hand = -(std::log(0.9) + std::log(0.8) + std::log(0.7) + std::log(0.6)) / 4.0;
    EXPECT_NEAR(bce_loss(p, y), hand, 1e-15);
}

TEST(Loss, GradientIsZeroWhereClamped)
{
    const RMatrix p = (RMatrix(1, 3) << 1e-9, 0.5, 1.0).finished();
    const RMatrix y = (RMatrix(1, 3) << 1, 1, 0).finished();
    const RMatrix g = bce_grad_logits(p, y);
    EXPECT_EQ(g(0, 0), 0.0);
    EXPECT_NEAR(g(0, 1), (0.5 - 1.0) / 3.0, 1e-15);
    EXPECT_EQ(g(0, 2), 0.0);
}

TEST(Backprop, MatchesFiniteDifferencesOnSmallShape)
{
    // L = 2, N = 3, width 4, batch 5.
    Rng rng = make_stream(7);
    const Mlp model = Mlp::build(tiny(4, 3, 4, 2, 0.0), 11);
    EXPECT_LT(gradient_error(model, random_real(rng, 5, 4), random_labels(rng, 5, 3)), 1e-4);
}

TEST(Backprop, EveryLayerArrangement)
{
    Rng rng = make_stream(8);
    for (bool before : {true, false})
        for (double dropout : {0.0, 0.3})
            for (std::size_t hidden : {0u, 1u, 2u})
            {
                Architecture arch = tiny(6, 4, 5, hidden, dropout);
                arch.norm_before_activation = before;
                const Mlp model = Mlp::build(arch, 20 + hidden);
                std::size_t kinks = 0;
                const double err = gradient_error(model, random_real(rng, 7, 6), random_labels(rng, 7, 4), &kinks);
                EXPECT_LT(err, 1e-4) << "before=" << before << " dropout=" << dropout << " hidden=" << hidden;
                EXPECT_LE(kinks, model.parameter_count() / 20);
            }
}

TEST(Training, ToyProblemConvergesQuickly)
{
    // Linearly separable: label j is the sign of feature j.
    Architecture arch = tiny(4, 3, 32, 1, 0.0);
    Mlp model = Mlp::build(arch, 5);
    Adam adam(1e-2);
    Rng data_rng = make_stream(9);
    Rng rng = make_stream(10);
    const RMatrix x = random_real(data_rng, 512, 4);
    const RMatrix y = (x.leftCols(3).array() > 0.0).cast<double>();
    for (std::size_t step = 0; step < 200; ++step)
    {
        const Eigen::Index begin = static_cast<Eigen::Index>((step * 64) % 512);
        train_step(model, adam, x.middleRows(begin, 64), y.middleRows(begin, 64), rng, step);
    }
    EXPECT_LT(bce_loss(model.predict(x), y), 0.05);
}

TEST(Training, ZeroLearningRateLeavesWeights)
{
    Mlp model = Mlp::build(tiny(4, 3, 8, 1, 0.1), 5);
    const std::vector<double> before = flat_parameters(model);
    Adam adam(0.0);
    Rng rng = make_stream(3);
    for (std::size_t step = 0; step < 20; ++step)
        train_step(model, adam, random_real(rng, 16, 4), random_labels(rng, 16, 3), rng, step);
    EXPECT_EQ(flat_parameters(model), before);
}

TEST(Training, NonFiniteLossReportsStep)
{
    Mlp model = Mlp::build(tiny(4, 3, 8, 1, 0.0), 5);
    Adam adam(1e-3);
    Rng rng = make_stream(3);
    RMatrix x = random_real(rng, 8, 4);
    x(2, 1) = std::numeric_limits<double>::quiet_NaN();
    try
    {
        train_step(model, adam, x, random_labels(rng, 8, 3), rng, 41);
        FAIL() << "expected TrainingDiverged";
    }
    catch (const TrainingDiverged &e)
    {
        EXPECT_EQ(e.step(), 41u);
    }
}

namespace
{

Dataset toy_dataset(std::size_t rows, std::uint64_t seed)
{
    Rng rng = make_stream(seed);
    Dataset d;
    d.inputs.resize(static_cast<Eigen::Index>(rows), 4);
    d.labels.resize(static_cast<Eigen::Index>(rows), 3);
    for (Eigen::Index i = 0; i < d.inputs.rows(); ++i)
    {
        for (Eigen::Index j = 0; j < 4; ++j)
            d.inputs(i, j) = static_cast<float>(standard_normal(rng));
        for (Eigen::Index j = 0; j < 3; ++j)
            d.labels(i, j) = d.inputs(i, j) + 0.3f * d.inputs(i, 3) > 0.0f ? 1 : 0;
    }
    d.train_end = rows * 8 / 10;
    d.validation_end = rows * 9 / 10;
    return d;
}

} // namespace

TEST(Training, DeterministicAndImproving)
{
    const Dataset data = toy_dataset(2000, 4);
    TrainConfig config;
    config.batch_size = 100;
    config.epochs = 4;
    config.seed = 8;
    const Mlp init = Mlp::build(tiny(4, 3, 16, 1, 0.1), 2);
    const TrainResult a = train(init, data, config);
    const TrainResult b = train(init, data, config);
    ASSERT_EQ(a.history.size(), 4u);
    for (std::size_t i = 0; i < a.history.size(); ++i)
    {
        EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
        EXPECT_EQ(a.history[i].validation_loss, b.history[i].validation_loss);
    }
    EXPECT_TRUE(a.model.same_parameters(b.model));
    EXPECT_EQ(a.steps, 4u * 16u);
    EXPECT_LE(evaluate_loss(a.model, data, Split::Validation), evaluate_loss(init, data, Split::Validation));
    // The returned weights are the best validation epoch's.
    double best = 1e300;
    for (const auto &r : a.history)
        best = std::min(best, r.validation_loss);
    EXPECT_DOUBLE_EQ(evaluate_loss(a.model, data, Split::Validation), best);
    ASSERT_TRUE(a.history.back().auc.has_value());
    EXPECT_GT(*a.history.back().auc, 0.5);
}

TEST(Inference, IdempotentAndBatchSizeIndependent)
{
    const Dataset data = toy_dataset(500, 5);
    TrainConfig config;
    config.batch_size = 50;
    config.epochs = 1;
    const TrainResult r = train(Mlp::build(tiny(4, 3, 16, 1, 0.1), 3), data, config);
    Rng rng = make_stream(4);
    const RMatrix x = random_real(rng, 20, 4);
    const RMatrix once = r.model.predict(x);
    EXPECT_EQ(r.model.predict(x), once);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        EXPECT_LT((r.model.predict(x.row(i)) - once.row(i)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Checkpoint, RoundTripIsByteIdentical)
{
    const Dataset data = toy_dataset(500, 6);
    TrainConfig config;
    config.batch_size = 50;
    config.epochs = 1;
    TrainResult r = train(Mlp::build(tiny(4, 3, 16, 2, 0.1), 3), data, config);
    r.model.info = {0x1234, 0xabcd};
    const std::string bytes = checkpoint_bytes(r.model);
    std::istringstream in(bytes);
    const Mlp back = read_checkpoint(in);
    EXPECT_TRUE(back.same_parameters(r.model));
    EXPECT_EQ(back.info, r.model.info);
    EXPECT_EQ(back.architecture(), r.model.architecture());
    EXPECT_EQ(checkpoint_bytes(back), bytes);
    Rng rng = make_stream(1);
    const RMatrix x = random_real(rng, 9, 4);
    EXPECT_EQ(back.predict(x), r.model.predict(x));
}

TEST(Checkpoint, RejectsCorruption)
{
    const std::string bytes = checkpoint_bytes(Mlp::build(tiny(4, 3, 8, 1, 0.0), 1));
    std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
    EXPECT_THROW(read_checkpoint(truncated), FormatError);
    std::string wrong = bytes;
    wrong[1] = '?';
    std::istringstream magic(wrong);
    EXPECT_THROW(read_checkpoint(magic), FormatError);
}

TEST(Adam, FirstStepMovesByLearningRate)
{
    // With bias correction the first update is lr * sign(grad).
    RVector value = RVector::Zero(3);
    RVector grad(3);
    grad << 0.5, -2.0, 1e-3;
    Adam adam(0.01);
    adam.step({{value.data(), grad.data(), 3}});
    EXPECT_NEAR(value(0), -0.01, 1e-8);
    EXPECT_NEAR(value(1), 0.01, 1e-8);
    EXPECT_NEAR(value(2), -0.01, 1e-6);
}
