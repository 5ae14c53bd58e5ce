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

#include "musa/errors.hpp"
#include "musa/metrics.hpp"
#include "musa/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace musa::nn
{

void TrainConfig::validate() const
{
    if (!(learning_rate >= 0.0))
        throw ConfigError("learning rate must be non-negative");
    if (batch_size < 2)
        throw ConfigError("batch size must be at least 2");
    if (epochs == 0)
        throw ConfigError("at least one epoch is required");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ConfigError("decision threshold must lie in (0, 1)");
}

RMatrix dataset_inputs(const Dataset &dataset, std::size_t begin, std::size_t end)
{
    return dataset.inputs
        .middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin))
        .cast<double>();
}

RMatrix dataset_labels(const Dataset &dataset, std::size_t begin, std::size_t end)
{
    return dataset.labels
        .middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin))
        .cast<double>();
}

double train_step(Mlp &model, Adam &adam, const RMatrix &batch, const RMatrix &labels, Rng &rng,
                  std::size_t step_index)
{
    const RMatrix probs = sigmoid(model.forward_logits(batch, Mode::Train, &rng));
    const double loss = bce_loss(probs, labels);
    if (!std::isfinite(loss))
        throw TrainingDiverged(step_index);
    model.backward(bce_grad_logits(probs, labels));
    adam.step(model.parameters());
    if (!model.parameters_finite())
        throw TrainingDiverged(step_index);
    return loss;
}

namespace
{

constexpr std::size_t kEvalChunk = 8192;

struct Evaluation
{
    double loss = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> auc;
};

Evaluation evaluate(const Mlp &model, const Dataset &dataset, Split split, double threshold, bool with_auc)
{
    const std::size_t begin = dataset.split_begin(split);
    const std::size_t end = dataset.split_end(split);
    if (begin == end)
        throw ConfigError("cannot evaluate an empty split");

    double loss_sum = 0.0;
    Confusion counts;
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (std::size_t lo = begin; lo < end; lo += kEvalChunk)
    {
        const std::size_t hi = std::min(end, lo + kEvalChunk);
        const RMatrix probs = model.predict(dataset_inputs(dataset, lo, hi));
        const RMatrix y = dataset_labels(dataset, lo, hi);
        loss_sum += bce_loss(probs, y) * static_cast<double>(probs.size());
        for (Eigen::Index i = 0; i < probs.rows(); ++i)
            for (Eigen::Index j = 0; j < probs.cols(); ++j)
            {
                const bool predicted = probs(i, j) >= threshold;
                const bool actual = y(i, j) != 0.0;
                counts.tp += predicted && actual;
                counts.fp += predicted && !actual;
                counts.fn += !predicted && actual;
                counts.tn += !predicted && !actual;
                if (with_auc)
                {
                    scores.push_back(probs(i, j));
                    labels.push_back(actual ? 1 : 0);
                }
            }
    }
    Evaluation e;
    e.loss = loss_sum / static_cast<double>((end - begin) * dataset.devices());
    const MetricsReport report = finalize(counts);
    e.precision = report.ppv;
    e.recall = report.p_d;
    if (with_auc)
        e.auc = musa::auc(scores, labels);
    return e;
}

} // namespace

double evaluate_loss(const Mlp &model, const Dataset &dataset, Split split)
{
    return evaluate(model, dataset, split, 0.5, false).loss;
}

TrainResult train(Mlp model, const Dataset &dataset, const TrainConfig &config)
{
    config.validate();
    const Architecture &arch = model.architecture();
    if (dataset.inputs.cols() != static_cast<Eigen::Index>(arch.inputs) ||
        dataset.labels.cols() != static_cast<Eigen::Index>(arch.outputs))
        throw ShapeError("dataset shape does not match the model");
    const std::size_t train_rows = dataset.split_rows(Split::Train);
    if (train_rows < 2)
        throw ConfigError("training split needs at least two rows");
    const bool has_validation = dataset.split_rows(Split::Validation) > 0;

    const std::size_t batch = std::min(config.batch_size, train_rows);
    const std::size_t steps_per_epoch = train_rows / batch;

    Adam adam(config.learning_rate, config.beta1, config.beta2, config.adam_epsilon);
    Rng dropout_rng = make_stream(config.seed, {0xd40f0ULL});

    TrainResult result{model, {}, 0, 0};
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(train_rows);
    RMatrix x(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(arch.inputs));
    RMatrix y(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(arch.outputs));

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch)
    {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = make_stream(config.seed, {0x5f1eULL, epoch});
        for (std::size_t i = train_rows; i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_index(shuffle_rng, i))]);

        double loss_sum = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s)
        {
            for (std::size_t r = 0; r < batch; ++r)
            {
                const auto src = static_cast<Eigen::Index>(order[s * batch + r]);
                x.row(static_cast<Eigen::Index>(r)) = dataset.inputs.row(src).cast<double>();
                y.row(static_cast<Eigen::Index>(r)) = dataset.labels.row(src).cast<double>();
            }
            loss_sum += train_step(model, adam, x, y, dropout_rng, result.steps);
            ++result.steps;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
        if (has_validation)
        {
            const Evaluation e = evaluate(model, dataset, Split::Validation, config.threshold, true);
            record.validation_loss = e.loss;
            record.precision = e.precision;
            record.recall = e.recall;
            record.auc = e.auc;
        }
        else
        {
            record.validation_loss = record.train_loss;
        }
        result.history.push_back(record);

        if (record.validation_loss < best_loss)
        {
            best_loss = record.validation_loss;
            result.model = model;
            result.best_epoch = epoch;
        }
    }
    return result;
}

} // namespace musa::nn
