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

#ifndef MUSA_DATASET_HPP
#define MUSA_DATASET_HPP

#include "musa/codebook.hpp"
#include "musa/simulation.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace musa
{

// Active count drawn uniformly from a fixed set of values per snapshot.
struct CountSet
{
    std::vector<std::size_t> values;
};

using CountPolicy = std::variant<CountSet, BernoulliActivity>;

// {1, ..., ceil(N / 2)}.
CountSet default_training_counts(std::size_t n_devices);

struct SplitFractions
{
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

struct SnrRange
{
    double min_db = 0.0;
    double max_db = 30.0;
};

struct DatasetSpec
{
    std::size_t size = 1'000'000;
    SplitFractions split;
    SnrRange snr;
    CountPolicy counts = CountSet{};
    ChannelParams channel;
    std::uint64_t seed = 0;
};

enum class Split
{
    Train,
    Validation,
    Test
};

using FloatRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using LabelRows = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Stacked-real inputs (D x 2L) with binary activity labels (D x N).
/// Rows [0, train_end) are training, [train_end, validation_end) validation,
/// the rest test.
struct Dataset
{
    FloatRows inputs;
    LabelRows labels;
    std::size_t train_end = 0;
    std::size_t validation_end = 0;
    std::string config_text;

    std::size_t rows() const { return static_cast<std::size_t>(inputs.rows()); }
    std::size_t code_length() const { return static_cast<std::size_t>(inputs.cols() / 2); }
    std::size_t devices() const { return static_cast<std::size_t>(labels.cols()); }

    std::size_t split_begin(Split s) const;
    std::size_t split_end(Split s) const;
    std::size_t split_rows(Split s) const { return split_end(s) - split_begin(s); }

    bool operator==(const Dataset &other) const;
};

// Row counts per split: round the train and validation shares, test takes the rest.
std::array<std::size_t, 3> split_counts(std::size_t size, const SplitFractions &split);

/// Generates spec.size snapshots, row k from its own stream (seed, k), so the
/// result does not depend on the worker count.
Dataset build_dataset(const SpreadingMatrix &codebook, const DatasetSpec &spec);

// Text description stored in the container header.
std::string describe(const DatasetSpec &spec, const SpreadingMatrix &codebook);

void save_dataset(const std::string &path, const Dataset &dataset);
Dataset load_dataset(const std::string &path);
void write_dataset(std::ostream &out, const Dataset &dataset);
Dataset read_dataset(std::istream &in);

// Inspection export: split,x_0..x_{2L-1},y_0..y_{N-1}.
void export_dataset_csv(std::ostream &out, const Dataset &dataset);

} // namespace musa

#endif
