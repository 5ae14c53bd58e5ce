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

#ifndef MUSA_CONFIG_HPP
#define MUSA_CONFIG_HPP

#include "musa/dataset.hpp"
#include "musa/detectors.hpp"
#include "musa/nn.hpp"
#include "musa/simulation.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace musa
{

/// Everything one experiment run depends on. The text form is a sequence of
/// `key = value` lines; '#' starts a comment and lists are comma-separated.
struct ExperimentConfig
{
    // Codebook, one per device count.
    std::size_t code_length = 4;
    std::vector<std::size_t> devices{8, 12, 16};
    int m_ary = 3;
    double rho = 0.75;
    std::uint64_t codebook_seed = 1;

    ChannelParams channel;

    // Training data. An empty train_active means {1, ..., ceil(N / 2)}.
    std::size_t dataset_size = 1'000'000;
    SplitFractions split;
    SnrRange train_snr;
    std::vector<std::size_t> train_active;
    std::uint64_t dataset_seed = 2;

    std::size_t hidden_width = 256;
    std::size_t hidden_layers = 2;
    double dropout = 0.1;
    nn::TrainConfig train{.seed = 3};

    // Evaluation grid: an SNR sweep for a few active counts, plus an
    // active-count sweep at one SNR.
    std::vector<double> eval_snr_db{0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30};
    std::vector<std::size_t> eval_sweep_active{1, 2};
    double eval_fixed_snr_db = 20.0;
    std::vector<std::size_t> eval_active{1, 2, 3, 4};
    std::size_t eval_snapshots = 10'000;
    std::uint64_t eval_seed = 4;
    std::vector<std::string> eval_detectors{"dnn", "ls-bomp", "c-amp", "oracle"};
    bool eval_blind = true;
    double blind_threshold = 0.5;
    CampOptions camp;
    std::uint64_t oracle_cap = kDefaultOracleCap;

    std::string output_dir = "musa_run";

    void validate() const;
    bool operator==(const ExperimentConfig &other) const;
};

// Known detector names, in the order results are reported.
const std::vector<std::string> &detector_names();

// Throws ConfigError on unknown keys, malformed values or a config that fails validate().
ExperimentConfig parse_config(std::string_view text);
std::string serialize_config(const ExperimentConfig &config);
ExperimentConfig load_config(const std::string &path);
void save_config(const std::string &path, const ExperimentConfig &config);

// Applies one `key = value` assignment, as used for command-line overrides.
void set_config_value(ExperimentConfig &config, std::string_view key, std::string_view value);
std::vector<std::string> config_keys();

// Overloading-ratio label such as "200%".
std::string or_label(double or_percent);

// Dataset and architecture for the model of one device count.
DatasetSpec dataset_spec_for(const ExperimentConfig &config, std::size_t devices);
nn::Architecture architecture_for(const ExperimentConfig &config, std::size_t devices);

} // namespace musa

#endif
