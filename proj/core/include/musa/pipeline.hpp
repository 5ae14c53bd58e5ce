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

#ifndef MUSA_PIPELINE_HPP
#define MUSA_PIPELINE_HPP

#include "musa/config.hpp"
#include "musa/metrics.hpp"
#include "musa/nn.hpp"
#include "musa/parallel.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace musa
{

enum class Stage
{
    Codebook,
    Dataset,
    Train,
    Evaluate,
    Plots
};

std::string_view stage_name(Stage stage);

// Artifact locations inside config.output_dir.
std::string codebook_path(const ExperimentConfig &config, std::size_t devices);
std::string dataset_path(const ExperimentConfig &config, std::size_t devices);
std::string model_path(const ExperimentConfig &config, std::size_t devices);
std::string history_path(const ExperimentConfig &config, std::size_t devices);
std::string metrics_path(const ExperimentConfig &config);
std::string plots_dir(const ExperimentConfig &config);
std::string manifest_path(const ExperimentConfig &config);

struct StageReport
{
    std::string name; // e.g. "dataset/N8"
    bool skipped = false;
    double seconds = 0.0;
};

struct RunSummary
{
    std::vector<StageReport> stages;
    std::vector<std::string> warnings;
};

struct PipelineOptions
{
    std::size_t workers = worker_count();
    std::ostream *log = nullptr;
};

/// Runs every stage up to and including `last`. Each stage output is keyed by
/// a hash of the configuration fields it reads and of the files it consumes;
/// a stage whose key and outputs are unchanged is skipped. The manifest is
/// rewritten after every stage, including a failed one. A failing stage is
/// reported as StageError, except InfeasibleThreshold which passes through.
RunSummary run_pipeline(const ExperimentConfig &config, Stage last = Stage::Plots, const PipelineOptions &options = {});

/// Trained detector inputs for one device count. The model may be null when
/// the DNN is not evaluated.
struct EvaluationTarget
{
    SpreadingMatrix codebook;
    std::shared_ptr<const nn::Mlp> model;
};

/// Monte-Carlo evaluation of the configured grid. Snapshot k of a cell is
/// drawn from its own stream, and every detector sees the same snapshots.
std::vector<ResultRow> evaluate_grid(const ExperimentConfig &config, const std::vector<EvaluationTarget> &targets,
                                     std::size_t workers = worker_count(), std::vector<std::string> *warnings = nullptr);

} // namespace musa

#endif
