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

// musa: runs the detection experiment pipeline from the command line.
//
//   musa all --config run.cfg
//   musa evaluate --config run.cfg --eval-snapshots 2000 --workers 4
//   musa show-config > default.cfg
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure,
// 4 infeasible codebook threshold.

#include "musa/config.hpp"
#include "musa/errors.hpp"
#include "musa/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>

namespace
{

enum ExitCode : int
{
    kOk = 0,
    kConfigError = 2,
    kStageFailure = 3,
    kInfeasible = 4
};

std::string flag_for(std::string key)
{
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Grant-free MUSA multi-user detection experiments"};
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> assignments;
    std::optional<std::size_t> workers;
    bool quiet = false;
    app.add_option("-c,--config", config_file, "Configuration file of key = value lines")->check(CLI::ExistingFile);
    app.add_option("-s,--set", assignments, "Override a configuration value, key=value (repeatable)");
    app.add_option("-j,--workers", workers, std::string("Worker threads (default: $") + musa::kWorkersEnv +
                                                " or the hardware concurrency)")
        ->check(CLI::PositiveNumber);
    app.add_flag("-q,--quiet", quiet, "Only print errors");

    // One flag per configuration key, e.g. --eval-snapshots for eval_snapshots.
    std::map<std::string, std::string> flag_values;
    for (const auto &key : musa::config_keys())
        app.add_option(flag_for(key), flag_values[key], "Configuration value " + key)->group("Configuration");

    const std::vector<std::pair<std::string, std::string>> verbs{
        {"codebook", "Build and store one spreading codebook per device count"},
        {"dataset", "Generate the training datasets"},
        {"train", "Train one network per device count"},
        {"evaluate", "Run the Monte-Carlo detector sweep and write metrics.csv"},
        {"plots", "Emit the plotting scripts from metrics.csv"},
        {"all", "Run every stage"},
        {"show-config", "Print the resolved configuration and exit"},
    };
    for (const auto &[name, help] : verbs)
        app.add_subcommand(name, help)->fallthrough();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    const std::string verb = app.get_subcommands().front()->get_name();

    musa::ExperimentConfig config;
    try
    {
        if (!config_file.empty())
            config = musa::load_config(config_file);
        for (const auto &[key, value] : flag_values)
            if (app.count(flag_for(key)) > 0)
                musa::set_config_value(config, key, value);
        for (const auto &assignment : assignments)
        {
            const auto eq = assignment.find('=');
            if (eq == std::string::npos)
                throw musa::ConfigError("--set expects key=value, got '" + assignment + "'");
            musa::set_config_value(config, assignment.substr(0, eq), assignment.substr(eq + 1));
        }
        config.validate();
    }
    catch (const musa::Error &e)
    {
        std::cerr << "musa: configuration error: " << e.what() << '\n';
        return kConfigError;
    }

    if (verb == "show-config")
    {
        std::cout << musa::serialize_config(config);
        return kOk;
    }

    const std::map<std::string, musa::Stage> stages{{"codebook", musa::Stage::Codebook},
                                                    {"dataset", musa::Stage::Dataset},
                                                    {"train", musa::Stage::Train},
                                                    {"evaluate", musa::Stage::Evaluate},
                                                    {"plots", musa::Stage::Plots},
                                                    {"all", musa::Stage::Plots}};
    musa::PipelineOptions options;
    if (workers)
        options.workers = *workers;
    options.log = quiet ? nullptr : &std::cout;

    try
    {
        const musa::RunSummary summary = musa::run_pipeline(config, stages.at(verb), options);
        if (!quiet)
        {
            std::size_t skipped = 0;
            for (const auto &s : summary.stages)
                skipped += s.skipped ? 1 : 0;
            std::cout << "musa: " << summary.stages.size() << " stages, " << skipped << " up to date, "
                      << summary.warnings.size() << " warnings; outputs in " << config.output_dir << '\n';
        }
        return kOk;
    }
    catch (const musa::InfeasibleThreshold &e)
    {
        std::cerr << "musa: " << e.what() << '\n';
        return kInfeasible;
    }
    catch (const musa::ConfigError &e)
    {
        std::cerr << "musa: configuration error: " << e.what() << '\n';
        return kConfigError;
    }
    catch (const std::exception &e)
    {
        std::cerr << "musa: " << e.what() << '\n';
        return kStageFailure;
    }
}
