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

#include "musa/pipeline.hpp"

#include "musa/codebook.hpp"
#include "musa/dataset.hpp"
#include "musa/detectors.hpp"
#include "musa/errors.hpp"
#include "musa/hash.hpp"
#include "musa/plots.hpp"
#include "musa/simulation.hpp"
#include "text_format.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace musa
{

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace
{

constexpr const char *kVersion = "0.1.0";

std::string in_output(const ExperimentConfig &config, const std::string &name)
{
    return (fs::path(config.output_dir) / name).string();
}

std::string tag(std::size_t devices)
{
    return "N" + std::to_string(devices);
}

// The serialized `key = value` lines of the listed keys, in order.
std::string config_subset(const ExperimentConfig &config, std::initializer_list<const char *> keys)
{
    std::map<std::string, std::string, std::less<>> lines;
    std::istringstream in(serialize_config(config));
    for (std::string line; std::getline(in, line);)
        lines.emplace(line.substr(0, line.find(" = ")), line);
    std::string out;
    for (const char *key : keys)
        out += lines.at(key) + "\n";
    return out;
}

const std::initializer_list<const char *> kCodebookKeys{"code_length", "m_ary", "rho", "codebook_seed"};
const std::initializer_list<const char *> kChannelKeys{"cell_radius_km", "min_distance_km", "shadowing_std_db",
                                                       "noise_psd_dbm_hz", "bandwidth_hz"};
const std::initializer_list<const char *> kDatasetKeys{"dataset_size", "split", "train_snr_min_db", "train_snr_max_db",
                                                       "train_active", "dataset_seed"};
const std::initializer_list<const char *> kTrainKeys{"hidden_width", "hidden_layers", "dropout",      "learning_rate",
                                                     "batch_size",   "epochs",        "beta1",        "beta2",
                                                     "adam_epsilon", "train_seed"};
const std::initializer_list<const char *> kEvalKeys{
    "eval_snr_db", "eval_sweep_active", "eval_fixed_snr_db", "eval_active",    "eval_snapshots", "eval_seed",
    "eval_detectors", "eval_blind",     "blind_threshold",   "camp_alpha",     "camp_iterations", "camp_tolerance",
    "oracle_cap"};

std::string utc_now()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

class Manifest
{
public:
    Manifest(const ExperimentConfig &config) : path_(manifest_path(config)), root_(config.output_dir)
    {
        if (std::ifstream in(path_); in)
        {
            doc_ = json::parse(in, nullptr, false);
            if (doc_.is_discarded() || !doc_.is_object())
                doc_ = json::object();
        }
        doc_["tool"] = "musa";
        doc_["version"] = kVersion;
        doc_["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
        doc_["config_hash"] = to_hex(hash_text(serialize_config(config)));
        doc_["seeds"] = {{"codebook", config.codebook_seed},
                         {"dataset", config.dataset_seed},
                         {"train", config.train.seed},
                         {"evaluation", config.eval_seed}};
        if (!doc_.contains("stages") || !doc_["stages"].is_object())
            doc_["stages"] = json::object();
    }

    // True when the stage completed under this key and its outputs are intact.
    bool up_to_date(const std::string &stage, std::uint64_t key) const
    {
        const auto &stages = doc_["stages"];
        if (!stages.contains(stage))
            return false;
        const auto &entry = stages[stage];
        if (entry.value("status", "") != "complete" || entry.value("key", "") != to_hex(key))
            return false;
        if (!entry.contains("outputs") || !entry["outputs"].is_object())
            return false;
        for (const auto &[name, digest] : entry["outputs"].items())
        {
            const fs::path file = fs::path(root_) / name;
            if (!fs::exists(file) || !digest.is_string() || to_hex(hash_file(file.string())) != digest.get<std::string>())
                return false;
        }
        return true;
    }

    void complete(const std::string &stage, std::uint64_t key, const std::vector<std::string> &outputs,
                  double seconds, const std::vector<std::string> &warnings)
    {
        json entry = json::object();
        entry["status"] = "complete";
        entry["key"] = to_hex(key);
        entry["outputs"] = json::object();
        for (const auto &file : outputs)
            entry["outputs"][fs::relative(file, root_).generic_string()] = to_hex(hash_file(file));
        entry["seconds"] = seconds;
        entry["finished_at"] = utc_now();
        if (!warnings.empty())
            entry["warnings"] = warnings;
        doc_["stages"][stage] = std::move(entry);
        save();
    }

    void mark_skipped(const std::string &stage)
    {
        doc_["stages"][stage]["last_checked_at"] = utc_now();
        save();
    }

    void fail(const std::string &stage, std::uint64_t key, const std::string &what)
    {
        doc_["stages"][stage] = {{"status", "failed"}, {"key", to_hex(key)}, {"error", what}, {"failed_at", utc_now()}};
        save();
    }

    void save() const
    {
        const std::string tmp = path_ + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            out << doc_.dump(2) << '\n';
            if (!out)
                throw Error("cannot write manifest " + tmp);
        }
        fs::rename(tmp, path_);
    }

private:
    std::string path_;
    std::string root_;
    json doc_;
};

struct Context
{
    const ExperimentConfig &config;
    const PipelineOptions &options;
    Manifest manifest;
    RunSummary summary;

    void log(const std::string &message) const
    {
        if (options.log != nullptr)
            *options.log << message << std::endl;
    }
};

// Runs produce() unless the stage is up to date. produce returns the paths it
// wrote and may append warnings.
template <class Produce>
void run_stage(Context &ctx, const std::string &stage, std::uint64_t key, Produce &&produce)
{
    if (ctx.manifest.up_to_date(stage, key))
    {
        ctx.log("[" + stage + "] up to date, skipped");
        ctx.manifest.mark_skipped(stage);
        ctx.summary.stages.push_back({stage, true, 0.0});
        return;
    }
    ctx.log("[" + stage + "] running");
    const auto start = std::chrono::steady_clock::now();
    std::vector<std::string> warnings;
    std::vector<std::string> outputs;
    try
    {
        outputs = produce(warnings);
    }
    catch (const InfeasibleThreshold &e)
    {
        ctx.manifest.fail(stage, key, e.what());
        throw;
    }
    catch (const std::exception &e)
    {
        ctx.manifest.fail(stage, key, e.what());
        throw StageError(stage, e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ctx.manifest.complete(stage, key, outputs, seconds, warnings);
    for (const auto &w : warnings)
    {
        ctx.log("[" + stage + "] warning: " + w);
        ctx.summary.warnings.push_back(stage + ": " + w);
    }
    ctx.log("[" + stage + "] done in " + detail::format_double(std::round(seconds * 100.0) / 100.0) + " s");
    ctx.summary.stages.push_back({stage, false, seconds});
}

std::uint64_t file_digest(const std::string &path)
{
    return hash_file(path);
}

void write_history(const std::string &path, const nn::TrainResult &result)
{
    std::ofstream out(path, std::ios::binary);
    const auto opt = [](const std::optional<double> &v) { return v ? detail::format_double(*v) : std::string("NA"); };
    out << "epoch,train_loss,validation_loss,precision,recall,auc\n";
    for (const auto &r : result.history)
        out << r.epoch << ',' << detail::format_double(r.train_loss) << ',' << detail::format_double(r.validation_loss)
            << ',' << opt(r.precision) << ',' << opt(r.recall) << ',' << opt(r.auc) << '\n';
    if (!out)
        throw Error("cannot write " + path);
}

bool wants(const ExperimentConfig &config, std::string_view detector)
{
    return std::find(config.eval_detectors.begin(), config.eval_detectors.end(), detector) !=
           config.eval_detectors.end();
}

struct Cell
{
    std::size_t n;
    double snr_db;
    auto operator<=>(const Cell &) const = default;
};

std::vector<Cell> evaluation_cells(const ExperimentConfig &config)
{
    std::vector<Cell> cells;
    for (std::size_t n : config.eval_sweep_active)
        for (double snr : config.eval_snr_db)
            cells.push_back({n, snr});
    for (std::size_t n : config.eval_active)
        cells.push_back({n, config.eval_fixed_snr_db});
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
}

ResultRow reduce(const CellKey &key, const std::vector<Support> &truths, const std::vector<DetectionResult> &results,
                 std::size_t devices)
{
    Confusion counts;
    ScorePool pool;
    for (std::size_t k = 0; k < truths.size(); ++k)
    {
        counts += accumulate(truths[k], results[k].support, devices);
        pool.add(results[k].scores, truths[k]);
    }
    return {key, truths.size(), finalize(counts, pool.auc())};
}

} // namespace

std::string_view stage_name(Stage stage)
{
    switch (stage)
    {
    case Stage::Codebook:
        return "codebook";
    case Stage::Dataset:
        return "dataset";
    case Stage::Train:
        return "train";
    case Stage::Evaluate:
        return "evaluate";
    case Stage::Plots:
        return "plots";
    }
    return "unknown";
}

std::string codebook_path(const ExperimentConfig &config, std::size_t devices)
{
    return in_output(config, "codebook_" + tag(devices) + ".txt");
}

std::string dataset_path(const ExperimentConfig &config, std::size_t devices)
{
    return in_output(config, "dataset_" + tag(devices) + ".bin");
}

std::string model_path(const ExperimentConfig &config, std::size_t devices)
{
    return in_output(config, "model_" + tag(devices) + ".ckpt");
}

std::string history_path(const ExperimentConfig &config, std::size_t devices)
{
    return in_output(config, "training_" + tag(devices) + ".csv");
}

std::string metrics_path(const ExperimentConfig &config)
{
    return in_output(config, "metrics.csv");
}

std::string plots_dir(const ExperimentConfig &config)
{
    return in_output(config, "plots");
}

std::string manifest_path(const ExperimentConfig &config)
{
    return in_output(config, "manifest.json");
}

std::vector<ResultRow> evaluate_grid(const ExperimentConfig &config, const std::vector<EvaluationTarget> &targets,
                                     std::size_t workers, std::vector<std::string> *warnings)
{
    const auto warn = [&](const std::string &message) {
        if (warnings != nullptr)
            warnings->push_back(message);
    };
    const std::vector<Cell> cells = evaluation_cells(config);
    const std::size_t snapshots = config.eval_snapshots;

    std::vector<ResultRow> rows;
    for (const EvaluationTarget &target : targets)
    {
        const SpreadingMatrix &codebook = target.codebook;
        const std::size_t devices = codebook.devices();
        const double or_percent = codebook.or_percent();

        std::vector<std::pair<std::string, std::unique_ptr<Detector>>> detectors;
        for (const auto &name : config.eval_detectors)
        {
            if (name == "dnn")
            {
                if (!target.model)
                    throw ConfigError("DNN evaluation for N=" + std::to_string(devices) + " has no model");
                detectors.emplace_back(name, std::make_unique<DnnDetector>(target.model, codebook));
            }
            else if (name == "ls-bomp")
                detectors.emplace_back(name, std::make_unique<LsBompDetector>(codebook));
            else if (name == "c-amp")
                detectors.emplace_back(name, std::make_unique<CampDetector>(codebook, config.camp));
            else if (name == "oracle")
                detectors.emplace_back(name, std::make_unique<OracleDetector>(codebook, config.oracle_cap));
            else
                throw ConfigError("unknown detector '" + name + "'");
        }

        for (const Cell &cell : cells)
        {
            std::vector<CVector> ys(snapshots);
            std::vector<Support> truths(snapshots);
            parallel_for(
                snapshots,
                [&](std::size_t begin, std::size_t end) {
                    for (std::size_t k = begin; k < end; ++k)
                    {
                        Rng rng = make_stream(config.eval_seed,
                                              {devices, cell.n, std::bit_cast<std::uint64_t>(cell.snr_db), k});
                        const ActivityVector psi = draw_activity(devices, FixedCount{cell.n}, rng);
                        const CVector h = draw_channel(config.channel, devices, rng);
                        Snapshot snap = synthesize_snapshot(codebook, psi, h, cell.snr_db, rng);
                        ys[k] = std::move(snap.y_p);
                        truths[k] = support_of(psi);
                    }
                },
                workers);

            std::vector<DetectionMode> modes{KnownCount{cell.n}};
            if (config.eval_blind)
                modes.emplace_back(Blind{config.blind_threshold});

            for (const auto &[name, detector] : detectors)
            {
                if (name == "oracle" && binomial(devices, cell.n) > config.oracle_cap)
                {
                    warn("oracle skipped for N=" + std::to_string(devices) + ", n=" + std::to_string(cell.n) +
                         ": support count exceeds oracle_cap");
                    continue;
                }
                for (const DetectionMode &mode : modes)
                {
                    if (!detector->supports(mode))
                        continue;
                    std::vector<DetectionResult> results(snapshots);
                    parallel_for(
                        snapshots,
                        [&](std::size_t begin, std::size_t end) {
                            auto batch = detector->detect_batch(std::span<const CVector>(ys).subspan(begin, end - begin),
                                                                mode);
                            std::move(batch.begin(), batch.end(), results.begin() + static_cast<std::ptrdiff_t>(begin));
                        },
                        workers);

                    const auto fallbacks = std::count_if(results.begin(), results.end(),
                                                         [](const DetectionResult &r) { return r.fallback; });
                    if (fallbacks > 0)
                        warn(name + " fell back to matched-filter scores on " + std::to_string(fallbacks) + " of " +
                             std::to_string(snapshots) + " snapshots (N=" + std::to_string(devices) +
                             ", n=" + std::to_string(cell.n) + ", SNR " + detail::format_double(cell.snr_db) + " dB)");

                    const CellKey key{name, or_percent, cell.n, cell.snr_db, mode_name(mode)};
                    rows.push_back(reduce(key, truths, results, devices));
                }
            }
        }
    }
    return rows;
}

RunSummary run_pipeline(const ExperimentConfig &config, Stage last, const PipelineOptions &options)
{
    config.validate();
    fs::create_directories(config.output_dir);
    save_config(in_output(config, "config.txt"), config);

    Context ctx{config, options, Manifest(config), {}};
    const bool need_models = last >= Stage::Train && (last == Stage::Train || wants(config, "dnn"));

    // Codebooks.
    for (std::size_t devices : config.devices)
    {
        const std::uint64_t key =
            hash_text("codebook\n" + config_subset(config, kCodebookKeys) + "devices = " + std::to_string(devices));
        run_stage(ctx, "codebook/" + tag(devices), key, [&](std::vector<std::string> &) {
            const SequenceSpace space(ComplexElementSet(config.m_ary), config.code_length);
            const SpreadingMatrix codebook = select_low_correlation(space, devices, config.rho, config.codebook_seed);
            const std::string path = codebook_path(config, devices);
            save_codebook(path, codebook);
            ctx.log("OR " + or_label(codebook.or_percent()) + ", mutual coherence " +
                               detail::format_double(mutual_coherence(codebook)));
            return std::vector<std::string>{path};
        });
    }
    if (last == Stage::Codebook)
        return std::move(ctx.summary);

    // Training data and models.
    if (last == Stage::Dataset || need_models)
    {
        for (std::size_t devices : config.devices)
        {
            const std::uint64_t cb_digest = file_digest(codebook_path(config, devices));
            const std::uint64_t data_key =
                hash_text("dataset\n" + config_subset(config, kChannelKeys) + config_subset(config, kDatasetKeys) +
                          to_hex(cb_digest));
            run_stage(ctx, "dataset/" + tag(devices), data_key, [&](std::vector<std::string> &) {
                const SpreadingMatrix codebook = load_codebook(codebook_path(config, devices));
                const Dataset data = build_dataset(codebook, dataset_spec_for(config, devices));
                const std::string path = dataset_path(config, devices);
                save_dataset(path, data);
                return std::vector<std::string>{path};
            });
            if (last == Stage::Dataset)
                continue;

            const std::uint64_t train_key = hash_text("train\n" + config_subset(config, kTrainKeys) +
                                                      to_hex(file_digest(dataset_path(config, devices))) +
                                                      to_hex(cb_digest));
            run_stage(ctx, "train/" + tag(devices), train_key, [&](std::vector<std::string> &) {
                const SpreadingMatrix codebook = load_codebook(codebook_path(config, devices));
                const Dataset data = load_dataset(dataset_path(config, devices));
                nn::Mlp model = nn::Mlp::build(architecture_for(config, devices), config.train.seed);
                nn::TrainResult result = nn::train(std::move(model), data, config.train);
                result.model.info = {codebook_hash(codebook), train_key};
                save_checkpoint(model_path(config, devices), result.model);
                write_history(history_path(config, devices), result);
                const auto &best = result.history.at(result.best_epoch - 1);
                ctx.log("best validation loss " + detail::format_double(best.validation_loss) +
                        " at epoch " + std::to_string(best.epoch));
                return std::vector<std::string>{model_path(config, devices), history_path(config, devices)};
            });
        }
    }
    if (last <= Stage::Train)
        return std::move(ctx.summary);

    // Evaluation over every device count.
    {
        std::string key_text = "evaluate\n" + config_subset(config, kChannelKeys) + config_subset(config, kEvalKeys);
        for (std::size_t devices : config.devices)
        {
            key_text += to_hex(file_digest(codebook_path(config, devices)));
            if (wants(config, "dnn"))
                key_text += to_hex(file_digest(model_path(config, devices)));
        }
        run_stage(ctx, "evaluate", hash_text(key_text), [&](std::vector<std::string> &warnings) {
            std::vector<EvaluationTarget> targets;
            for (std::size_t devices : config.devices)
            {
                EvaluationTarget target{load_codebook(codebook_path(config, devices)), nullptr};
                if (wants(config, "dnn"))
                    target.model = std::make_shared<const nn::Mlp>(nn::load_checkpoint(model_path(config, devices)));
                targets.push_back(std::move(target));
            }
            const auto rows = evaluate_grid(config, targets, options.workers, &warnings);
            const std::string path = metrics_path(config);
            std::ofstream out(path, std::ios::binary);
            write_results_csv(out, rows);
            if (!out)
                throw Error("cannot write " + path);
            return std::vector<std::string>{path};
        });
    }
    if (last == Stage::Evaluate)
        return std::move(ctx.summary);

    PlotOptions plot_options;
    plot_options.fixed_snr_db = config.eval_fixed_snr_db;
    if (!config.eval_sweep_active.empty())
        plot_options.sweep_active_a = config.eval_sweep_active.front();
    if (config.eval_sweep_active.size() > 1)
        plot_options.sweep_active_b = config.eval_sweep_active[1];
    const std::uint64_t plot_key =
        hash_text("plots\n" + to_hex(file_digest(metrics_path(config))) + detail::format_double(plot_options.fixed_snr_db) +
                  "," + std::to_string(plot_options.sweep_active_a) + "," + std::to_string(plot_options.sweep_active_b));
    run_stage(ctx, "plots", plot_key, [&](std::vector<std::string> &warnings) {
        PlotReport report = emit_plots(metrics_path(config), plots_dir(config), plot_options);
        warnings.insert(warnings.end(), report.warnings.begin(), report.warnings.end());
        return report.scripts;
    });
    return std::move(ctx.summary);
}

} // namespace musa
