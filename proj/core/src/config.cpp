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

#include "musa/config.hpp"

#include "musa/errors.hpp"
#include "text_format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace musa
{

namespace
{

using detail::format_double;
using detail::parse_double;
using detail::parse_unsigned;

struct Field
{
    const char *key;
    std::function<std::string(const ExperimentConfig &)> get;
    std::function<void(ExperimentConfig &, std::string_view)> set;
};

template <class T>
std::string join(const std::vector<T> &values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        if (i > 0)
            out += ", ";
        if constexpr (std::is_same_v<T, double>)
            out += format_double(values[i]);
        else if constexpr (std::is_same_v<T, std::string>)
            out += values[i];
        else
            out += std::to_string(values[i]);
    }
    return out;
}

std::vector<std::string_view> list_items(std::string_view text)
{
    if (detail::trim(text).empty())
        return {};
    return detail::split(text, ',');
}

std::vector<std::size_t> parse_sizes(std::string_view text, const char *key)
{
    std::vector<std::size_t> out;
    for (auto item : list_items(text))
        out.push_back(static_cast<std::size_t>(parse_unsigned(item, key)));
    return out;
}

std::vector<double> parse_doubles(std::string_view text, const char *key)
{
    std::vector<double> out;
    for (auto item : list_items(text))
        out.push_back(parse_double(item, key));
    return out;
}

bool parse_bool(std::string_view text, const char *key)
{
    text = detail::trim(text);
    if (text == "true" || text == "1" || text == "yes")
        return true;
    if (text == "false" || text == "0" || text == "no")
        return false;
    throw FormatError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

// Accepts plain integers and exact integral floating forms such as 1e6.
std::size_t parse_count(std::string_view text, const char *key)
{
    const double value = parse_double(text, key);
    if (!(value >= 0.0) || value != std::floor(value) || value > 9.0e15)
        throw FormatError(std::string(key) + ": expected a non-negative integer, got '" +
                          std::string(detail::trim(text)) + "'");
    return static_cast<std::size_t>(value);
}

#define MUSA_DOUBLE(name, member)                                                                                    \
    Field                                                                                                            \
    {                                                                                                                \
        name, [](const ExperimentConfig &c) { return format_double(c.member); },                                     \
            [](ExperimentConfig &c, std::string_view v) { c.member = parse_double(v, name); }                        \
    }
#define MUSA_COUNT(name, member)                                                                                     \
    Field                                                                                                            \
    {                                                                                                                \
        name, [](const ExperimentConfig &c) { return std::to_string(c.member); },                                    \
            [](ExperimentConfig &c, std::string_view v) { c.member = parse_count(v, name); }                         \
    }
#define MUSA_SEED(name, member)                                                                                      \
    Field                                                                                                            \
    {                                                                                                                \
        name, [](const ExperimentConfig &c) { return std::to_string(c.member); },                                    \
            [](ExperimentConfig &c, std::string_view v) { c.member = parse_unsigned(v, name); }                      \
    }

const std::vector<Field> &fields()
{
    static const std::vector<Field> table = {
        MUSA_COUNT("code_length", code_length),
        {"devices", [](const ExperimentConfig &c) { return join(c.devices); },
         [](ExperimentConfig &c, std::string_view v) { c.devices = parse_sizes(v, "devices"); }},
        {"m_ary", [](const ExperimentConfig &c) { return std::to_string(c.m_ary); },
         [](ExperimentConfig &c, std::string_view v) { c.m_ary = static_cast<int>(parse_unsigned(v, "m_ary")); }},
        MUSA_DOUBLE("rho", rho),
        MUSA_SEED("codebook_seed", codebook_seed),

        MUSA_DOUBLE("cell_radius_km", channel.cell_radius_km),
        MUSA_DOUBLE("min_distance_km", channel.min_distance_km),
        MUSA_DOUBLE("shadowing_std_db", channel.shadowing_std_db),
        MUSA_DOUBLE("noise_psd_dbm_hz", channel.noise_psd_dbm_hz),
        MUSA_DOUBLE("bandwidth_hz", channel.bandwidth_hz),

        MUSA_COUNT("dataset_size", dataset_size),
        {"split", [](const ExperimentConfig &c) { return join(std::vector{c.split.train, c.split.validation, c.split.test}); },
         [](ExperimentConfig &c, std::string_view v) {
             const auto parts = parse_doubles(v, "split");
             if (parts.size() != 3)
                 throw FormatError("split: expected three fractions train, validation, test");
             c.split = {parts[0], parts[1], parts[2]};
         }},
        MUSA_DOUBLE("train_snr_min_db", train_snr.min_db),
        MUSA_DOUBLE("train_snr_max_db", train_snr.max_db),
        {"train_active", [](const ExperimentConfig &c) { return c.train_active.empty() ? std::string("auto") : join(c.train_active); },
         [](ExperimentConfig &c, std::string_view v) {
             c.train_active = detail::trim(v) == "auto" ? std::vector<std::size_t>{} : parse_sizes(v, "train_active");
         }},
        MUSA_SEED("dataset_seed", dataset_seed),

        MUSA_COUNT("hidden_width", hidden_width),
        MUSA_COUNT("hidden_layers", hidden_layers),
        MUSA_DOUBLE("dropout", dropout),
        MUSA_DOUBLE("learning_rate", train.learning_rate),
        MUSA_COUNT("batch_size", train.batch_size),
        MUSA_COUNT("epochs", train.epochs),
        MUSA_DOUBLE("beta1", train.beta1),
        MUSA_DOUBLE("beta2", train.beta2),
        MUSA_DOUBLE("adam_epsilon", train.adam_epsilon),
        MUSA_SEED("train_seed", train.seed),

        {"eval_snr_db", [](const ExperimentConfig &c) { return join(c.eval_snr_db); },
         [](ExperimentConfig &c, std::string_view v) { c.eval_snr_db = parse_doubles(v, "eval_snr_db"); }},
        {"eval_sweep_active", [](const ExperimentConfig &c) { return join(c.eval_sweep_active); },
         [](ExperimentConfig &c, std::string_view v) { c.eval_sweep_active = parse_sizes(v, "eval_sweep_active"); }},
        MUSA_DOUBLE("eval_fixed_snr_db", eval_fixed_snr_db),
        {"eval_active", [](const ExperimentConfig &c) { return join(c.eval_active); },
         [](ExperimentConfig &c, std::string_view v) { c.eval_active = parse_sizes(v, "eval_active"); }},
        MUSA_COUNT("eval_snapshots", eval_snapshots),
        MUSA_SEED("eval_seed", eval_seed),
        {"eval_detectors", [](const ExperimentConfig &c) { return join(c.eval_detectors); },
         [](ExperimentConfig &c, std::string_view v) {
             c.eval_detectors.clear();
             for (auto item : list_items(v))
                 c.eval_detectors.emplace_back(item);
         }},
        {"eval_blind", [](const ExperimentConfig &c) { return std::string(c.eval_blind ? "true" : "false"); },
         [](ExperimentConfig &c, std::string_view v) { c.eval_blind = parse_bool(v, "eval_blind"); }},
        MUSA_DOUBLE("blind_threshold", blind_threshold),
        MUSA_DOUBLE("camp_alpha", camp.alpha),
        MUSA_COUNT("camp_iterations", camp.max_iterations),
        MUSA_DOUBLE("camp_tolerance", camp.tolerance),
        MUSA_SEED("oracle_cap", oracle_cap),

        {"output_dir", [](const ExperimentConfig &c) { return c.output_dir; },
         [](ExperimentConfig &c, std::string_view v) { c.output_dir = std::string(detail::trim(v)); }},
    };
    return table;
}

#undef MUSA_DOUBLE
#undef MUSA_COUNT
#undef MUSA_SEED

const Field &field(std::string_view key)
{
    for (const Field &f : fields())
        if (key == f.key)
            return f;
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

void require(bool condition, const std::string &message)
{
    if (!condition)
        throw ConfigError(message);
}

} // namespace

const std::vector<std::string> &detector_names()
{
    static const std::vector<std::string> names{"dnn", "ls-bomp", "c-amp", "oracle"};
    return names;
}

void ExperimentConfig::validate() const
{
    require(code_length >= 1, "code_length must be positive");
    require(!devices.empty(), "devices must list at least one device count");
    require(std::set(devices.begin(), devices.end()).size() == devices.size(), "devices contains duplicates");
    for (std::size_t n : devices)
        require(n >= 2, "each device count must be at least 2");
    require(m_ary == 3 || m_ary == 5, "m_ary must be 3 or 5");
    require(rho > 0.0 && rho <= 1.0, "rho must lie in (0, 1]");
    channel.validate();

    require(dataset_size >= 10, "dataset_size must be at least 10");
    require(split.train > 0.0 && split.validation > 0.0 && split.test >= 0.0 &&
                std::abs(split.train + split.validation + split.test - 1.0) < 1e-9,
            "split fractions must be positive and sum to 1");
    require(train_snr.min_db <= train_snr.max_db, "train SNR range is inverted");
    for (std::size_t n : train_active)
        for (std::size_t d : devices)
            require(n >= 1 && n <= d, "train_active values must lie in [1, N] for every device count");

    architecture_for(*this, devices.front()).validate();
    train.validate();

    require(!eval_snr_db.empty() || !eval_active.empty(), "evaluation grid is empty");
    require(eval_snapshots >= 1, "eval_snapshots must be positive");
    for (std::size_t n : eval_sweep_active)
        for (std::size_t d : devices)
            require(n >= 1 && n <= d, "eval_sweep_active values must lie in [1, N] for every device count");
    for (std::size_t n : eval_active)
        for (std::size_t d : devices)
            require(n >= 1 && n <= d, "eval_active values must lie in [1, N] for every device count");
    require(!eval_detectors.empty(), "eval_detectors is empty");
    for (const auto &name : eval_detectors)
        require(std::find(detector_names().begin(), detector_names().end(), name) != detector_names().end(),
                "unknown detector '" + name + "'");
    require(blind_threshold > 0.0 && blind_threshold < 1.0, "blind_threshold must lie in (0, 1)");
    require(camp.alpha > 0.0, "camp_alpha must be positive");
    require(camp.max_iterations >= 1, "camp_iterations must be positive");
    require(!output_dir.empty(), "output_dir is empty");
}

bool ExperimentConfig::operator==(const ExperimentConfig &other) const
{
    return serialize_config(*this) == serialize_config(other);
}

ExperimentConfig parse_config(std::string_view text)
{
    ExperimentConfig config;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size())
    {
        const auto stop = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, stop - pos);
        pos = stop + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        if (!seen.emplace(key).second)
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
        try
        {
            set_config_value(config, key, line.substr(eq + 1));
        }
        catch (const Error &e)
        {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    config.validate();
    return config;
}

std::string serialize_config(const ExperimentConfig &config)
{
    std::string out;
    for (const Field &f : fields())
        out += std::string(f.key) + " = " + f.get(config) + "\n";
    return out;
}

ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open configuration file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void save_config(const std::string &path, const ExperimentConfig &config)
{
    std::ofstream out(path, std::ios::binary);
    out << serialize_config(config);
    if (!out)
        throw Error("cannot write configuration file " + path);
}

void set_config_value(ExperimentConfig &config, std::string_view key, std::string_view value)
{
    const Field &f = field(detail::trim(key));
    try
    {
        f.set(config, detail::trim(value));
    }
    catch (const FormatError &e)
    {
        throw ConfigError(e.what());
    }
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> out;
    for (const Field &f : fields())
        out.emplace_back(f.key);
    return out;
}

std::string or_label(double or_percent)
{
    const double rounded = std::round(or_percent);
    if (std::abs(or_percent - rounded) < 1e-9)
        return std::to_string(static_cast<long long>(rounded)) + "%";
    return format_double(or_percent) + "%";
}

DatasetSpec dataset_spec_for(const ExperimentConfig &config, std::size_t devices)
{
    DatasetSpec spec;
    spec.size = config.dataset_size;
    spec.split = config.split;
    spec.snr = config.train_snr;
    spec.counts = config.train_active.empty() ? default_training_counts(devices) : CountSet{config.train_active};
    spec.channel = config.channel;
    spec.seed = config.dataset_seed;
    return spec;
}

nn::Architecture architecture_for(const ExperimentConfig &config, std::size_t devices)
{
    nn::Architecture arch;
    arch.inputs = 2 * config.code_length;
    arch.outputs = devices;
    arch.hidden_width = config.hidden_width;
    arch.hidden_dense_layers = config.hidden_layers;
    arch.dropout = config.dropout;
    return arch;
}

} // namespace musa
