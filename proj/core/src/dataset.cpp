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

#include "musa/dataset.hpp"

#include "binary_io.hpp"
#include "musa/errors.hpp"
#include "musa/parallel.hpp"
#include "musa/hash.hpp"
#include "text_format.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace musa
{

namespace
{

constexpr std::array<char, 8> kDatasetMagic = {'M', 'U', 'S', 'A', 'D', 'S', 'E', 'T'};
constexpr std::uint32_t kDatasetVersion = 1;

std::size_t draw_count(const CountSet &set, Rng &rng)
{
    return set.values[static_cast<std::size_t>(uniform_index(rng, set.values.size()))];
}

} // namespace

CountSet default_training_counts(std::size_t n_devices)
{
    CountSet out;
    for (std::size_t n = 1; n <= (n_devices + 1) / 2; ++n)
        out.values.push_back(n);
    return out;
}

std::size_t Dataset::split_begin(Split s) const
{
    switch (s)
    {
    case Split::Train:
        return 0;
    case Split::Validation:
        return train_end;
    case Split::Test:
        return validation_end;
    }
    return 0;
}

std::size_t Dataset::split_end(Split s) const
{
    switch (s)
    {
    case Split::Train:
        return train_end;
    case Split::Validation:
        return validation_end;
    case Split::Test:
        return rows();
    }
    return 0;
}

bool Dataset::operator==(const Dataset &other) const
{
    return inputs.rows() == other.inputs.rows() && inputs.cols() == other.inputs.cols() &&
           labels.cols() == other.labels.cols() && inputs == other.inputs && labels == other.labels &&
           train_end == other.train_end && validation_end == other.validation_end &&
           config_text == other.config_text;
}

std::array<std::size_t, 3> split_counts(std::size_t size, const SplitFractions &split)
{
    if (split.train < 0.0 || split.validation < 0.0 || split.test < 0.0)
        throw ConfigError("split fractions must be non-negative");
    if (std::abs(split.train + split.validation + split.test - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
    const auto d = static_cast<double>(size);
    const auto train = static_cast<std::size_t>(std::llround(d * split.train));
    const auto validation = static_cast<std::size_t>(std::llround(d * split.validation));
    if (train + validation > size)
        throw ConfigError("split fractions exceed the dataset size");
    return {train, validation, size - train - validation};
}

std::string describe(const DatasetSpec &spec, const SpreadingMatrix &codebook)
{
    std::ostringstream out;
    out << "codebook_hash=" << to_hex(codebook_hash(codebook)) << '\n';
    out << "size=" << spec.size << '\n';
    out << "split=" << detail::format_double(spec.split.train) << ',' << detail::format_double(spec.split.validation)
        << ',' << detail::format_double(spec.split.test) << '\n';
    out << "snr_db=" << detail::format_double(spec.snr.min_db) << ',' << detail::format_double(spec.snr.max_db)
        << '\n';
    if (const auto *set = std::get_if<CountSet>(&spec.counts))
    {
        out << "counts=uniform:";
        for (std::size_t i = 0; i < set->values.size(); ++i)
            out << (i ? "," : "") << set->values[i];
        out << '\n';
    }
    else
    {
        out << "counts=bernoulli:" << detail::format_double(std::get<BernoulliActivity>(spec.counts).p) << '\n';
    }
    out << "shadowing_std_db=" << detail::format_double(spec.channel.shadowing_std_db) << '\n';
    out << "cell_radius_km=" << detail::format_double(spec.channel.cell_radius_km) << '\n';
    out << "min_distance_km=" << detail::format_double(spec.channel.min_distance_km) << '\n';
    out << "seed=" << spec.seed << '\n';
    return out.str();
}

Dataset build_dataset(const SpreadingMatrix &codebook, const DatasetSpec &spec)
{
    if (spec.size < 10)
        throw ConfigError("dataset size must be at least 10 rows");
    if (spec.snr.max_db < spec.snr.min_db)
        throw ConfigError("SNR range is inverted");
    spec.channel.validate();
    const std::size_t n_devices = codebook.devices();
    if (const auto *set = std::get_if<CountSet>(&spec.counts))
    {
        if (set->values.empty())
            throw ConfigError("active-count set is empty");
        for (std::size_t n : set->values)
            if (n < 1 || n > n_devices)
                throw ConfigError("active count " + std::to_string(n) + " outside [1, N]");
    }
    const auto counts = split_counts(spec.size, spec.split);

    const auto l = static_cast<Eigen::Index>(codebook.code_length());
    Dataset out;
    out.inputs.resize(static_cast<Eigen::Index>(spec.size), 2 * l);
    out.labels.resize(static_cast<Eigen::Index>(spec.size), static_cast<Eigen::Index>(n_devices));
    out.train_end = counts[0];
    out.validation_end = counts[0] + counts[1];
    out.config_text = describe(spec, codebook);

    parallel_for(spec.size, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k)
        {
            Rng rng = make_stream(spec.seed, {k});
            ActivityPolicy policy;
            if (const auto *set = std::get_if<CountSet>(&spec.counts))
                policy = FixedCount{draw_count(*set, rng)};
            else
                policy = std::get<BernoulliActivity>(spec.counts);
            const ActivityVector psi = draw_activity(n_devices, policy, rng);
            const CVector h = draw_channel(spec.channel, n_devices, rng);
            const double snr = spec.snr.min_db + (spec.snr.max_db - spec.snr.min_db) * uniform01(rng);
            const Snapshot snap = synthesize_snapshot(codebook, psi, h, snr, rng);

            const auto row = static_cast<Eigen::Index>(k);
            out.inputs.row(row) = stack_real(snap.y_p).cast<float>().transpose();
            for (std::size_t i = 0; i < n_devices; ++i)
                out.labels(row, static_cast<Eigen::Index>(i)) = psi[i];
        }
    });
    return out;
}

void write_dataset(std::ostream &out, const Dataset &dataset)
{
    using detail::put_le;
    out.write(kDatasetMagic.data(), kDatasetMagic.size());
    put_le<std::uint32_t>(out, kDatasetVersion);
    put_le<std::uint64_t>(out, dataset.rows());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.code_length()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.devices()));
    put_le<std::uint64_t>(out, dataset.train_end);
    put_le<std::uint64_t>(out, dataset.validation_end);
    detail::put_text(out, dataset.config_text);

    for (Eigen::Index r = 0; r < dataset.inputs.rows(); ++r)
        for (Eigen::Index c = 0; c < dataset.inputs.cols(); ++c)
            put_le<float>(out, dataset.inputs(r, c));

    const std::size_t n = dataset.devices();
    const std::size_t row_bytes = (n + 7) / 8;
    std::vector<char> packed(row_bytes);
    for (Eigen::Index r = 0; r < dataset.labels.rows(); ++r)
    {
        std::fill(packed.begin(), packed.end(), 0);
        for (std::size_t i = 0; i < n; ++i)
            if (dataset.labels(r, static_cast<Eigen::Index>(i)) != 0)
                packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
        out.write(packed.data(), static_cast<std::streamsize>(row_bytes));
    }
}

Dataset read_dataset(std::istream &in)
{
    using detail::get_le;
    detail::expect_magic(in, kDatasetMagic, "dataset");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kDatasetVersion)
        throw FormatError("unsupported dataset version " + std::to_string(version));
    const auto rows = get_le<std::uint64_t>(in);
    const auto l = get_le<std::uint32_t>(in);
    const auto n = get_le<std::uint32_t>(in);
    Dataset out;
    out.train_end = get_le<std::uint64_t>(in);
    out.validation_end = get_le<std::uint64_t>(in);
    if (out.train_end > out.validation_end || out.validation_end > rows || l == 0 || n == 0)
        throw FormatError("inconsistent dataset header");
    out.config_text = detail::get_text(in);

    out.inputs.resize(static_cast<Eigen::Index>(rows), 2 * static_cast<Eigen::Index>(l));
    for (Eigen::Index r = 0; r < out.inputs.rows(); ++r)
        for (Eigen::Index c = 0; c < out.inputs.cols(); ++c)
            out.inputs(r, c) = get_le<float>(in);

    const std::size_t row_bytes = (n + 7) / 8;
    std::vector<char> packed(row_bytes);
    out.labels.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    for (Eigen::Index r = 0; r < out.labels.rows(); ++r)
    {
        if (!in.read(packed.data(), static_cast<std::streamsize>(row_bytes)))
            throw FormatError("unexpected end of dataset labels");
        for (std::size_t i = 0; i < n; ++i)
            out.labels(r, static_cast<Eigen::Index>(i)) =
                static_cast<std::uint8_t>((static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u);
    }
    return out;
}

void save_dataset(const std::string &path, const Dataset &dataset)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError("cannot open '" + path + "' for writing");
    write_dataset(out, dataset);
    if (!out)
        throw FormatError("failed writing '" + path + "'");
}

Dataset load_dataset(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open '" + path + "'");
    return read_dataset(in);
}

void export_dataset_csv(std::ostream &out, const Dataset &dataset)
{
    out << "split";
    for (Eigen::Index c = 0; c < dataset.inputs.cols(); ++c)
        out << ",x" << c;
    for (Eigen::Index c = 0; c < dataset.labels.cols(); ++c)
        out << ",y" << c;
    out << '\n';
    for (std::size_t r = 0; r < dataset.rows(); ++r)
    {
        out << (r < dataset.train_end ? "train" : r < dataset.validation_end ? "validation" : "test");
        const auto row = static_cast<Eigen::Index>(r);
        for (Eigen::Index c = 0; c < dataset.inputs.cols(); ++c)
            out << ',' << detail::format_double(static_cast<double>(dataset.inputs(row, c)));
        for (Eigen::Index c = 0; c < dataset.labels.cols(); ++c)
            out << ',' << static_cast<int>(dataset.labels(row, c));
        out << '\n';
    }
}

} // namespace musa
