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

#include "binary_io.hpp"
#include "musa/errors.hpp"
#include "musa/nn.hpp"

#include <fstream>

namespace musa::nn
{

namespace
{

constexpr std::array<char, 8> kCheckpointMagic = {'M', 'U', 'S', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

enum class LayerKind : std::uint8_t
{
    Dense = 0,
    BatchNorm = 1,
    Relu = 2,
    Dropout = 3
};

struct LayerHeader
{
    LayerKind kind;
    std::uint32_t a;
    std::uint32_t b;
    bool operator==(const LayerHeader &) const = default;
};

LayerHeader header_of(const Layer &layer)
{
    if (const auto *d = std::get_if<Dense>(&layer))
        return {LayerKind::Dense, static_cast<std::uint32_t>(d->weight.cols()),
                static_cast<std::uint32_t>(d->weight.rows())};
    if (const auto *bn = std::get_if<BatchNorm>(&layer))
        return {LayerKind::BatchNorm, static_cast<std::uint32_t>(bn->gamma.size()), 0};
    if (std::holds_alternative<Relu>(layer))
        return {LayerKind::Relu, 0, 0};
    return {LayerKind::Dropout, 0, 0};
}

template <class Derived>
void put_tensor(std::ostream &out, const Eigen::MatrixBase<Derived> &m)
{
    // Row-major order regardless of Eigen's storage.
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            detail::put_le<double>(out, m(i, j));
}

template <class Derived>
void get_tensor(std::istream &in, Eigen::MatrixBase<Derived> &m)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = detail::get_le<double>(in);
}

} // namespace

void write_checkpoint(std::ostream &out, const Mlp &model)
{
    using detail::put_le;
    const Architecture &a = model.architecture();
    out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.inputs));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.outputs));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.hidden_width));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.hidden_dense_layers));
    put_le<std::uint8_t>(out, a.norm_before_activation ? 1 : 0);
    put_le<double>(out, a.dropout);
    put_le<double>(out, a.bn_epsilon);
    put_le<double>(out, a.bn_momentum);
    put_le<std::uint64_t>(out, model.info.codebook_hash);
    put_le<std::uint64_t>(out, model.info.config_hash);

    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.layers().size()));
    for (const Layer &layer : model.layers())
    {
        const LayerHeader h = header_of(layer);
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(h.kind));
        put_le<std::uint32_t>(out, h.a);
        put_le<std::uint32_t>(out, h.b);
    }
    for (const Layer &layer : model.layers())
    {
        if (const auto *d = std::get_if<Dense>(&layer))
        {
            put_tensor(out, d->weight);
            put_tensor(out, d->bias);
        }
        else if (const auto *bn = std::get_if<BatchNorm>(&layer))
        {
            put_tensor(out, bn->gamma);
            put_tensor(out, bn->beta);
            put_tensor(out, bn->running_mean);
            put_tensor(out, bn->running_var);
        }
    }
}

Mlp read_checkpoint(std::istream &in)
{
    using detail::get_le;
    detail::expect_magic(in, kCheckpointMagic, "checkpoint");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    Architecture a;
    a.inputs = get_le<std::uint32_t>(in);
    a.outputs = get_le<std::uint32_t>(in);
    a.hidden_width = get_le<std::uint32_t>(in);
    a.hidden_dense_layers = get_le<std::uint32_t>(in);
    a.norm_before_activation = get_le<std::uint8_t>(in) != 0;
    a.dropout = get_le<double>(in);
    a.bn_epsilon = get_le<double>(in);
    a.bn_momentum = get_le<double>(in);
    ModelInfo info;
    info.codebook_hash = get_le<std::uint64_t>(in);
    info.config_hash = get_le<std::uint64_t>(in);

    std::vector<Layer> layers;
    try
    {
        layers = layer_plan(a);
    }
    catch (const ConfigError &e)
    {
        throw FormatError(std::string("checkpoint architecture: ") + e.what());
    }
    const auto count = get_le<std::uint32_t>(in);
    if (count != layers.size())
        throw FormatError("checkpoint layer count does not match its architecture");
    for (const Layer &layer : layers)
    {
        LayerHeader h;
        h.kind = static_cast<LayerKind>(get_le<std::uint8_t>(in));
        h.a = get_le<std::uint32_t>(in);
        h.b = get_le<std::uint32_t>(in);
        if (!(h == header_of(layer)))
            throw FormatError("checkpoint layer spec does not match its architecture");
    }
    for (Layer &layer : layers)
    {
        if (auto *d = std::get_if<Dense>(&layer))
        {
            get_tensor(in, d->weight);
            get_tensor(in, d->bias);
        }
        else if (auto *bn = std::get_if<BatchNorm>(&layer))
        {
            get_tensor(in, bn->gamma);
            get_tensor(in, bn->beta);
            get_tensor(in, bn->running_mean);
            get_tensor(in, bn->running_var);
        }
    }
    Mlp model(a, std::move(layers));
    model.info = info;
    return model;
}

void save_checkpoint(const std::string &path, const Mlp &model)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError("cannot open '" + path + "' for writing");
    write_checkpoint(out, model);
    if (!out)
        throw FormatError("failed writing '" + path + "'");
}

Mlp load_checkpoint(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open '" + path + "'");
    return read_checkpoint(in);
}

} // namespace musa::nn
