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

#include "musa/codebook.hpp"

#include "musa/errors.hpp"
#include "musa/hash.hpp"
#include "text_format.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace musa
{

namespace
{

int infer_m_ary(const CMatrix &columns)
{
    double widest = 0.0;
    for (Eigen::Index j = 0; j < columns.cols(); ++j)
        for (Eigen::Index i = 0; i < columns.rows(); ++i)
        {
            const cdouble v = columns(i, j);
            if (v.real() != std::round(v.real()) || v.imag() != std::round(v.imag()))
                return 0;
            widest = std::max({widest, std::abs(v.real()), std::abs(v.imag())});
        }
    if (widest <= 1.0)
        return 3;
    if (widest <= 2.0)
        return 5;
    return 0;
}

} // namespace

void write_codebook(std::ostream &out, const SpreadingMatrix &matrix)
{
    const CMatrix &c = matrix.columns();
    out << c.rows() << ' ' << c.cols() << ' ' << detail::format_double(matrix.rho()) << ' ' << matrix.seed() << '\n';
    for (Eigen::Index j = 0; j < c.cols(); ++j)
    {
        for (Eigen::Index i = 0; i < c.rows(); ++i)
        {
            if (i > 0)
                out << ' ';
            out << detail::format_double(c(i, j).real()) << ',' << detail::format_double(c(i, j).imag());
        }
        out << '\n';
    }
}

SpreadingMatrix read_codebook(std::istream &in)
{
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("codebook: missing header");
    const auto header = detail::split_whitespace(line);
    if (header.size() != 4)
        throw FormatError("codebook: header must be 'L N rho seed'");
    const auto rows = detail::parse_unsigned(header[0], "codebook L");
    const auto cols = detail::parse_unsigned(header[1], "codebook N");
    const double rho = detail::parse_double(header[2], "codebook rho");
    const auto seed = detail::parse_unsigned(header[3], "codebook seed");
    if (rows == 0 || cols == 0)
        throw FormatError("codebook: L and N must be positive");

    CMatrix columns(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t j = 0; j < cols; ++j)
    {
        if (!std::getline(in, line))
            throw FormatError("codebook: expected " + std::to_string(cols) + " column lines");
        const auto pairs = detail::split_whitespace(line);
        if (pairs.size() != rows)
            throw FormatError("codebook: column " + std::to_string(j) + " does not have L entries");
        for (std::uint64_t i = 0; i < rows; ++i)
        {
            const auto comma = pairs[i].find(',');
            if (comma == std::string_view::npos)
                throw FormatError("codebook: entry '" + std::string(pairs[i]) + "' is not 're,im'");
            columns(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                cdouble(detail::parse_double(pairs[i].substr(0, comma), "codebook entry"),
                        detail::parse_double(pairs[i].substr(comma + 1), "codebook entry"));
        }
    }
    try
    {
        return SpreadingMatrix(columns, rho, seed, infer_m_ary(columns));
    }
    catch (const ConfigError &e)
    {
        throw FormatError(std::string("codebook: ") + e.what());
    }
}

std::string codebook_to_text(const SpreadingMatrix &matrix)
{
    std::ostringstream out;
    write_codebook(out, matrix);
    return out.str();
}

SpreadingMatrix codebook_from_text(const std::string &text)
{
    std::istringstream in(text);
    return read_codebook(in);
}

void save_codebook(const std::string &path, const SpreadingMatrix &matrix)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError("cannot open '" + path + "' for writing");
    write_codebook(out, matrix);
    if (!out)
        throw FormatError("failed writing '" + path + "'");
}

SpreadingMatrix load_codebook(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open '" + path + "'");
    return read_codebook(in);
}

std::uint64_t codebook_hash(const SpreadingMatrix &matrix)
{
    return hash_text(codebook_to_text(matrix));
}

} // namespace musa
