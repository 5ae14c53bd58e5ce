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
#include "musa/parallel.hpp"
#include "musa/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <numeric>

namespace musa
{

ComplexElementSet::ComplexElementSet(int m_ary) : m_ary_(m_ary)
{
    if (m_ary != 3 && m_ary != 5)
        throw ConfigError("unsupported M-ary level " + std::to_string(m_ary) + " (expected 3 or 5)");
    const int half = (m_ary - 1) / 2;
    for (int re = -half; re <= half; ++re)
        for (int im = -half; im <= half; ++im)
            elements_.emplace_back(re, im);
}

SequenceSpace::SequenceSpace(ComplexElementSet elements, std::size_t code_length)
    : elements_(std::move(elements)), code_length_(code_length), size_(0), zero_position_(0)
{
    if (code_length == 0)
        throw ConfigError("code length must be at least 1");

    const std::uint64_t base = elements_.size();
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < code_length; ++i)
    {
        if (total > std::numeric_limits<std::uint64_t>::max() / base)
            throw ConfigError("sequence space " + std::to_string(base) + "^" + std::to_string(code_length) +
                              " overflows the 64-bit count");
        total *= base;
        zero_position_ = zero_position_ * base + elements_.zero_index();
    }
    size_ = total - 1;
}

CVector SequenceSpace::at(std::uint64_t index) const
{
    if (index >= size_)
        throw ConfigError("sequence index out of range");
    std::uint64_t rank = index < zero_position_ ? index : index + 1;
    const std::uint64_t base = elements_.size();
    CVector v(static_cast<Eigen::Index>(code_length_));
    for (std::size_t pos = code_length_; pos-- > 0;)
    {
        v(static_cast<Eigen::Index>(pos)) = elements_.elements()[rank % base];
        rank /= base;
    }
    return v;
}

CMatrix SequenceSpace::materialize() const
{
    CMatrix out(static_cast<Eigen::Index>(code_length_), static_cast<Eigen::Index>(size_));
    Eigen::Index col = 0;
    for (const CVector &v : *this)
        out.col(col++) = v;
    return out;
}

SpreadingMatrix::SpreadingMatrix(CMatrix columns, double rho, std::uint64_t seed, int m_ary)
    : columns_(std::move(columns)), rho_(rho), seed_(seed), m_ary_(m_ary)
{
    if (columns_.rows() == 0 || columns_.cols() == 0)
        throw ConfigError("spreading matrix must be non-empty");
    if (!(rho > 0.0 && rho <= 1.0))
        throw ConfigError("selection threshold rho must lie in (0, 1]");
    for (Eigen::Index j = 0; j < columns_.cols(); ++j)
        if (columns_.col(j).squaredNorm() == 0.0)
            throw ConfigError("spreading matrix column " + std::to_string(j) + " is all zero");
}

CMatrix SpreadingMatrix::normalized() const
{
    return columns_.colwise().normalized();
}

bool SpreadingMatrix::operator==(const SpreadingMatrix &other) const
{
    return columns_.rows() == other.columns_.rows() && columns_.cols() == other.columns_.cols() &&
           columns_ == other.columns_ && rho_ == other.rho_ && seed_ == other.seed_;
}

double normalized_correlation(const CVector &a, const CVector &b)
{
    return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

SpreadingMatrix select_low_correlation(const SequenceSpace &space, std::size_t n_needed, double rho,
                                       std::uint64_t seed)
{
    return select_low_correlation(space.materialize(), n_needed, rho, seed, space.element_set().m_ary());
}

SpreadingMatrix select_low_correlation(const CMatrix &candidates, std::size_t n_needed, double rho,
                                       std::uint64_t seed, int m_ary)
{
    if (!(rho > 0.0 && rho <= 1.0))
        throw ConfigError("selection threshold rho must lie in (0, 1]");
    if (n_needed == 0)
        throw ConfigError("at least one sequence must be requested");

    // Compare |<c, m>|^2 <= rho^2 |c|^2 |m|^2 so integer-valued codes are tested
    // without rounding.
    const double rho2 = rho * rho;
    const RVector norms2 = candidates.colwise().squaredNorm().transpose();

    std::vector<Eigen::Index> pool;
    pool.reserve(static_cast<std::size_t>(candidates.cols()));
    for (Eigen::Index j = 0; j < candidates.cols(); ++j)
        if (norms2(j) > 0.0)
            pool.push_back(j);

    Rng rng = make_stream(seed, {0x5e1ec7ULL});
    std::vector<Eigen::Index> chosen;
    while (!pool.empty() && chosen.size() < n_needed)
    {
        const auto pick = pool[uniform_index(rng, pool.size())];
        chosen.push_back(pick);
        const auto m = candidates.col(pick);
        std::erase_if(pool, [&](Eigen::Index c) {
            if (c == pick)
                return true;
            const double ip2 = std::norm(candidates.col(c).dot(m));
            return ip2 > rho2 * norms2(c) * norms2(pick);
        });
    }
    if (chosen.size() < n_needed)
        throw InfeasibleThreshold(chosen.size(), n_needed, rho);

    CMatrix out(candidates.rows(), static_cast<Eigen::Index>(n_needed));
    for (std::size_t i = 0; i < chosen.size(); ++i)
        out.col(static_cast<Eigen::Index>(i)) = candidates.col(chosen[i]);
    return SpreadingMatrix(std::move(out), rho, seed, m_ary);
}

double mutual_coherence(const CMatrix &columns)
{
    if (columns.cols() < 2)
        throw ConfigError("mutual coherence needs at least two columns");
    const CMatrix unit = columns.colwise().normalized();
    const CMatrix gram = unit.adjoint() * unit;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < gram.cols(); ++j)
        for (Eigen::Index i = 0; i < j; ++i)
            worst = std::max(worst, std::abs(gram(i, j)));
    return worst;
}

double mutual_coherence(const SpreadingMatrix &matrix)
{
    return mutual_coherence(matrix.columns());
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept
{
    if (k > n)
        return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i)
    {
        // result * (n - k + i) / i is exact at every step; divide first where possible.
        const std::uint64_t factor = n - k + i;
        const std::uint64_t g = std::gcd(result, i);
        const std::uint64_t r = result / g;
        const std::uint64_t d = i / g;
        const std::uint64_t f = factor / d;
        if (f != 0 && r > std::numeric_limits<std::uint64_t>::max() / f)
            return std::numeric_limits<std::uint64_t>::max();
        result = r * f;
    }
    return result;
}

Support unrank_combination(std::size_t n, std::size_t k, std::uint64_t rank)
{
    Support out;
    out.reserve(k);
    std::size_t next = 0;
    for (std::size_t slot = 0; slot < k; ++slot)
    {
        for (;; ++next)
        {
            const std::uint64_t with_next = binomial(n - next - 1, k - slot - 1);
            if (rank < with_next)
                break;
            rank -= with_next;
        }
        out.push_back(next++);
    }
    return out;
}

namespace
{

bool next_combination(Support &comb, std::size_t n)
{
    const std::size_t k = comb.size();
    for (std::size_t i = k; i-- > 0;)
    {
        if (comb[i] < n - k + i)
        {
            ++comb[i];
            for (std::size_t j = i + 1; j < k; ++j)
                comb[j] = comb[j - 1] + 1;
            return true;
        }
    }
    return false;
}

double subset_isometry_gap(const CMatrix &unit, const Support &subset, CMatrix &scratch)
{
    const auto s = static_cast<Eigen::Index>(subset.size());
    scratch.resize(unit.rows(), s);
    for (Eigen::Index j = 0; j < s; ++j)
        scratch.col(j) = unit.col(static_cast<Eigen::Index>(subset[static_cast<std::size_t>(j)]));
    Eigen::JacobiSVD<CMatrix> svd(scratch);
    const RVector &sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = s > unit.rows() ? 0.0 : sv(sv.size() - 1);
    return std::max(smax * smax - 1.0, 1.0 - smin * smin);
}

} // namespace

double estimate_ric(const CMatrix &columns, std::size_t sparsity, std::uint64_t max_subsets)
{
    const auto n = static_cast<std::size_t>(columns.cols());
    if (sparsity == 0 || sparsity > n)
        throw ConfigError("sparsity must lie in [1, N]");
    const std::uint64_t total = binomial(n, sparsity);
    if (total > max_subsets)
        throw TooExpensive("RIC over " + std::to_string(total) + " supports exceeds the cap of " +
                           std::to_string(max_subsets));

    const CMatrix unit = columns.colwise().normalized();
    const std::size_t workers = std::min<std::size_t>(worker_count(), static_cast<std::size_t>(total));
    std::vector<double> partial(std::max<std::size_t>(workers, 1), 0.0);
    const std::uint64_t chunk = (total + partial.size() - 1) / partial.size();

    parallel_for(
        partial.size(),
        [&](std::size_t begin, std::size_t end) {
            CMatrix scratch;
            for (std::size_t w = begin; w < end; ++w)
            {
                const std::uint64_t first = w * chunk;
                const std::uint64_t last = std::min<std::uint64_t>(total, first + chunk);
                if (first >= last)
                    continue;
                Support comb = unrank_combination(n, sparsity, first);
                double worst = 0.0;
                for (std::uint64_t r = first; r < last; ++r)
                {
                    worst = std::max(worst, subset_isometry_gap(unit, comb, scratch));
                    next_combination(comb, n);
                }
                partial[w] = worst;
            }
        },
        partial.size());

    return *std::max_element(partial.begin(), partial.end());
}

double estimate_ric(const SpreadingMatrix &matrix, std::size_t sparsity, std::uint64_t max_subsets)
{
    return estimate_ric(matrix.columns(), sparsity, max_subsets);
}

CodebookDiagnostics diagnose(const SpreadingMatrix &matrix, std::size_t max_sparsity, std::uint64_t max_subsets)
{
    CodebookDiagnostics out;
    out.mutual_coherence = matrix.devices() >= 2 ? mutual_coherence(matrix) : 0.0;
    const std::size_t top = std::min(max_sparsity, matrix.devices());
    for (std::size_t s = 1; s <= top; ++s)
        out.ric_by_sparsity[s] = estimate_ric(matrix, s, max_subsets);
    return out;
}

} // namespace musa
