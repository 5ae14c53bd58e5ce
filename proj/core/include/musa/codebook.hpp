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

#ifndef MUSA_CODEBOOK_HPP
#define MUSA_CODEBOOK_HPP

#include "musa/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace musa
{

/// Constellation of complex spreading elements for an M-ary MUSA code.
///
/// M = 3 yields the nine points a + bi with a, b in {-1, 0, 1}; M = 5 the
/// twenty-five points with a, b in {-2, ..., 2}. Points are ordered by real part
/// then imaginary part, both ascending.
class ComplexElementSet
{
public:
    explicit ComplexElementSet(int m_ary);

    int m_ary() const noexcept { return m_ary_; }
    std::span<const cdouble> elements() const noexcept { return elements_; }
    std::size_t size() const noexcept { return elements_.size(); }

    // Position of 0 + 0i in elements().
    std::size_t zero_index() const noexcept { return elements_.size() / 2; }

private:
    int m_ary_;
    std::vector<cdouble> elements_;
};

/// Every nonzero length-L vector over an element set, enumerated lazily in
/// mixed-radix order (first resource is the most significant digit).
class SequenceSpace
{
public:
    SequenceSpace(ComplexElementSet elements, std::size_t code_length);

    const ComplexElementSet &element_set() const noexcept { return elements_; }
    std::size_t code_length() const noexcept { return code_length_; }

    // |elements|^L - 1.
    std::uint64_t size() const noexcept { return size_; }

    CVector at(std::uint64_t index) const;

    class iterator
    {
    public:
        using iterator_concept = std::input_iterator_tag;
        using value_type = CVector;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        iterator(const SequenceSpace *space, std::uint64_t index) : space_(space), index_(index) {}

        CVector operator*() const { return space_->at(index_); }
        iterator &operator++()
        {
            ++index_;
            return *this;
        }
        void operator++(int) { ++index_; }
        bool operator==(const iterator &other) const { return index_ == other.index_; }

    private:
        const SequenceSpace *space_ = nullptr;
        std::uint64_t index_ = 0;
    };

    iterator begin() const { return {this, 0}; }
    iterator end() const { return {this, size_}; }

    // All sequences as the columns of an L x size() matrix.
    CMatrix materialize() const;

private:
    ComplexElementSet elements_;
    std::size_t code_length_;
    std::uint64_t size_;
    std::uint64_t zero_position_; // rank of the all-zero vector in the full product space
};

/// Complex L x N spreading matrix; device i owns column i.
class SpreadingMatrix
{
public:
    // Throws ConfigError for an empty matrix, a zero column or rho outside (0, 1].
    SpreadingMatrix(CMatrix columns, double rho, std::uint64_t seed, int m_ary = 0);

    const CMatrix &columns() const noexcept { return columns_; }
    std::size_t code_length() const noexcept { return static_cast<std::size_t>(columns_.rows()); }
    std::size_t devices() const noexcept { return static_cast<std::size_t>(columns_.cols()); }
    double rho() const noexcept { return rho_; }
    std::uint64_t seed() const noexcept { return seed_; }
    int m_ary() const noexcept { return m_ary_; }

    // Overloading ratio in percent, 100 * N / L.
    double or_percent() const noexcept
    {
        return 100.0 * static_cast<double>(devices()) / static_cast<double>(code_length());
    }

    // Columns scaled to unit l2 norm.
    CMatrix normalized() const;

    bool operator==(const SpreadingMatrix &other) const;

private:
    CMatrix columns_;
    double rho_;
    std::uint64_t seed_;
    int m_ary_;
};

struct CodebookDiagnostics
{
    double mutual_coherence = 0.0;
    std::map<std::size_t, double> ric_by_sparsity;
};

// Magnitude of the normalized Hermitian inner product of two nonzero vectors.
double normalized_correlation(const CVector &a, const CVector &b);

/// Heuristic low-cross-correlation selection.
///
/// Repeatedly draws a random surviving candidate, appends it, and drops every
/// remaining candidate whose normalized correlation with the pick exceeds rho.
/// Throws InfeasibleThreshold when the candidates run out before n_needed.
SpreadingMatrix select_low_correlation(const SequenceSpace &space, std::size_t n_needed, double rho,
                                       std::uint64_t seed);

// Same selection over an explicit candidate pool (one candidate per column).
SpreadingMatrix select_low_correlation(const CMatrix &candidates, std::size_t n_needed, double rho,
                                       std::uint64_t seed, int m_ary = 0);

// max_{i != j} |<c_i, c_j>| over l2-normalized columns. Requires N >= 2.
double mutual_coherence(const CMatrix &columns);
double mutual_coherence(const SpreadingMatrix &matrix);

// Number of size-s supports, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept;

// The rank-th size-k subset of {0..n-1} in lexicographic order.
Support unrank_combination(std::size_t n, std::size_t k, std::uint64_t rank);

inline constexpr std::uint64_t kDefaultRicSubsetCap = 2'000'000;

/// Exact restricted isometry constant for sparsity s on l2-normalized columns:
/// the worst max(sigma_max^2 - 1, 1 - sigma_min^2) over all size-s column
/// subsets. Throws TooExpensive if C(N, s) exceeds max_subsets.
double estimate_ric(const CMatrix &columns, std::size_t sparsity, std::uint64_t max_subsets = kDefaultRicSubsetCap);
double estimate_ric(const SpreadingMatrix &matrix, std::size_t sparsity,
                    std::uint64_t max_subsets = kDefaultRicSubsetCap);

CodebookDiagnostics diagnose(const SpreadingMatrix &matrix, std::size_t max_sparsity,
                             std::uint64_t max_subsets = kDefaultRicSubsetCap);

// Text format: a header line "L N rho seed", then one column per line as L
// space-separated "re,im" pairs printed in shortest round-trip form.
void write_codebook(std::ostream &out, const SpreadingMatrix &matrix);
SpreadingMatrix read_codebook(std::istream &in);
std::string codebook_to_text(const SpreadingMatrix &matrix);
SpreadingMatrix codebook_from_text(const std::string &text);
void save_codebook(const std::string &path, const SpreadingMatrix &matrix);
SpreadingMatrix load_codebook(const std::string &path);

// Hash of the text serialization; checkpoints record it.
std::uint64_t codebook_hash(const SpreadingMatrix &matrix);

} // namespace musa

#endif
