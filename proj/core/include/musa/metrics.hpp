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

#ifndef MUSA_METRICS_HPP
#define MUSA_METRICS_HPP

#include "musa/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace musa
{

/// Device-slot confusion counts. Every device in every snapshot is one
/// binary decision, so counts from different shards simply add.
struct Confusion
{
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    Confusion &operator+=(const Confusion &other) noexcept
    {
        tp += other.tp;
        fp += other.fp;
        fn += other.fn;
        tn += other.tn;
        return *this;
    }
    friend Confusion operator+(Confusion a, const Confusion &b) noexcept { return a += b; }
    bool operator==(const Confusion &) const = default;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
};

// Counts for one snapshot; both supports must lie in [0, n_devices).
Confusion accumulate(const Support &truth, const Support &estimate, std::size_t n_devices);

/// Ratios derived from a Confusion. An empty optional marks a ratio whose
/// denominator is zero.
struct MetricsReport
{
    Confusion counts;
    std::optional<double> p_d; // recall, tp / (tp + fn)
    std::optional<double> ppv; // precision, tp / (tp + fp)
    std::optional<double> p_m; // false-negative rate, fn / (tp + fn)
    std::optional<double> f1;  // 2 ppv p_d / (ppv + p_d)
    std::optional<double> auc;

    // ppv p_d / (ppv + p_d), the harmonic-mean expression without the factor 2.
    std::optional<double> f1_without_factor_two() const;
};

MetricsReport finalize(const Confusion &counts, std::optional<double> auc = std::nullopt);

/// Rank-based ROC AUC over pooled (score, label) pairs with tied scores
/// sharing their average rank. Empty if either class is absent.
std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Accumulates device-wise (score, label) pairs over many snapshots.
class ScorePool
{
public:
    void add(const RVector &scores, const Support &truth);
    void merge(const ScorePool &other);
    std::optional<double> auc() const;
    std::size_t size() const noexcept { return scores_.size(); }

private:
    std::vector<double> scores_;
    std::vector<std::uint8_t> labels_;
};

struct CellKey
{
    std::string detector;
    double or_percent = 0.0;
    std::size_t active = 0;
    double snr_db = 0.0;
    std::string mode; // "known-n" or "blind"
    bool operator==(const CellKey &) const = default;
};

struct ResultRow
{
    CellKey key;
    std::size_t snapshots = 0;
    MetricsReport report;
};

// Column order of the results table.
const std::vector<std::string> &results_columns();

// One row per cell, full precision, "NA" for undefined values.
void write_results_csv(std::ostream &out, std::span<const ResultRow> rows);
std::vector<ResultRow> read_results_csv(std::istream &in);

// Standard error of a proportion estimated from `trials` Bernoulli outcomes.
double proportion_standard_error(double p, std::uint64_t trials);

} // namespace musa

#endif
