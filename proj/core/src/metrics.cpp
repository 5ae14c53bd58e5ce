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

#include "musa/metrics.hpp"

#include "musa/errors.hpp"
#include "text_format.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace musa
{

Confusion accumulate(const Support &truth, const Support &estimate, std::size_t n_devices)
{
    std::vector<std::uint8_t> in_truth(n_devices, 0), in_estimate(n_devices, 0);
    for (std::size_t i : truth)
    {
        if (i >= n_devices)
            throw ConfigError("true support index out of range");
        in_truth[i] = 1;
    }
    for (std::size_t i : estimate)
    {
        if (i >= n_devices)
            throw ConfigError("estimated support index out of range");
        in_estimate[i] = 1;
    }
    Confusion c;
    for (std::size_t i = 0; i < n_devices; ++i)
    {
        if (in_truth[i] && in_estimate[i])
            ++c.tp;
        else if (in_estimate[i])
            ++c.fp;
        else if (in_truth[i])
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

std::optional<double> MetricsReport::f1_without_factor_two() const
{
    if (!ppv || !p_d || *ppv + *p_d == 0.0)
        return std::nullopt;
    return *ppv * *p_d / (*ppv + *p_d);
}

MetricsReport finalize(const Confusion &counts, std::optional<double> auc)
{
    MetricsReport r;
    r.counts = counts;
    r.auc = auc;
    const auto positives = counts.tp + counts.fn;
    if (positives > 0)
    {
        r.p_d = static_cast<double>(counts.tp) / static_cast<double>(positives);
        r.p_m = static_cast<double>(counts.fn) / static_cast<double>(positives);
    }
    if (counts.tp + counts.fp > 0)
        r.ppv = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
    if (r.ppv && r.p_d && *r.ppv + *r.p_d > 0.0)
        r.f1 = 2.0 * *r.ppv * *r.p_d / (*r.ppv + *r.p_d);
    return r;
}

std::optional<double> auc(std::span<const double> scores, std::span<const std::uint8_t> labels)
{
    if (scores.size() != labels.size())
        throw ShapeError("score and label counts differ");
    const std::size_t n = scores.size();
    std::uint64_t positives = 0;
    for (auto l : labels)
        positives += l != 0;
    const std::uint64_t negatives = n - positives;
    if (positives == 0 || negatives == 0)
        return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of (1-based, tie-averaged) ranks of the positives.
    double positive_rank_sum = 0.0;
    for (std::size_t i = 0; i < n;)
    {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]])
            ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] != 0)
                positive_rank_sum += avg_rank;
        i = j + 1;
    }
    const double p = static_cast<double>(positives);
    const double q = static_cast<double>(negatives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

void ScorePool::add(const RVector &scores, const Support &truth)
{
    const std::size_t base = labels_.size();
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        scores_.push_back(scores(i));
    labels_.resize(base + static_cast<std::size_t>(scores.size()), 0);
    for (std::size_t i : truth)
    {
        if (i >= static_cast<std::size_t>(scores.size()))
            throw ConfigError("true support index out of range");
        labels_[base + i] = 1;
    }
}

void ScorePool::merge(const ScorePool &other)
{
    scores_.insert(scores_.end(), other.scores_.begin(), other.scores_.end());
    labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
}

std::optional<double> ScorePool::auc() const
{
    return musa::auc(scores_, labels_);
}

const std::vector<std::string> &results_columns()
{
    static const std::vector<std::string> columns = {"detector", "or_percent", "n", "snr_db", "mode", "snapshots",
                                                     "tp",       "fp",         "fn", "tn",    "p_d",  "ppv",
                                                     "p_m",      "f1",         "auc"};
    return columns;
}

namespace
{

std::string optional_text(const std::optional<double> &v)
{
    return v ? detail::format_double(*v) : std::string("NA");
}

std::optional<double> optional_value(std::string_view text)
{
    if (detail::trim(text) == "NA")
        return std::nullopt;
    return detail::parse_double(text, "results value");
}

} // namespace

void write_results_csv(std::ostream &out, std::span<const ResultRow> rows)
{
    const auto &cols = results_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const ResultRow &row : rows)
    {
        const MetricsReport &r = row.report;
        out << row.key.detector << ',' << detail::format_double(row.key.or_percent) << ',' << row.key.active << ','
            << detail::format_double(row.key.snr_db) << ',' << row.key.mode << ',' << row.snapshots << ','
            << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.fn << ',' << r.counts.tn << ','
            << optional_text(r.p_d) << ',' << optional_text(r.ppv) << ',' << optional_text(r.p_m) << ','
            << optional_text(r.f1) << ',' << optional_text(r.auc) << '\n';
    }
}

std::vector<ResultRow> read_results_csv(std::istream &in)
{
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("results table is empty");
    const auto header = detail::split(detail::trim(line), ',');
    const auto &cols = results_columns();
    if (header.size() != cols.size() || !std::equal(header.begin(), header.end(), cols.begin()))
        throw FormatError("results table header does not match the expected columns");

    std::vector<ResultRow> rows;
    while (std::getline(in, line))
    {
        if (detail::trim(line).empty())
            continue;
        const auto f = detail::split(detail::trim(line), ',');
        if (f.size() != cols.size())
            throw FormatError("results row has " + std::to_string(f.size()) + " fields");
        ResultRow row;
        row.key.detector = std::string(f[0]);
        row.key.or_percent = detail::parse_double(f[1], "or_percent");
        row.key.active = detail::parse_unsigned(f[2], "n");
        row.key.snr_db = detail::parse_double(f[3], "snr_db");
        row.key.mode = std::string(f[4]);
        row.snapshots = detail::parse_unsigned(f[5], "snapshots");
        Confusion c{detail::parse_unsigned(f[6], "tp"), detail::parse_unsigned(f[7], "fp"),
                    detail::parse_unsigned(f[8], "fn"), detail::parse_unsigned(f[9], "tn")};
        row.report = finalize(c, optional_value(f[14]));
        rows.push_back(std::move(row));
    }
    return rows;
}

double proportion_standard_error(double p, std::uint64_t trials)
{
    if (trials == 0)
        return 0.0;
    return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(trials));
}

} // namespace musa
