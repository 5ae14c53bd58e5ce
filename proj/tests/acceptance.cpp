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

// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. The long pipeline run lives under
// --work-dir and is reused by later invocations when its inputs are unchanged.

#include "musa/codebook.hpp"
#include "musa/config.hpp"
#include "musa/detectors.hpp"
#include "musa/metrics.hpp"
#include "musa/nn.hpp"
#include "musa/pipeline.hpp"
#include "musa/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace musa;

namespace
{

struct Verdict
{
    bool pass = false;
    std::string detail;
    std::vector<std::string> notes;
};

std::string fixed(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---- 1: gradients ---------------------------------------------------------

double replay_loss(nn::Mlp &model, const RMatrix &x, const RMatrix &y, std::uint64_t seed)
{
    Rng rng = make_stream(seed);
    return nn::bce_loss(nn::sigmoid(model.forward_logits(x, nn::Mode::Train, &rng)), y);
}

double central_difference(nn::Mlp &model, double &value, const RMatrix &x, const RMatrix &y, std::uint64_t seed,
                          double h)
{
    const double saved = value;
    value = saved + h;
    const double up = replay_loss(model, x, y, seed);
    value = saved - h;
    const double down = replay_loss(model, x, y, seed);
    value = saved;
    return (up - down) / (2.0 * h);
}

Verdict gradient_check()
{
    Rng rng = make_stream(2024);
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(uniform_index(rng, hi - lo + 1)); };
    double worst = 0.0;
    std::size_t checked = 0, kinks = 0, shapes = 0;
    for (; shapes < 30; ++shapes)
    {
        nn::Architecture arch;
        arch.inputs = 2 * pick(1, 4);
        arch.outputs = pick(1, 8);
        arch.hidden_width = pick(2, 8);
        arch.hidden_dense_layers = pick(0, 2);
        arch.dropout = uniform01(rng) < 0.5 ? 0.0 : 0.25;
        arch.norm_before_activation = uniform01(rng) < 0.5;
        nn::Mlp model = nn::Mlp::build(arch, shapes);
        const Eigen::Index batch = static_cast<Eigen::Index>(pick(2, 9));
        RMatrix x(batch, static_cast<Eigen::Index>(arch.inputs));
        RMatrix y(batch, static_cast<Eigen::Index>(arch.outputs));
        for (Eigen::Index i = 0; i < batch; ++i)
        {
            for (Eigen::Index j = 0; j < x.cols(); ++j)
                x(i, j) = standard_normal(rng);
            for (Eigen::Index j = 0; j < y.cols(); ++j)
                y(i, j) = uniform01(rng) < 0.4 ? 1.0 : 0.0;
        }

        const std::uint64_t seed = 500 + shapes;
        Rng dropout = make_stream(seed);
        model.backward(nn::bce_grad_logits(nn::sigmoid(model.forward_logits(x, nn::Mode::Train, &dropout)), y));
        for (const nn::ParamView &p : model.parameters())
        {
            const RVector analytic = Eigen::Map<const RVector>(p.grad, p.size);
            for (Eigen::Index i = 0; i < p.size; ++i)
            {
                const double a = central_difference(model, p.value[i], x, y, seed, 1e-5);
                const double b = central_difference(model, p.value[i], x, y, seed, 5e-6);
                // A stencil across a ReLU kink is step-size dependent.
                if (std::abs(a - b) > 1e-6 * std::max(std::abs(a), 1e-3))
                {
                    ++kinks;
                    continue;
                }
                const double scale = std::max({std::abs(a), std::abs(analytic(i)), 1e-6});
                worst = std::max(worst, std::abs(a - analytic(i)) / scale);
                ++checked;
            }
        }
    }
    Verdict v;
    v.pass = worst < 1e-4 && kinks * 20 < checked;
    v.detail = std::to_string(shapes) + " shapes, " + std::to_string(checked) + " entries, max rel err " +
               std::to_string(worst) + ", " + std::to_string(kinks) + " kink stencils skipped";
    return v;
}

// ---- 2: LS-BOMP against the oracle ----------------------------------------

Verdict oracle_equivalence(const ExperimentConfig &config)
{
    const SpreadingMatrix cb = select_low_correlation(
        SequenceSpace(ComplexElementSet(config.m_ary), config.code_length), 8, config.rho, config.codebook_seed);
    std::size_t agree = 0;
    const std::size_t trials = 1000;
    for (std::size_t k = 0; k < trials; ++k)
    {
        Rng rng = make_stream(77, {k});
        const ActivityVector psi = draw_activity(8, FixedCount{1}, rng);
        const CVector h = draw_channel(config.channel, 8, rng);
        const Snapshot s = synthesize_snapshot(cb, psi, h, 30.0, rng);
        agree += detect_ls_bomp(cb, s.y_p, 1).support == detect_oracle(cb, s.y_p, 1).support;
    }
    Verdict v;
    v.pass = agree * 100 >= trials * 99;
    v.detail = std::to_string(agree) + "/" + std::to_string(trials) + " snapshots agree at 30 dB, n=1, OR 200%";
    return v;
}

// ---- 3-6: the evaluation grid ----------------------------------------------

class Results
{
public:
    explicit Results(std::vector<ResultRow> rows) : rows_(std::move(rows)) {}

    const ResultRow *find(const std::string &detector, double or_percent, std::size_t n, double snr,
                          const std::string &mode = "known-n") const
    {
        for (const auto &r : rows_)
            if (r.key.detector == detector && r.key.or_percent == or_percent && r.key.active == n &&
                r.key.snr_db == snr && r.key.mode == mode)
                return &r;
        return nullptr;
    }

    const std::vector<ResultRow> &rows() const { return rows_; }

private:
    std::vector<ResultRow> rows_;
};

double standard_error(const ResultRow &row)
{
    return proportion_standard_error(row.report.p_d.value_or(0.0), row.report.counts.tp + row.report.counts.fn);
}

// Allowed drop between two independent proportion estimates.
double two_se(const ResultRow &a, const ResultRow &b)
{
    return 2.0 * std::hypot(standard_error(a), standard_error(b));
}

Verdict ordering_at_three(const Results &results, double snr)
{
    Verdict v;
    const ResultRow *dnn = results.find("dnn", 200.0, 3, snr);
    const ResultRow *bomp = results.find("ls-bomp", 200.0, 3, snr);
    const ResultRow *camp = results.find("c-amp", 200.0, 3, snr);
    if (!dnn || !bomp || !camp || !dnn->report.p_d || !bomp->report.p_d || !camp->report.p_d)
    {
        v.detail = "missing n=3 cells in the results table";
        return v;
    }
    const double d = *dnn->report.p_d, b = *bomp->report.p_d, c = *camp->report.p_d;
    v.pass = d > b && d > c;
    v.detail = "P_D dnn " + fixed(d) + ", ls-bomp " + fixed(b) + ", c-amp " + fixed(c) + " (n=3, " + fixed(snr, 0) +
               " dB, OR 200%, " + std::to_string(dnn->snapshots) + " snapshots)";
    auto band = [&](const std::string &name, double value, double target, double tol) {
        const bool inside = std::abs(value - target) <= tol;
        v.notes.push_back("soft band " + name + ": " + fixed(value) + " vs " + fixed(target, 2) + " +/- " +
                          fixed(tol, 2) + (inside ? " inside" : " outside"));
    };
    band("ls-bomp", b, 0.35, 0.10);
    band("c-amp", c, 0.38, 0.10);
    band("dnn", d, 0.70, 0.15);
    return v;
}

Verdict misdetection_anchor(const Results &results, double snr)
{
    Verdict v;
    const ResultRow *dnn = results.find("dnn", 200.0, 1, snr);
    if (!dnn || !dnn->report.p_m)
    {
        v.detail = "missing dnn n=1 cell";
        return v;
    }
    v.pass = *dnn->report.p_m <= 0.08;
    v.detail = "dnn P_M " + fixed(*dnn->report.p_m) + " at n=1, " + fixed(snr, 0) + " dB, OR 200% (limit 0.08)";
    if (const ResultRow *blind = results.find("dnn", 200.0, 1, snr, "blind"); blind && blind->report.p_m)
        v.notes.push_back("blind-mode dnn P_M " + fixed(*blind->report.p_m));
    return v;
}

Verdict monotone_in_snr(const Results &results)
{
    // (detector, mode, OR, n) -> snr -> row
    std::map<std::tuple<std::string, std::string, double, std::size_t>, std::map<double, const ResultRow *>> curves;
    for (const auto &r : results.rows())
        curves[{r.key.detector, r.key.mode, r.key.or_percent, r.key.active}][r.key.snr_db] = &r;

    Verdict v;
    v.pass = true;
    std::size_t pairs = 0, curves_checked = 0;
    double worst = -1.0;
    for (const auto &[key, by_snr] : curves)
    {
        if (by_snr.size() < 2)
            continue;
        ++curves_checked;
        for (auto it = by_snr.begin(), next = std::next(it); next != by_snr.end(); ++it, ++next)
        {
            const ResultRow &a = *it->second, &b = *next->second;
            if (!a.report.p_d || !b.report.p_d)
                continue;
            ++pairs;
            const double drop = *a.report.p_d - *b.report.p_d;
            const double allowed = two_se(a, b);
            worst = std::max(worst, drop - allowed);
            if (drop > allowed)
            {
                v.pass = false;
                v.notes.push_back(std::get<0>(key) + " (" + std::get<1>(key) + "), OR " + fixed(std::get<2>(key), 0) +
                                  "%, n=" + std::to_string(std::get<3>(key)) + ": P_D drops " + fixed(drop) +
                                  " from " + fixed(it->first, 0) + " to " + fixed(next->first, 0) + " dB");
            }
        }
    }
    if (curves_checked == 0)
        v.pass = false;
    v.detail = std::to_string(curves_checked) + " curves, " + std::to_string(pairs) +
               " adjacent pairs, worst excess over 2 SE " + fixed(worst);
    return v;
}

Verdict ordering_across_or(const Results &results, double snr)
{
    std::map<std::pair<std::string, std::string>, std::map<double, const ResultRow *>> by_detector;
    for (const auto &r : results.rows())
        if (r.key.active == 1 && r.key.snr_db == snr)
            by_detector[{r.key.detector, r.key.mode}][r.key.or_percent] = &r;

    Verdict v;
    v.pass = !by_detector.empty();
    std::string summary;
    for (const auto &[key, by_or] : by_detector)
    {
        if (by_or.size() != 3)
        {
            v.pass = false;
            v.notes.push_back(key.first + " (" + key.second + ") lacks one of the three overloading ratios");
            continue;
        }
        summary += (summary.empty() ? "" : "; ") + key.first + (key.second == "blind" ? "/blind" : "");
        for (auto it = by_or.begin(), next = std::next(it); next != by_or.end(); ++it, ++next)
        {
            const ResultRow &lo = *it->second, &hi = *next->second;
            summary += " " + fixed(*lo.report.p_d, 3);
            if (*hi.report.p_d - *lo.report.p_d > two_se(lo, hi))
            {
                v.pass = false;
                v.notes.push_back(key.first + ": P_D rises from OR " + fixed(it->first, 0) + "% to " +
                                  fixed(next->first, 0) + "%");
            }
        }
        summary += " " + fixed(*by_or.rbegin()->second->report.p_d, 3);
    }
    v.detail = "P_D at OR 200/300/400%, n=1, " + fixed(snr, 0) + " dB: " + summary;
    return v;
}

// ---- 7: codebook contract --------------------------------------------------

long long round_int(double v)
{
    return std::llround(v);
}

Verdict codebook_contract()
{
    const SequenceSpace space(ComplexElementSet(3), 4);
    std::uint64_t enumerated = 0;
    for (auto it = space.begin(); it != space.end(); ++it)
        ++enumerated;

    std::size_t books = 0, violations = 0, pairs = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        for (std::size_t n : {8u, 12u, 16u})
        {
            const SpreadingMatrix cb = select_low_correlation(space, n, 0.75, seed);
            ++books;
            const CMatrix &c = cb.columns();
            for (Eigen::Index a = 0; a < c.cols(); ++a)
                for (Eigen::Index b = a + 1; b < c.cols(); ++b)
                {
                    // Gaussian-integer arithmetic: |<a,b>|^2 <= (3/4)^2 |a|^2 |b|^2
                    // becomes 16 |<a,b>|^2 <= 9 |a|^2 |b|^2 exactly.
                    long long re = 0, im = 0, na = 0, nb = 0;
                    for (Eigen::Index r = 0; r < c.rows(); ++r)
                    {
                        const long long ar = round_int(c(r, a).real()), ai = round_int(c(r, a).imag());
                        const long long br = round_int(c(r, b).real()), bi = round_int(c(r, b).imag());
                        re += ar * br + ai * bi;
                        im += ar * bi - ai * br;
                        na += ar * ar + ai * ai;
                        nb += br * br + bi * bi;
                    }
                    ++pairs;
                    violations += 16 * (re * re + im * im) > 9 * na * nb;
                }
        }
    Verdict v;
    v.pass = violations == 0 && enumerated == 6560 && space.size() == 6560;
    v.detail = std::to_string(books) + " codebooks, " + std::to_string(pairs) + " pairs, " +
               std::to_string(violations) + " bound violations; enumerated " + std::to_string(enumerated) +
               " sequences (9^4 - 1 = 6560)";
    return v;
}

// ---- 8: metrics identities -------------------------------------------------

Verdict metrics_identities()
{
    Rng rng = make_stream(88);
    bool conserved = true, complementary = true;
    Confusion total;
    for (int k = 0; k < 10000; ++k)
    {
        const std::size_t devices = 1 + static_cast<std::size_t>(uniform_index(rng, 16));
        auto draw = [&] {
            Support s;
            for (std::size_t i = 0; i < devices; ++i)
                if (uniform01(rng) < 0.3)
                    s.push_back(i);
            return s;
        };
        const Confusion c = musa::accumulate(draw(), draw(), devices);
        conserved &= c.total() == devices;
        total += c;
        const MetricsReport r = finalize(total);
        if (r.p_d)
            complementary &= *r.p_d + *r.p_m == 1.0;
    }

    std::vector<double> ordered, random_scores, inverted;
    std::vector<std::uint8_t> labels;
    for (int i = 0; i < 20000; ++i)
    {
        const std::uint8_t label = uniform01(rng) < 0.3 ? 1 : 0;
        labels.push_back(label);
        const double s = uniform01(rng);
        ordered.push_back(label + s);
        inverted.push_back(-(label + s));
        random_scores.push_back(uniform01(rng));
    }
    const double a1 = *auc(ordered, labels), a_half = *auc(random_scores, labels), a0 = *auc(inverted, labels);
    Verdict v;
    v.pass = conserved && complementary && a1 == 1.0 && std::abs(a_half - 0.5) <= 0.02 && a0 == 0.0;
    v.detail = std::string("count conservation ") + (conserved ? "ok" : "broken") + ", P_D + P_M = 1 " +
               (complementary ? "ok" : "broken") + ", AUC " + fixed(a1, 3) + " / " + fixed(a_half, 3) + " / " +
               fixed(a0, 3);
    return v;
}

// ---- 9: determinism ----------------------------------------------------------

std::string read_bytes(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict determinism(const fs::path &work)
{
    ExperimentConfig c;
    c.devices = {8};
    c.dataset_size = 5000;
    c.train.batch_size = 100;
    c.train.epochs = 2;
    c.hidden_width = 32;
    c.eval_snr_db = {0, 10, 20};
    c.eval_sweep_active = {1, 2};
    c.eval_active = {1, 2, 3};
    c.eval_snapshots = 300;

    std::string csv[2];
    for (int run = 0; run < 2; ++run)
    {
        c.output_dir = (work / ("determinism_" + std::to_string(run))).string();
        fs::remove_all(c.output_dir);
        PipelineOptions options;
        options.workers = run == 0 ? 1 : 3;
        run_pipeline(c, Stage::Evaluate, options);
        csv[run] = read_bytes(metrics_path(c));
    }
    Verdict v;
    v.pass = !csv[0].empty() && csv[0] == csv[1];
    v.detail = "two fresh runs (1 and 3 workers): metrics CSV " + std::to_string(csv[0].size()) + " bytes, " +
               (v.pass ? "identical" : "different");
    return v;
}

// -----------------------------------------------------------------------------

struct Criterion
{
    int id;
    std::string name;
    std::function<Verdict()> run;
};

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"musa acceptance suite"};
    std::string work_dir = "acceptance_runs";
    std::size_t dataset_size = 1'000'000;
    std::size_t epochs = 20;
    std::size_t snapshots = 10'000;
    std::vector<int> only;
    app.add_option("--work-dir", work_dir, "Directory for pipeline artifacts");
    app.add_option("--dataset-size", dataset_size, "Training snapshots per overloading ratio");
    app.add_option("--epochs", epochs, "Training epochs");
    app.add_option("--snapshots", snapshots, "Evaluation snapshots per cell");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work_dir);

    ExperimentConfig main_config;
    main_config.dataset_size = dataset_size;
    main_config.train.epochs = epochs;
    main_config.eval_snapshots = snapshots;
    main_config.output_dir = (fs::path(work_dir) / "grid").string();
    const double snr = main_config.eval_fixed_snr_db;

    // Criteria 3-6 share one pipeline run, started on first use.
    std::optional<Results> grid;
    std::string grid_error;
    auto results = [&]() -> const Results * {
        if (!grid && grid_error.empty())
        {
            try
            {
                PipelineOptions options;
                options.log = &std::cout;
                const RunSummary summary = run_pipeline(main_config, Stage::Plots, options);
                for (const auto &w : summary.warnings)
                    std::cout << "  warning: " << w << '\n';
                std::ifstream in(metrics_path(main_config));
                grid.emplace(read_results_csv(in));
            }
            catch (const std::exception &e)
            {
                grid_error = e.what();
            }
        }
        return grid ? &*grid : nullptr;
    };
    auto on_grid = [&](std::function<Verdict(const Results &)> check) {
        return [&results, &grid_error, check] {
            if (const Results *r = results())
                return check(*r);
            return Verdict{false, "pipeline run failed: " + grid_error, {}};
        };
    };

    const std::vector<Criterion> criteria = {
        {1, "gradient correctness", gradient_check},
        {2, "LS-BOMP matches the exhaustive oracle at high SNR", [&] { return oracle_equivalence(main_config); }},
        {3, "DNN beats LS-BOMP and C-AMP at n=3", on_grid([&](const Results &r) { return ordering_at_three(r, snr); })},
        {4, "DNN misdetection at n=1", on_grid([&](const Results &r) { return misdetection_anchor(r, snr); })},
        {5, "P_D non-decreasing in SNR", on_grid(monotone_in_snr)},
        {6, "P_D non-increasing in overloading", on_grid([&](const Results &r) { return ordering_across_or(r, snr); })},
        {7, "codebook correlation bound and enumeration", codebook_contract},
        {8, "metrics identities", metrics_identities},
        {9, "end-to-end determinism", [&] { return determinism(work_dir); }},
    };

    int failures = 0;
    std::vector<std::string> lines;
    for (const Criterion &c : criteria)
    {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end())
            continue;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try
        {
            v = c.run();
        }
        catch (const std::exception &e)
        {
            v = {false, std::string("exception: ") + e.what(), {}};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += v.pass ? 0 : 1;
        std::ostringstream line;
        line << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << v.detail << " ["
             << fixed(seconds, 1) << " s]";
        for (const auto &note : v.notes)
            line << "\n       " << note;
        std::cout << line.str() << std::endl;
        lines.push_back(line.str());
    }

    std::cout << "\n==== acceptance summary ====\n";
    for (const auto &l : lines)
        std::cout << l << '\n';
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
    return failures == 0 ? 0 : 1;
}
