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

#include "musa/plots.hpp"

#include "musa/errors.hpp"
#include "musa/metrics.hpp"
#include "text_format.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <tuple>

namespace musa
{

namespace
{

namespace fs = std::filesystem;

struct Family
{
    std::string file;
    std::string title;
    std::string metric;  // results column plotted on the y axis
    std::string x;       // "snr_db" or "n"
    std::string filter;  // column held fixed
    double filter_value;
    std::string x_label;
    std::string y_label;
};

std::string py_string(const std::string &text)
{
    std::string out = "\"";
    for (char c : text)
    {
        if (c == '\\' || c == '"')
            out += '\\';
        out += c;
    }
    return out + "\"";
}

double metric_of(const ResultRow &row, const std::string &metric, bool &defined)
{
    const std::optional<double> &v = metric == "p_d" ? row.report.p_d : metric == "ppv" ? row.report.ppv : row.report.p_m;
    defined = v.has_value();
    return v.value_or(0.0);
}

double column_of(const ResultRow &row, const std::string &column)
{
    return column == "n" ? static_cast<double>(row.key.active) : row.key.snr_db;
}

std::string render(const Family &family, const std::vector<double> &xs, const std::string &csv_rel)
{
    std::string grid = "[";
    for (std::size_t i = 0; i < xs.size(); ++i)
        grid += (i ? ", " : "") + detail::format_double(xs[i]);
    grid += "]";
    const std::string png = fs::path(family.file).replace_extension(".png").string();

    std::string s;
    s += "#!/usr/bin/env python3\n";
    s += "\"\"\"" + family.title + ", rendered from the musa results table.\n\n";
    s += "Usage: python3 " + family.file + " [metrics.csv]\n\"\"\"\n";
    s += "import csv\nimport math\nimport os\nimport sys\n\n";
    s += "import matplotlib\n\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n";
    s += "HERE = os.path.dirname(os.path.abspath(__file__))\n";
    s += "CSV = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, " + py_string(csv_rel) + ")\n";
    s += "OUT = os.path.join(HERE, " + py_string(png) + ")\n";
    s += "METRIC = " + py_string(family.metric) + "\n";
    s += "X = " + py_string(family.x) + "\n";
    s += "FILTER = (" + py_string(family.filter) + ", " + detail::format_double(family.filter_value) + ")\n";
    s += "# Expected x grid; absent or undefined cells are drawn as gaps.\n";
    s += "XS = " + grid + "\n\n";
    s += "series = {}\n";
    s += "with open(CSV, newline=\"\") as f:\n";
    s += "    for row in csv.DictReader(f):\n";
    s += "        if float(row[FILTER[0]]) != FILTER[1]:\n";
    s += "            continue\n";
    s += "        key = (row[\"detector\"], row[\"mode\"], float(row[\"or_percent\"]))\n";
    s += "        value = math.nan if row[METRIC] == \"NA\" else float(row[METRIC])\n";
    s += "        series.setdefault(key, {})[float(row[X])] = value\n\n";
    s += "fig, ax = plt.subplots(figsize=(6.4, 4.8))\n";
    s += "for (detector, mode, ratio), points in sorted(series.items()):\n";
    s += "    ys = [points.get(x, math.nan) for x in XS]\n";
    s += "    ax.plot(XS, ys, marker=\"o\", label=f\"{detector} ({mode}), OR {ratio:g}%\")\n";
    s += "ax.set_xlabel(" + py_string(family.x_label) + ")\n";
    s += "ax.set_ylabel(" + py_string(family.y_label) + ")\n";
    s += "ax.set_title(" + py_string(family.title) + ")\n";
    s += "ax.set_ylim(0.0, 1.02)\n";
    s += "ax.grid(True, alpha=0.3)\n";
    s += "if series:\n    ax.legend(fontsize=\"small\")\n";
    s += "fig.tight_layout()\n";
    s += "fig.savefig(OUT, dpi=150)\n";
    s += "print(OUT)\n";
    return s;
}

} // namespace

PlotReport emit_plots(const std::string &metrics_csv, const std::string &out_dir, const PlotOptions &options)
{
    std::ifstream in(metrics_csv, std::ios::binary);
    if (!in)
        throw Error("cannot open results table " + metrics_csv);
    std::vector<ResultRow> rows;
    try
    {
        rows = read_results_csv(in);
    }
    catch (const FormatError &e)
    {
        throw Error(std::string("cannot plot ") + metrics_csv + ": " + e.what());
    }
    if (rows.empty())
        throw Error("cannot plot " + metrics_csv + ": the results table has no rows");

    const auto na = [](std::size_t n) { return "n" + std::to_string(n); };
    const double a = static_cast<double>(options.sweep_active_a);
    const double b = static_cast<double>(options.sweep_active_b);
    const std::string snr_text = detail::format_double(options.fixed_snr_db);
    const std::vector<Family> families{
        {"pd_vs_snr_" + na(options.sweep_active_a) + ".py", "Detection probability vs SNR, n = " + detail::format_double(a),
         "p_d", "snr_db", "n", a, "SNR (dB)", "P_D (recall)"},
        {"pd_vs_snr_" + na(options.sweep_active_b) + ".py", "Detection probability vs SNR, n = " + detail::format_double(b),
         "p_d", "snr_db", "n", b, "SNR (dB)", "P_D (recall)"},
        {"ppv_vs_snr_" + na(options.sweep_active_a) + ".py", "Precision vs SNR, n = " + detail::format_double(a), "ppv",
         "snr_db", "n", a, "SNR (dB)", "PPV (precision)"},
        {"ppv_vs_snr_" + na(options.sweep_active_b) + ".py", "Precision vs SNR, n = " + detail::format_double(b), "ppv",
         "snr_db", "n", b, "SNR (dB)", "PPV (precision)"},
        {"pd_vs_active.py", "Detection probability vs active devices, SNR " + snr_text + " dB", "p_d", "n", "snr_db",
         options.fixed_snr_db, "active devices n", "P_D (recall)"},
        {"pm_vs_active.py", "Misdetection probability vs active devices, SNR " + snr_text + " dB", "p_m", "n",
         "snr_db", options.fixed_snr_db, "active devices n", "P_M (false negative rate)"},
    };

    using SeriesKey = std::tuple<std::string, std::string, double>;
    std::set<SeriesKey> all_series;
    for (const auto &row : rows)
        all_series.emplace(row.key.detector, row.key.mode, row.key.or_percent);

    fs::create_directories(out_dir);
    std::string csv_rel = fs::relative(fs::absolute(metrics_csv), fs::absolute(out_dir)).generic_string();
    if (csv_rel.empty())
        csv_rel = fs::absolute(metrics_csv).generic_string();

    PlotReport report;
    for (const Family &family : families)
    {
        std::set<double> xs;
        std::set<std::tuple<std::string, std::string, double, double>> present;
        for (const auto &row : rows)
        {
            if (column_of(row, family.filter) != family.filter_value)
                continue;
            const double x = column_of(row, family.x);
            xs.insert(x);
            bool defined = false;
            metric_of(row, family.metric, defined);
            if (defined)
                present.emplace(row.key.detector, row.key.mode, row.key.or_percent, x);
        }
        const std::string stem = fs::path(family.file).stem().string();
        if (xs.empty())
            report.warnings.push_back(stem + ": no cells with " + family.filter + " = " +
                                      detail::format_double(family.filter_value));
        for (const auto &[detector, mode, ratio] : all_series)
            for (double x : xs)
                if (!present.count({detector, mode, ratio, x}))
                    report.warnings.push_back(stem + ": missing " + family.metric + " for " + detector + " (" + mode +
                                              "), OR " + detail::format_double(ratio) + "%, " + family.x + " = " +
                                              detail::format_double(x));

        const std::string path = (fs::path(out_dir) / family.file).string();
        std::ofstream out(path, std::ios::binary);
        out << render(family, std::vector<double>(xs.begin(), xs.end()), csv_rel);
        if (!out)
            throw Error("cannot write " + path);
        out.close();
        fs::permissions(path, fs::perms::owner_exec | fs::perms::group_exec | fs::perms::others_exec,
                        fs::perm_options::add);
        report.scripts.push_back(path);
    }
    return report;
}

} // namespace musa
