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

#ifndef MUSA_PLOTS_HPP
#define MUSA_PLOTS_HPP

#include <string>
#include <vector>

namespace musa
{

struct PlotOptions
{
    // SNR of the active-count families.
    double fixed_snr_db = 20.0;
    // Active counts of the two SNR-sweep families.
    std::size_t sweep_active_a = 1;
    std::size_t sweep_active_b = 2;
};

struct PlotReport
{
    std::vector<std::string> scripts;
    // One entry per absent (family, detector, mode, OR, x) cell or empty family.
    std::vector<std::string> warnings;
};

/// Writes six standalone matplotlib scripts into out_dir, each reading the
/// results CSV at run time and saving a PNG next to itself:
/// P_D and PPV versus SNR for two active counts, and P_D and P_M versus the
/// active count at a fixed SNR. Throws Error if the CSV holds no rows.
PlotReport emit_plots(const std::string &metrics_csv, const std::string &out_dir, const PlotOptions &options = {});

} // namespace musa

#endif
