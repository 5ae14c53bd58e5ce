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

#ifndef MUSA_SIMULATION_HPP
#define MUSA_SIMULATION_HPP

#include "musa/codebook.hpp"
#include "musa/rng.hpp"
#include "musa/types.hpp"

#include <variant>

namespace musa
{

/// Large-scale propagation and receiver noise parameters.
struct ChannelParams
{
    double shadowing_std_db = 8.0;
    double noise_psd_dbm_hz = -170.0;
    double bandwidth_hz = 1e6;
    double cell_radius_km = 1.0;
    // Devices are placed at distances uniform in (min_distance_km, cell_radius_km].
    double min_distance_km = 0.05;

    // 128.1 + 37.6 log10(r), r in km.
    static double pathloss_db(double distance_km);

    double noise_power_dbm() const;

    void validate() const;
};

struct FixedCount
{
    std::size_t n;
};

struct BernoulliActivity
{
    double p;
};

using ActivityPolicy = std::variant<FixedCount, BernoulliActivity>;

// Fixed-n places exactly n ones uniformly without replacement; Bernoulli
// activates each device independently.
ActivityVector draw_activity(std::size_t n_devices, const ActivityPolicy &policy, Rng &rng);

// Per-device h_i = sqrt(g_i) f_i with g_i the pathloss/shadowing gain and
// f_i ~ CN(0, 1).
CVector draw_channel(const ChannelParams &params, std::size_t n_devices, Rng &rng);

Support support_of(const ActivityVector &psi);

/// One received pilot observation y_p = a * Phi (psi o h) + w.
struct Snapshot
{
    ActivityVector psi;
    CVector h;
    CVector varphi; // psi o h
    CVector y_p;
    double amplitude = 0.0;
    double noise_variance = 1.0; // per resource
    double snr_db = 0.0;
    bool noise_only = false; // no active device; y_p is pure noise

    Support support() const { return support_of(psi); }
};

enum class NoiseMode
{
    Add,
    Suppress
};

/// Receive SNR is ||a Phi (psi o h)||^2 / E||w||^2 with unit noise variance per
/// resource, so the common amplitude a is set per snapshot and the relative
/// device gains stay intact. NoiseMode::Suppress keeps a but drops w.
Snapshot synthesize_snapshot(const SpreadingMatrix &codebook, const ActivityVector &psi, const CVector &h,
                             double snr_db, Rng &rng, NoiseMode noise = NoiseMode::Add);

// Lower-level form with the amplitude and noise variance given explicitly.
Snapshot synthesize_with_amplitude(const SpreadingMatrix &codebook, const ActivityVector &psi, const CVector &h,
                                   double amplitude, double noise_variance, Rng &rng);

// Amplitude that realizes snr_db for a given noiseless superposition Phi (psi o h).
double amplitude_for_snr(const CVector &noiseless, double snr_db, double noise_variance = 1.0);

// [Re(y_1) .. Re(y_L), Im(y_1) .. Im(y_L)].
RVector stack_real(const CVector &y);

} // namespace musa

#endif
