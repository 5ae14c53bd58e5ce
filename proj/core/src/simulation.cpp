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

#include "musa/simulation.hpp"

#include "musa/errors.hpp"

#include <cmath>
#include <numeric>

namespace musa
{

double ChannelParams::pathloss_db(double distance_km)
{
    return 128.1 + 37.6 * std::log10(distance_km);
}

double ChannelParams::noise_power_dbm() const
{
    return noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz);
}

void ChannelParams::validate() const
{
    if (!(min_distance_km > 0.0))
        throw ConfigError("minimum device distance must be positive");
    if (!(cell_radius_km > min_distance_km))
        throw ConfigError("cell radius must exceed the minimum device distance");
    if (!(shadowing_std_db >= 0.0))
        throw ConfigError("shadowing standard deviation must be non-negative");
    if (!(bandwidth_hz > 0.0))
        throw ConfigError("bandwidth must be positive");
}

ActivityVector draw_activity(std::size_t n_devices, const ActivityPolicy &policy, Rng &rng)
{
    ActivityVector psi(n_devices, 0);
    if (const auto *fixed = std::get_if<FixedCount>(&policy))
    {
        if (fixed->n < 1 || fixed->n > n_devices)
            throw ConfigError("active count " + std::to_string(fixed->n) + " outside [1, " +
                              std::to_string(n_devices) + "]");
        // Partial Fisher-Yates over device indices.
        std::vector<std::size_t> order(n_devices);
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = 0; i < fixed->n; ++i)
        {
            const auto j = i + static_cast<std::size_t>(uniform_index(rng, n_devices - i));
            std::swap(order[i], order[j]);
            psi[order[i]] = 1;
        }
    }
    else
    {
        const double p = std::get<BernoulliActivity>(policy).p;
        if (!(p >= 0.0 && p <= 1.0))
            throw ConfigError("activation probability must lie in [0, 1]");
        for (auto &v : psi)
            v = uniform01(rng) < p ? 1 : 0;
    }
    return psi;
}

CVector draw_channel(const ChannelParams &params, std::size_t n_devices, Rng &rng)
{
    params.validate();
    CVector h(static_cast<Eigen::Index>(n_devices));
    const double span = params.cell_radius_km - params.min_distance_km;
    for (Eigen::Index i = 0; i < h.size(); ++i)
    {
        // 1 - u lies in (0, 1], so r lies in (r_min, R].
        const double r = params.min_distance_km + span * (1.0 - uniform01(rng));
        const double shadow_db = params.shadowing_std_db * standard_normal(rng);
        const double gain = std::pow(10.0, -(ChannelParams::pathloss_db(r) + shadow_db) / 10.0);
        h(i) = std::sqrt(gain) * complex_normal(rng);
    }
    return h;
}

Support support_of(const ActivityVector &psi)
{
    Support out;
    for (std::size_t i = 0; i < psi.size(); ++i)
        if (psi[i] != 0)
            out.push_back(i);
    return out;
}

double amplitude_for_snr(const CVector &noiseless, double snr_db, double noise_variance)
{
    const double power = noiseless.squaredNorm();
    if (power == 0.0)
        return 0.0;
    const double target = std::pow(10.0, snr_db / 10.0) * noise_variance * static_cast<double>(noiseless.size());
    return std::sqrt(target / power);
}

namespace
{

CVector activity_times_channel(const ActivityVector &psi, const CVector &h)
{
    CVector varphi = CVector::Zero(h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i)
        if (psi[static_cast<std::size_t>(i)] != 0)
            varphi(i) = h(i);
    return varphi;
}

void check_shapes(const SpreadingMatrix &codebook, const ActivityVector &psi, const CVector &h)
{
    if (psi.size() != codebook.devices() || static_cast<std::size_t>(h.size()) != codebook.devices())
        throw ShapeError("activity and channel vectors must have one entry per codebook column");
}

} // namespace

Snapshot synthesize_with_amplitude(const SpreadingMatrix &codebook, const ActivityVector &psi, const CVector &h,
                                   double amplitude, double noise_variance, Rng &rng)
{
    check_shapes(codebook, psi, h);
    if (!(noise_variance >= 0.0))
        throw ConfigError("noise variance must be non-negative");

    Snapshot snap;
    snap.psi = psi;
    snap.h = h;
    snap.varphi = activity_times_channel(psi, h);
    snap.amplitude = amplitude;
    snap.noise_variance = noise_variance;
    snap.noise_only = snap.varphi.squaredNorm() == 0.0;
    snap.y_p = amplitude * (codebook.columns() * snap.varphi);
    if (noise_variance > 0.0)
        for (Eigen::Index i = 0; i < snap.y_p.size(); ++i)
            snap.y_p(i) += complex_normal(rng, noise_variance);
    return snap;
}

Snapshot synthesize_snapshot(const SpreadingMatrix &codebook, const ActivityVector &psi, const CVector &h,
                             double snr_db, Rng &rng, NoiseMode noise)
{
    check_shapes(codebook, psi, h);
    const CVector noiseless = codebook.columns() * activity_times_channel(psi, h);
    const double amplitude = amplitude_for_snr(noiseless, snr_db);
    Snapshot snap =
        synthesize_with_amplitude(codebook, psi, h, amplitude, noise == NoiseMode::Add ? 1.0 : 0.0, rng);
    snap.snr_db = snr_db;
    return snap;
}

RVector stack_real(const CVector &y)
{
    const Eigen::Index l = y.size();
    RVector out(2 * l);
    out.head(l) = y.real();
    out.tail(l) = y.imag();
    return out;
}

} // namespace musa
