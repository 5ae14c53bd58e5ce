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

#ifndef MUSA_RNG_HPP
#define MUSA_RNG_HPP

#include "musa/types.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <random>

namespace musa
{

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent generator for a (seed, key...) tuple. Every snapshot, shuffle and
// mask owns its own stream so results never depend on scheduling order.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {})
{
    std::uint64_t state = splitmix64(seed);
    for (std::uint64_t key : keys)
        state = splitmix64(state ^ splitmix64(key + 0x632be59bd9b4e019ULL));
    return Rng(state);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng &rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection; n must be positive.
inline std::uint64_t uniform_index(Rng &rng, std::uint64_t n)
{
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t draw;
    do
        draw = rng();
    while (draw >= limit);
    return draw % n;
}

// Standard normal via Box-Muller (one of the pair is discarded).
inline double standard_normal(Rng &rng)
{
    double u1;
    do
        u1 = uniform01(rng);
    while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cdouble complex_normal(Rng &rng, double variance = 1.0)
{
    const double s = std::sqrt(variance / 2.0);
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    return {s * re, s * im};
}

} // namespace musa

#endif
