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

#ifndef MUSA_HASH_HPP
#define MUSA_HASH_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace musa
{

// 64-bit FNV-1a. Used to key pipeline stages and to tie checkpoints to the
// codebook they were trained on; not a cryptographic digest.
class Fnv1a
{
public:
    Fnv1a &update(std::span<const std::byte> bytes) noexcept
    {
        for (std::byte b : bytes)
        {
            state_ ^= static_cast<std::uint64_t>(b);
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    Fnv1a &update(std::string_view text) noexcept { return update(std::as_bytes(std::span(text.data(), text.size()))); }

    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t hash_text(std::string_view text) noexcept { return Fnv1a{}.update(text).digest(); }

// Fixed-width lowercase hex, 16 characters.
std::string to_hex(std::uint64_t value);

// Hash of a whole file's bytes; throws FormatError if it cannot be read.
std::uint64_t hash_file(const std::string &path);

} // namespace musa

#endif
