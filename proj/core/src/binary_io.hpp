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

#ifndef MUSA_BINARY_IO_HPP
#define MUSA_BINARY_IO_HPP

#include "musa/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace musa::detail
{

// Little-endian scalar I/O for the dataset and checkpoint containers.
template <class T>
void put_le(std::ostream &out, T value)
{
    static_assert(std::is_arithmetic_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
}

template <class T>
T get_le(std::istream &in)
{
    static_assert(std::is_arithmetic_v<T>);
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), sizeof(T)))
        throw FormatError("unexpected end of file");
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline void put_text(std::ostream &out, const std::string &text)
{
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline std::string get_text(std::istream &in, std::uint32_t max_size = 1u << 24)
{
    const auto size = get_le<std::uint32_t>(in);
    if (size > max_size)
        throw FormatError("text block too large");
    std::string text(size, '\0');
    if (size > 0 && !in.read(text.data(), size))
        throw FormatError("unexpected end of file");
    return text;
}

inline void expect_magic(std::istream &in, const std::array<char, 8> &magic, const char *what)
{
    std::array<char, 8> got{};
    if (!in.read(got.data(), got.size()) || got != magic)
        throw FormatError(std::string("not a ") + what + " file");
}

} // namespace musa::detail

#endif
