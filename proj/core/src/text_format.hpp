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

#ifndef MUSA_TEXT_FORMAT_HPP
#define MUSA_TEXT_FORMAT_HPP

#include "musa/errors.hpp"

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace musa::detail
{

// Shortest decimal form that parses back to the same double.
inline std::string format_double(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_whitespace(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < s.size())
    {
        const auto start = s.find_first_not_of(" \t\r\n", pos);
        if (start == std::string_view::npos)
            break;
        auto stop = s.find_first_of(" \t\r\n", start);
        if (stop == std::string_view::npos)
            stop = s.size();
        out.push_back(s.substr(start, stop - start));
        pos = stop;
    }
    return out;
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;)
    {
        const auto stop = s.find(sep, start);
        out.push_back(trim(s.substr(start, stop == std::string_view::npos ? std::string_view::npos : stop - start)));
        if (stop == std::string_view::npos)
            break;
        start = stop + 1;
    }
    return out;
}

inline double parse_double(std::string_view text, const char *what)
{
    text = trim(text);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw FormatError(std::string(what) + ": cannot parse '" + std::string(text) + "' as a number");
    return value;
}

inline std::uint64_t parse_unsigned(std::string_view text, const char *what)
{
    text = trim(text);
    std::uint64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw FormatError(std::string(what) + ": cannot parse '" + std::string(text) + "' as a non-negative integer");
    return value;
}

} // namespace musa::detail

#endif
