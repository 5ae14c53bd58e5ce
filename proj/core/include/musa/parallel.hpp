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

#ifndef MUSA_PARALLEL_HPP
#define MUSA_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace musa
{

// Name of the environment variable that sets the worker-pool size.
inline constexpr const char *kWorkersEnv = "MUSA_WORKERS";

// Worker count from MUSA_WORKERS, falling back to the hardware concurrency.
std::size_t worker_count();

// Runs body(begin, end) over contiguous chunks of [0, n). The partition is
// static, so callers that derive per-index state get identical results for any
// worker count. The first exception thrown by a chunk is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body &&body, std::size_t workers = worker_count())
{
    if (n == 0)
        return;
    workers = std::clamp<std::size_t>(workers, 1, n);
    if (workers == 1)
    {
        body(std::size_t{0}, n);
        return;
    }

    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w)
        {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin >= end)
                break;
            pool.emplace_back([&, begin, end] {
                try
                {
                    body(begin, end);
                }
                catch (...)
                {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            });
        }
    }
    if (error)
        std::rethrow_exception(error);
}

} // namespace musa

#endif
