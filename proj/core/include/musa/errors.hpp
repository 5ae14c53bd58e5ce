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

#ifndef MUSA_ERRORS_HPP
#define MUSA_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace musa
{

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration values.
class ConfigError : public Error
{
public:
    using Error::Error;
};

// Tensor or vector dimensions that do not fit together.
class ShapeError : public Error
{
public:
    using Error::Error;
};

// Malformed or unsupported file contents.
class FormatError : public Error
{
public:
    using Error::Error;
};

// The low-correlation selection ran out of candidates.
class InfeasibleThreshold : public Error
{
public:
    InfeasibleThreshold(std::size_t found, std::size_t needed, double rho)
        : Error("threshold infeasible: found " + std::to_string(found) + " of " + std::to_string(needed) +
                " sequences with pairwise correlation <= " + std::to_string(rho)),
          found_(found), needed_(needed)
    {
    }

    std::size_t found() const noexcept { return found_; }
    std::size_t needed() const noexcept { return needed_; }

private:
    std::size_t found_;
    std::size_t needed_;
};

// An exhaustive computation exceeds its configured work cap.
class TooExpensive : public Error
{
public:
    using Error::Error;
};

class TrainingDiverged : public Error
{
public:
    explicit TrainingDiverged(std::size_t step)
        : Error("training diverged: non-finite loss or parameters at step " + std::to_string(step)), step_(step)
    {
    }

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

// A trained model was handed a codebook it was not trained on.
class ModelMismatch : public Error
{
public:
    using Error::Error;
};

class StageError : public Error
{
public:
    StageError(std::string stage, const std::string &what)
        : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage))
    {
    }

    const std::string &stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace musa

#endif
