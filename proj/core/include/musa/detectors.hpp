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

#ifndef MUSA_DETECTORS_HPP
#define MUSA_DETECTORS_HPP

#include "musa/codebook.hpp"
#include "musa/nn.hpp"
#include "musa/types.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace musa
{

// The number of active devices is given to the detector.
struct KnownCount
{
    std::size_t n;
};

// Every device whose score reaches the threshold is declared active.
struct Blind
{
    double threshold = 0.5;
};

using DetectionMode = std::variant<KnownCount, Blind>;

std::string mode_name(const DetectionMode &mode);

struct DetectionResult
{
    Support support;
    RVector scores; // higher means more likely active
    DetectionMode mode = KnownCount{0};
    // Set when a detector gave up on its iteration and returned fallback scores.
    bool fallback = false;
};

// Indices of the n largest scores, ties resolved towards the lower index,
// returned sorted ascending.
Support top_n(const RVector &scores, std::size_t n);

Support above_threshold(const RVector &scores, double threshold);

// Support from scores according to the mode.
Support select_support(const RVector &scores, const DetectionMode &mode);

// min over phi_S of 0.5 ||y - Phi_S phi_S||^2 (least squares on the support).
double support_residual(const CMatrix &columns, const CVector &y, const Support &support);

/// Greedy orthogonal matching pursuit with single-column blocks. Each
/// iteration picks the normalized column most correlated with the residual,
/// then re-projects y onto all picked columns by least squares. Scores rank
/// picks by order: the first pick scores n, the last 1, the rest 0.
DetectionResult detect_ls_bomp(const SpreadingMatrix &codebook, const CVector &y, std::size_t n);

struct CampOptions
{
    double alpha = 1.4;             // threshold = alpha * rms(residual)
    std::size_t max_iterations = 30;
    double tolerance = 1e-6;        // stop when the residual changes less than this, relatively
    double divergence_factor = 1e3; // give up once ||z|| exceeds this multiple of ||y||
};

/// Complex approximate message passing with a complex soft-threshold
/// denoiser and Onsager correction, on l2-normalized columns. Scores are |x|.
/// On divergence the result falls back to matched-filter scores |Phi^H y| and
/// is flagged.
DetectionResult detect_camp(const SpreadingMatrix &codebook, const CVector &y, std::size_t n,
                            const CampOptions &options = {});

inline constexpr std::uint64_t kDefaultOracleCap = 1'000'000;

/// Exhaustive least-squares search over every size-n support. Scores are 1 on
/// the minimizing support and 0 elsewhere. Throws TooExpensive above the cap.
DetectionResult detect_oracle(const SpreadingMatrix &codebook, const CVector &y, std::size_t n,
                              std::uint64_t max_supports = kDefaultOracleCap);

/// Network scores on the stacked real input. Throws ModelMismatch when the
/// model was trained on a different codebook.
DetectionResult detect_dnn(const nn::Mlp &model, const SpreadingMatrix &codebook, const CVector &y,
                           const DetectionMode &mode);

/// Common interface used by the evaluation harness.
class Detector
{
public:
    virtual ~Detector() = default;

    virtual std::string_view name() const = 0;
    virtual bool supports(const DetectionMode &mode) const;
    virtual DetectionResult detect(const CVector &y, const DetectionMode &mode) const = 0;
    virtual std::vector<DetectionResult> detect_batch(std::span<const CVector> ys, const DetectionMode &mode) const;
};

class LsBompDetector final : public Detector
{
public:
    explicit LsBompDetector(SpreadingMatrix codebook);
    std::string_view name() const override { return "ls-bomp"; }
    DetectionResult detect(const CVector &y, const DetectionMode &mode) const override;

private:
    SpreadingMatrix codebook_;
};

class CampDetector final : public Detector
{
public:
    explicit CampDetector(SpreadingMatrix codebook, CampOptions options = {});
    std::string_view name() const override { return "c-amp"; }
    DetectionResult detect(const CVector &y, const DetectionMode &mode) const override;

private:
    SpreadingMatrix codebook_;
    CampOptions options_;
};

class OracleDetector final : public Detector
{
public:
    explicit OracleDetector(SpreadingMatrix codebook, std::uint64_t max_supports = kDefaultOracleCap);
    std::string_view name() const override { return "oracle"; }
    DetectionResult detect(const CVector &y, const DetectionMode &mode) const override;

private:
    SpreadingMatrix codebook_;
    std::uint64_t max_supports_;
};

class DnnDetector final : public Detector
{
public:
    // Throws ModelMismatch if the model's codebook hash differs.
    DnnDetector(std::shared_ptr<const nn::Mlp> model, const SpreadingMatrix &codebook);
    std::string_view name() const override { return "dnn"; }
    bool supports(const DetectionMode &) const override { return true; }
    DetectionResult detect(const CVector &y, const DetectionMode &mode) const override;
    std::vector<DetectionResult> detect_batch(std::span<const CVector> ys, const DetectionMode &mode) const override;

private:
    std::shared_ptr<const nn::Mlp> model_;
    std::size_t code_length_;
};

} // namespace musa

#endif
