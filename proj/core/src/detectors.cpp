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

#include "musa/detectors.hpp"

#include "musa/errors.hpp"
#include "musa/simulation.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace musa
{

std::string mode_name(const DetectionMode &mode)
{
    return std::holds_alternative<KnownCount>(mode) ? "known-n" : "blind";
}

Support top_n(const RVector &scores, std::size_t n)
{
    const auto size = static_cast<std::size_t>(scores.size());
    if (n > size)
        throw ConfigError("cannot select " + std::to_string(n) + " of " + std::to_string(size) + " devices");
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
    });
    Support out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(out.begin(), out.end());
    return out;
}

Support above_threshold(const RVector &scores, double threshold)
{
    Support out;
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        if (scores(i) >= threshold)
            out.push_back(static_cast<std::size_t>(i));
    return out;
}

Support select_support(const RVector &scores, const DetectionMode &mode)
{
    if (const auto *known = std::get_if<KnownCount>(&mode))
        return top_n(scores, known->n);
    return above_threshold(scores, std::get<Blind>(mode).threshold);
}

namespace
{

CMatrix gather_columns(const CMatrix &columns, const Support &support)
{
    CMatrix out(columns.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k)
        out.col(static_cast<Eigen::Index>(k)) = columns.col(static_cast<Eigen::Index>(support[k]));
    return out;
}

CVector least_squares(const CMatrix &a, const CVector &y)
{
    return Eigen::CompleteOrthogonalDecomposition<CMatrix>(a).solve(y);
}

void check_request(const SpreadingMatrix &codebook, const CVector &y, std::size_t n)
{
    if (static_cast<std::size_t>(y.size()) != codebook.code_length())
        throw ShapeError("received vector length does not match the code length");
    if (n < 1 || n > codebook.devices())
        throw ConfigError("active count " + std::to_string(n) + " outside [1, N]");
}

std::size_t known_count(const DetectionMode &mode, std::string_view detector)
{
    const auto *known = std::get_if<KnownCount>(&mode);
    if (known == nullptr)
        throw ConfigError(std::string(detector) + " runs with a known active count only");
    return known->n;
}

} // namespace

double support_residual(const CMatrix &columns, const CVector &y, const Support &support)
{
    if (support.empty())
        return 0.5 * y.squaredNorm();
    const CMatrix a = gather_columns(columns, support);
    return 0.5 * (y - a * least_squares(a, y)).squaredNorm();
}

DetectionResult detect_ls_bomp(const SpreadingMatrix &codebook, const CVector &y, std::size_t n)
{
    check_request(codebook, y, n);
    const CMatrix unit = codebook.normalized();
    const auto devices = static_cast<Eigen::Index>(codebook.devices());

    Support picked;
    std::vector<std::uint8_t> taken(codebook.devices(), 0);
    CVector residual = y;
    for (std::size_t it = 0; it < n; ++it)
    {
        const RVector corr = (unit.adjoint() * residual).cwiseAbs();
        Eigen::Index best = -1;
        for (Eigen::Index i = 0; i < devices; ++i)
            if (!taken[static_cast<std::size_t>(i)] && (best < 0 || corr(i) > corr(best)))
                best = i;
        picked.push_back(static_cast<std::size_t>(best));
        taken[static_cast<std::size_t>(best)] = 1;

        const CMatrix a = gather_columns(unit, picked);
        residual = y - a * least_squares(a, y);
    }

    DetectionResult out;
    out.mode = KnownCount{n};
    out.scores = RVector::Zero(devices);
    for (std::size_t k = 0; k < picked.size(); ++k)
        out.scores(static_cast<Eigen::Index>(picked[k])) = static_cast<double>(n - k);
    out.support = picked;
    std::sort(out.support.begin(), out.support.end());
    return out;
}

DetectionResult detect_camp(const SpreadingMatrix &codebook, const CVector &y, std::size_t n,
                            const CampOptions &options)
{
    check_request(codebook, y, n);
    if (options.max_iterations < 1)
        throw ConfigError("C-AMP needs at least one iteration");

    const CMatrix a = codebook.normalized();
    const auto devices = a.cols();
    const auto length = static_cast<double>(a.rows());
    const double undersampling = static_cast<double>(devices) / length;
    const double y_norm = y.norm();

    DetectionResult out;
    out.mode = KnownCount{n};
    CVector x = CVector::Zero(devices);
    if (y_norm > 0.0)
    {
        CVector z = y;
        for (std::size_t t = 0; t < options.max_iterations; ++t)
        {
            const double tau = options.alpha * z.norm() / std::sqrt(length);
            const CVector u = x + a.adjoint() * z;
            double divergence = 0.0;
            for (Eigen::Index i = 0; i < devices; ++i)
            {
                const double mag = std::abs(u(i));
                if (mag > tau)
                {
                    x(i) = u(i) * ((mag - tau) / mag);
                    // Half the trace of the 2x2 Jacobian of the complex soft threshold.
                    divergence += 1.0 - tau / (2.0 * mag);
                }
                else
                {
                    x(i) = 0.0;
                }
            }
            divergence /= static_cast<double>(devices);

            const CVector z_next = y - a * x + undersampling * divergence * z;
            const double z_next_norm = z_next.norm();
            if (!std::isfinite(z_next_norm) || z_next_norm > options.divergence_factor * y_norm)
            {
                out.fallback = true;
                break;
            }
            const double change = (z_next - z).norm();
            const double scale = z.norm();
            z = z_next;
            if (change <= options.tolerance * scale)
                break;
        }
    }

    out.scores = out.fallback ? RVector((a.adjoint() * y).cwiseAbs()) : RVector(x.cwiseAbs());
    out.support = top_n(out.scores, n);
    return out;
}

DetectionResult detect_oracle(const SpreadingMatrix &codebook, const CVector &y, std::size_t n,
                              std::uint64_t max_supports)
{
    check_request(codebook, y, n);
    const std::size_t devices = codebook.devices();
    const std::uint64_t total = binomial(devices, n);
    if (total > max_supports)
        throw TooExpensive("oracle search over " + std::to_string(total) + " supports exceeds the cap of " +
                           std::to_string(max_supports));

    const CMatrix &phi = codebook.columns();
    const CMatrix gram = phi.adjoint() * phi;
    const CVector proj = phi.adjoint() * y;
    const double energy = y.squaredNorm();
    const bool wide = n > codebook.code_length();

    // Residual 0.5 (|y|^2 - b_S^H G_S^{-1} b_S) via a Cholesky solve on the
    // support's Gram block; falls back to a rank-revealing solve.
    const auto residual_of = [&](const Support &s) {
        if (!wide)
        {
            const auto k = static_cast<Eigen::Index>(s.size());
            CMatrix g(k, k);
            CVector b(k);
            for (Eigen::Index i = 0; i < k; ++i)
            {
                b(i) = proj(static_cast<Eigen::Index>(s[static_cast<std::size_t>(i)]));
                for (Eigen::Index j = 0; j < k; ++j)
                    g(i, j) = gram(static_cast<Eigen::Index>(s[static_cast<std::size_t>(i)]),
                                   static_cast<Eigen::Index>(s[static_cast<std::size_t>(j)]));
            }
            Eigen::LLT<CMatrix> llt(g);
            if (llt.info() == Eigen::Success)
            {
                const CVector coef = llt.solve(b);
                if (coef.allFinite())
                    return 0.5 * std::max(0.0, energy - b.dot(coef).real());
            }
        }
        return support_residual(phi, y, s);
    };

    Support current(n);
    std::iota(current.begin(), current.end(), std::size_t{0});
    Support best = current;
    double best_residual = residual_of(current);
    for (;;)
    {
        // Next combination in lexicographic order.
        std::size_t i = n;
        while (i > 0 && current[i - 1] == devices - n + (i - 1))
            --i;
        if (i == 0)
            break;
        ++current[i - 1];
        for (std::size_t j = i; j < n; ++j)
            current[j] = current[j - 1] + 1;

        const double r = residual_of(current);
        if (r < best_residual)
        {
            best_residual = r;
            best = current;
        }
    }

    DetectionResult out;
    out.mode = KnownCount{n};
    out.scores = RVector::Zero(static_cast<Eigen::Index>(devices));
    for (std::size_t i : best)
        out.scores(static_cast<Eigen::Index>(i)) = 1.0;
    out.support = best;
    return out;
}

DetectionResult detect_dnn(const nn::Mlp &model, const SpreadingMatrix &codebook, const CVector &y,
                           const DetectionMode &mode)
{
    if (model.info.codebook_hash != codebook_hash(codebook))
        throw ModelMismatch("model was trained on a different codebook");
    if (model.architecture().inputs != 2 * codebook.code_length() ||
        model.architecture().outputs != codebook.devices())
        throw ModelMismatch("model shape does not match the codebook");
    if (static_cast<std::size_t>(y.size()) != codebook.code_length())
        throw ShapeError("received vector length does not match the code length");

    DetectionResult out;
    out.mode = mode;
    out.scores = model.predict(stack_real(y).cast<float>().cast<double>().transpose()).row(0).transpose();
    out.support = select_support(out.scores, mode);
    return out;
}

bool Detector::supports(const DetectionMode &mode) const
{
    return std::holds_alternative<KnownCount>(mode);
}

std::vector<DetectionResult> Detector::detect_batch(std::span<const CVector> ys, const DetectionMode &mode) const
{
    std::vector<DetectionResult> out;
    out.reserve(ys.size());
    for (const CVector &y : ys)
        out.push_back(detect(y, mode));
    return out;
}

LsBompDetector::LsBompDetector(SpreadingMatrix codebook) : codebook_(std::move(codebook)) {}

DetectionResult LsBompDetector::detect(const CVector &y, const DetectionMode &mode) const
{
    return detect_ls_bomp(codebook_, y, known_count(mode, name()));
}

CampDetector::CampDetector(SpreadingMatrix codebook, CampOptions options)
    : codebook_(std::move(codebook)), options_(options)
{
}

DetectionResult CampDetector::detect(const CVector &y, const DetectionMode &mode) const
{
    return detect_camp(codebook_, y, known_count(mode, name()), options_);
}

OracleDetector::OracleDetector(SpreadingMatrix codebook, std::uint64_t max_supports)
    : codebook_(std::move(codebook)), max_supports_(max_supports)
{
}

DetectionResult OracleDetector::detect(const CVector &y, const DetectionMode &mode) const
{
    return detect_oracle(codebook_, y, known_count(mode, name()), max_supports_);
}

DnnDetector::DnnDetector(std::shared_ptr<const nn::Mlp> model, const SpreadingMatrix &codebook)
    : model_(std::move(model)), code_length_(codebook.code_length())
{
    if (!model_)
        throw ConfigError("DNN detector needs a model");
    if (model_->info.codebook_hash != codebook_hash(codebook))
        throw ModelMismatch("model was trained on a different codebook");
    if (model_->architecture().inputs != 2 * codebook.code_length() ||
        model_->architecture().outputs != codebook.devices())
        throw ModelMismatch("model shape does not match the codebook");
}

DetectionResult DnnDetector::detect(const CVector &y, const DetectionMode &mode) const
{
    const CVector *first = &y;
    return detect_batch(std::span<const CVector>(first, 1), mode).front();
}

std::vector<DetectionResult> DnnDetector::detect_batch(std::span<const CVector> ys, const DetectionMode &mode) const
{
    constexpr std::size_t chunk = 8192;
    const auto l = static_cast<Eigen::Index>(code_length_);
    std::vector<DetectionResult> out;
    out.reserve(ys.size());
    for (std::size_t lo = 0; lo < ys.size(); lo += chunk)
    {
        const std::size_t hi = std::min(ys.size(), lo + chunk);
        RMatrix batch(static_cast<Eigen::Index>(hi - lo), 2 * l);
        for (std::size_t k = lo; k < hi; ++k)
        {
            if (ys[k].size() != l)
                throw ShapeError("received vector length does not match the code length");
            // Rounded through float like the stored training inputs.
            batch.row(static_cast<Eigen::Index>(k - lo)) = stack_real(ys[k]).cast<float>().cast<double>().transpose();
        }
        const RMatrix probs = model_->predict(batch);
        for (Eigen::Index r = 0; r < probs.rows(); ++r)
        {
            DetectionResult res;
            res.mode = mode;
            res.scores = probs.row(r).transpose();
            res.support = select_support(res.scores, mode);
            out.push_back(std::move(res));
        }
    }
    return out;
}

} // namespace musa
