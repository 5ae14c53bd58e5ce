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

#include "generators.hpp"

#include "musa/codebook.hpp"
#include "musa/errors.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace musa;
using musa::test::musa_codebook;

namespace
{

// Independent RIC oracle: eigenvalues of each subset's Gram matrix.
double ric_by_gram(const CMatrix &columns, std::size_t s)
{
    CMatrix unit = columns;
    for (Eigen::Index j = 0; j < unit.cols(); ++j)
        unit.col(j).normalize();
    const auto n = static_cast<std::size_t>(unit.cols());
    double worst = 0.0;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(s), true);
    do
    {
        CMatrix sub(unit.rows(), static_cast<Eigen::Index>(s));
        Eigen::Index k = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (pick[i])
                sub.col(k++) = unit.col(static_cast<Eigen::Index>(i));
        const Eigen::SelfAdjointEigenSolver<CMatrix> eig(sub.adjoint() * sub);
        const double lo = std::max(0.0, eig.eigenvalues().minCoeff());
        worst = std::max({worst, eig.eigenvalues().maxCoeff() - 1.0, 1.0 - lo});
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return worst;
}

double max_pair_correlation(const CMatrix &c)
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < c.cols(); ++i)
        for (Eigen::Index j = i + 1; j < c.cols(); ++j)
            worst = std::max(worst, std::abs(c.col(i).dot(c.col(j))) / (c.col(i).norm() * c.col(j).norm()));
    return worst;
}

} // namespace

TEST(ElementSet, ThreeAryHasNineGridPoints)
{
    const ComplexElementSet set(3);
    ASSERT_EQ(set.size(), 9u);
    std::set<std::pair<int, int>> points;
    for (cdouble e : set.elements())
        points.emplace(static_cast<int>(e.real()), static_cast<int>(e.imag()));
    for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
            EXPECT_TRUE(points.count({a, b}));
    EXPECT_EQ(set.elements()[set.zero_index()], cdouble(0.0, 0.0));
}

TEST(ElementSet, FiveAryIsClosedUnderNegationAndConjugation)
{
    const ComplexElementSet set(5);
    ASSERT_EQ(set.size(), 25u);
    const auto contains = [&](cdouble z) {
        return std::find(set.elements().begin(), set.elements().end(), z) != set.elements().end();
    };
    for (cdouble e : set.elements())
    {
        EXPECT_TRUE(contains(-e));
        EXPECT_TRUE(contains(std::conj(e)));
        EXPECT_LE(std::abs(e.real()), 2.0);
        EXPECT_LE(std::abs(e.imag()), 2.0);
    }
}

TEST(ElementSet, RejectsOtherOrders)
{
    EXPECT_THROW(ComplexElementSet(4), ConfigError);
    EXPECT_THROW(ComplexElementSet(7), ConfigError);
}

TEST(SequenceSpace, CountsMatchExamples)
{
    EXPECT_EQ(SequenceSpace(ComplexElementSet(3), 4).size(), 6560u);
    EXPECT_EQ(SequenceSpace(ComplexElementSet(3), 1).size(), 8u);
    EXPECT_EQ(SequenceSpace(ComplexElementSet(5), 2).size(), 624u);
}

TEST(SequenceSpace, EnumerationIsExhaustiveAndNonzero)
{
    // Property over (M, L): every vector appears once, the zero vector never.
    for (int m : {3, 5})
        for (std::size_t l = 1; l <= (m == 3 ? 4u : 3u); ++l)
        {
            const SequenceSpace space(ComplexElementSet(m), l);
            std::set<std::vector<std::pair<double, double>>> seen;
            std::uint64_t count = 0;
            for (const CVector &v : space)
            {
                ASSERT_EQ(v.size(), static_cast<Eigen::Index>(l));
                ASSERT_GT(v.squaredNorm(), 0.0);
                std::vector<std::pair<double, double>> key;
                for (Eigen::Index i = 0; i < v.size(); ++i)
                    key.emplace_back(v(i).real(), v(i).imag());
                seen.insert(key);
                ++count;
            }
            std::uint64_t expected = 1;
            for (std::size_t i = 0; i < l; ++i)
                expected *= static_cast<std::uint64_t>(m * m);
            EXPECT_EQ(count, expected - 1) << "M=" << m << " L=" << l;
            EXPECT_EQ(seen.size(), count);
        }
}

TEST(SequenceSpace, RejectsOverflowingLength)
{
    EXPECT_THROW(SequenceSpace(ComplexElementSet(3), 40), ConfigError);
    EXPECT_THROW(SequenceSpace(ComplexElementSet(3), 0), ConfigError);
}

TEST(Selection, EightColumnsRespectThreshold)
{
    const SpreadingMatrix cb = musa_codebook(8, 42);
    ASSERT_EQ(cb.code_length(), 4u);
    ASSERT_EQ(cb.devices(), 8u);
    EXPECT_LE(max_pair_correlation(cb.columns()), 0.75 + 1e-12);
    EXPECT_DOUBLE_EQ(cb.or_percent(), 200.0);
}

TEST(Selection, PairBoundHoldsForManySeeds)
{
    const SequenceSpace space(ComplexElementSet(3), 4);
    for (std::uint64_t seed = 0; seed < 30; ++seed)
        for (std::size_t n : {8u, 12u, 16u})
        {
            const SpreadingMatrix cb = select_low_correlation(space, n, 0.75, seed);
            EXPECT_LE(max_pair_correlation(cb.columns()), 0.75 + 1e-9) << "seed " << seed;
            for (Eigen::Index j = 0; j < cb.columns().cols(); ++j)
                EXPECT_GT(cb.columns().col(j).norm(), 0.0);
        }
}

TEST(Selection, SingleColumnAlwaysSucceeds)
{
    const SpreadingMatrix cb = select_low_correlation(SequenceSpace(ComplexElementSet(3), 4), 1, 0.01, 9);
    EXPECT_EQ(cb.devices(), 1u);
}

TEST(Selection, OrthogonalPoolIsTakenWhole)
{
    const CMatrix pool = CMatrix::Identity(5, 5);
    const SpreadingMatrix cb = select_low_correlation(pool, 5, 0.01, 3);
    EXPECT_EQ(cb.devices(), 5u);
    EXPECT_EQ(max_pair_correlation(cb.columns()), 0.0);
}

TEST(Selection, SeedDeterminism)
{
    EXPECT_EQ(musa_codebook(12, 5), musa_codebook(12, 5));
    EXPECT_FALSE(musa_codebook(12, 5) == musa_codebook(12, 6));
}

TEST(Selection, InfeasibleThresholdReportsProgress)
{
    try
    {
        select_low_correlation(SequenceSpace(ComplexElementSet(3), 4), 16, 0.05, 1);
        FAIL() << "expected InfeasibleThreshold";
    }
    catch (const InfeasibleThreshold &e)
    {
        EXPECT_EQ(e.needed(), 16u);
        EXPECT_LT(e.found(), 16u);
        EXPECT_GE(e.found(), 1u);
    }
}

TEST(Selection, RejectsBadArguments)
{
    const SequenceSpace space(ComplexElementSet(3), 4);
    EXPECT_THROW(select_low_correlation(space, 0, 0.75, 1), ConfigError);
    EXPECT_THROW(select_low_correlation(space, 4, 0.0, 1), ConfigError);
    EXPECT_THROW(select_low_correlation(space, 4, 1.5, 1), ConfigError);
}

TEST(Coherence, Examples)
{
    EXPECT_EQ(mutual_coherence(CMatrix(CMatrix::Identity(4, 4))), 0.0);
    CMatrix dup(3, 3);
    dup << 1, 2, 0, cdouble(0, 1), cdouble(0, 2), 1, 0, 0, 0;
    EXPECT_NEAR(mutual_coherence(dup), 1.0, 1e-15);
    const SpreadingMatrix cb = musa_codebook(8, 11);
    EXPECT_NEAR(mutual_coherence(cb), max_pair_correlation(cb.columns()), 1e-14);
    EXPECT_LE(mutual_coherence(cb), 0.75 + 1e-12);
}

TEST(Coherence, InvariantUnderUnitPhaseRotations)
{
    Rng rng = make_stream(77);
    for (int trial = 0; trial < 50; ++trial)
    {
        CMatrix c = musa::test::random_complex(rng, 4, 6);
        const double before = mutual_coherence(c);
        for (Eigen::Index j = 0; j < c.cols(); ++j)
            c.col(j) *= std::polar(1.0, 6.283185307179586 * uniform01(rng));
        EXPECT_NEAR(mutual_coherence(c), before, 1e-12);
    }
}

TEST(Combinatorics, BinomialAndUnranking)
{
    EXPECT_EQ(binomial(8, 3), 56u);
    EXPECT_EQ(binomial(16, 4), 1820u);
    EXPECT_EQ(binomial(5, 7), 0u);
    EXPECT_EQ(binomial(200, 100), std::numeric_limits<std::uint64_t>::max());

    // Unranking walks the subsets in lexicographic order.
    Support previous;
    for (std::uint64_t r = 0; r < binomial(7, 3); ++r)
    {
        const Support s = unrank_combination(7, 3, r);
        ASSERT_EQ(s.size(), 3u);
        ASSERT_TRUE(std::is_sorted(s.begin(), s.end()));
        if (r > 0)
            EXPECT_TRUE(std::lexicographical_compare(previous.begin(), previous.end(), s.begin(), s.end()));
        previous = s;
    }
    EXPECT_EQ(unrank_combination(7, 3, 0), (Support{0, 1, 2}));
    EXPECT_EQ(unrank_combination(7, 3, 34), (Support{4, 5, 6}));
}

TEST(Ric, Examples)
{
    const CMatrix eye = CMatrix::Identity(4, 4);
    for (std::size_t s = 1; s <= 4; ++s)
        EXPECT_NEAR(estimate_ric(eye, s), 0.0, 1e-12);

    CMatrix dup(2, 2);
    dup << 1, 1, 0, 0;
    EXPECT_NEAR(estimate_ric(dup, 2), 1.0, 1e-12);

    const SpreadingMatrix cb = musa_codebook(8, 21);
    const double delta2 = estimate_ric(cb, 2);
    EXPECT_GT(delta2, 0.0);
    EXPECT_LT(delta2, 1.0);
    EXPECT_NEAR(delta2, ric_by_gram(cb.columns(), 2), 1e-10);
    // For pairs the Gram eigenvalues are 1 +- |<c_i, c_j>|.
    EXPECT_NEAR(delta2, mutual_coherence(cb), 1e-10);
}

TEST(Ric, MatchesGramOracleAndIsMonotone)
{
    for (std::uint64_t seed : {1u, 2u, 3u})
    {
        const SpreadingMatrix cb = musa_codebook(8, seed);
        double previous = 0.0;
        for (std::size_t s = 1; s <= 6; ++s)
        {
            const double value = estimate_ric(cb, s);
            EXPECT_NEAR(value, ric_by_gram(cb.columns(), s), 1e-9) << "s=" << s;
            EXPECT_GE(value, previous - 1e-12);
            previous = value;
        }
    }
}

TEST(Ric, RefusesAboveCap)
{
    const SpreadingMatrix cb = musa_codebook(16, 1);
    EXPECT_THROW(estimate_ric(cb, 8, 1000), TooExpensive);
    EXPECT_NO_THROW(estimate_ric(cb, 2, 1000));
}

TEST(Diagnostics, CollectsCoherenceAndRic)
{
    const SpreadingMatrix cb = musa_codebook(8, 4);
    const CodebookDiagnostics d = diagnose(cb, 3);
    EXPECT_DOUBLE_EQ(d.mutual_coherence, mutual_coherence(cb));
    ASSERT_EQ(d.ric_by_sparsity.size(), 3u);
    EXPECT_LE(d.ric_by_sparsity.at(1), d.ric_by_sparsity.at(2));
    EXPECT_LE(d.ric_by_sparsity.at(2), d.ric_by_sparsity.at(3));
}

TEST(CodebookIo, TextRoundTripIsExact)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed)
    {
        const SpreadingMatrix cb = musa_codebook(12, seed);
        const std::string text = codebook_to_text(cb);
        const SpreadingMatrix back = codebook_from_text(text);
        EXPECT_EQ(back, cb);
        EXPECT_EQ(codebook_to_text(back), text);
        EXPECT_EQ(codebook_hash(back), codebook_hash(cb));
    }
    Rng rng = make_stream(5);
    const SpreadingMatrix irrational(musa::test::random_complex(rng, 3, 5), 0.5, 8);
    EXPECT_EQ(codebook_from_text(codebook_to_text(irrational)), irrational);
}

TEST(CodebookIo, HeaderAndMalformedInput)
{
    const SpreadingMatrix cb = musa_codebook(8, 3);
    std::istringstream in(codebook_to_text(cb));
    std::string l, n, rho, seed;
    in >> l >> n >> rho >> seed;
    EXPECT_EQ(l, "4");
    EXPECT_EQ(n, "8");
    EXPECT_EQ(rho, "0.75");
    EXPECT_EQ(seed, "3");
    EXPECT_THROW(codebook_from_text("4 2 0.75 1\n1,0 0,0\n"), FormatError);
    EXPECT_THROW(codebook_from_text(""), FormatError);
}

TEST(SpreadingMatrixType, RejectsInvalidColumns)
{
    CMatrix zero_col = CMatrix::Identity(3, 3);
    zero_col.col(1).setZero();
    EXPECT_THROW(SpreadingMatrix(zero_col, 0.5, 0), ConfigError);
    EXPECT_THROW(SpreadingMatrix(CMatrix(0, 0), 0.5, 0), ConfigError);
    EXPECT_THROW(SpreadingMatrix(CMatrix::Identity(2, 2), 0.0, 0), ConfigError);
}
