// Copyright (c) 2026 The ropelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ============================================================================
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "ropelab/constructions.hpp"
#include "ropelab/errors.hpp"

namespace ropelab {
namespace {

std::vector<double> random_psi(std::mt19937_64 &gen, int d) {
    std::normal_distribution<double> n01;
    std::vector<double> v(static_cast<std::size_t>(d));
    for (double &x : v) x = n01(gen);
    return v;
}

double norm_sq(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

Construction make(ConstructionKind kind, std::vector<double> psi, int d, std::int64_t r = 0) {
    Construction c;
    c.kind = kind;
    c.r = r;
    c.psi = std::move(psi);
    c.sched = make_schedule(10000.0, d);
    return c;
}

AttentionMatrix pipeline(const Construction &c, std::int64_t n) {
    return attention(activations(build(c, n), EncodingKind::rope(), c.sched));
}

TEST(Build, DiagonalActivationsAreCosinesOfDistance) {
    const Construction c = make(ConstructionKind::Diagonal, {1.0, 0.0}, 2);
    const auto a = activations(build(c, 4), EncodingKind::rope(), c.sched);
    for (std::int64_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(a.at(i, i), 1.0, 1e-15);
        for (std::int64_t j = 0; j < i; ++j) EXPECT_NEAR(a.at(i, j), std::cos(static_cast<double>(j - i)), 1e-12);
    }
}

TEST(Build, ArbitraryDistancePeaksAtR) {
    std::mt19937_64 gen(1);
    const Construction c = make(ConstructionKind::ArbitraryDistance, random_psi(gen, 8), 8, 3);
    const auto a = activations(build(c, 10), EncodingKind::rope(), c.sched);
    for (std::int64_t i = 3; i < 10; ++i) {
        const RowArgmax top = argmax_row(a, i);
        EXPECT_EQ(top.index, i - 3);
        EXPECT_FALSE(top.tied);
    }
}

TEST(Build, PreviousTokenLogitEqualsSquaredNorm) {
    std::mt19937_64 gen(2);
    const auto psi = random_psi(gen, 16);
    const Construction c = make(ConstructionKind::PreviousToken, psi, 16);
    const auto a = activations(build(c, 6), EncodingKind::rope(), c.sched);
    for (std::int64_t i = 1; i < 6; ++i) EXPECT_NEAR(a.at(i, i - 1), norm_sq(psi), 1e-9);
}

TEST(Build, ZeroPsiIsDegenerate) {
    const Construction c = make(ConstructionKind::Diagonal, {0.0, 0.0, 0.0, 0.0}, 4);
    try {
        build(c, 3);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateConstruction);
    }
}

TEST(Build, EqualChunkPsiSplitsNormEvenly) {
    const auto psi = equal_chunk_psi(12.0, 8);
    EXPECT_NEAR(norm_sq(psi), 12.0, 1e-12);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(psi[static_cast<std::size_t>(2 * k)] * psi[static_cast<std::size_t>(2 * k)], 3.0, 1e-12);
}

TEST(ClosedForm, TrivialCases) {
    const std::vector<double> g{1.0};
    EXPECT_EQ(diagonal_alpha_closed_form(10.0, g, 0), 1.0);
    for (std::int64_t i : {1, 4, 9}) EXPECT_NEAR(diagonal_alpha_closed_form(0.0, g, i), 1.0 / static_cast<double>(i + 1), 1e-15);
}

TEST(ClosedForm, MatchesHighPrecisionValue) {
    // 1 / (1 + sum_{m=1..7} exp(10 (cos m - 1))) to 40 digits.
    EXPECT_NEAR(diagonal_alpha_closed_form(10.0, std::vector<double>{1.0}, 7), 0.56571598900246020893, 1e-15);
}

TEST(ClosedForm, AgreesWithPipeline) {
    const Construction c2 = make(ConstructionKind::Diagonal, equal_chunk_psi(10.0, 2), 2);
    EXPECT_NEAR(diagonal_alpha_closed_form(10.0, c2.sched.effective_angles(), 7), pipeline(c2, 8).at(7, 7), 1e-9);

    for (int d : {2, 8, 64}) {
        for (double ns : {0.5, 10.0, 80.0}) {
            const Construction c = make(ConstructionKind::Diagonal, equal_chunk_psi(ns, d), d);
            const std::int64_t n = d == 64 ? 512 : 256;
            const AttentionMatrix att = pipeline(c, n);
            const auto angles = c.sched.effective_angles();
            for (std::int64_t i = 0; i < n; i += 17) {
                EXPECT_NEAR(diagonal_alpha_closed_form(ns, angles, i), att.at(i, i), 1e-9) << d << " " << ns << " " << i;
            }
        }
    }
}

TEST(ClosedForm, IncreasesWithNorm) {
    const std::vector<double> g{1.0};
    for (std::int64_t i : {1, 5, 30}) {
        double prev = 0.0;
        for (double ns : {0.1, 1.0, 10.0, 100.0}) {
            const double a = diagonal_alpha_closed_form(ns, g, i);
            EXPECT_GT(a, prev);
            prev = a;
        }
    }
}

TEST(MinNorm, LargeEpsilonNeedsNoNorm) {
    EXPECT_EQ(min_norm_for_epsilon(0.999, 2, std::vector<double>{1.0}), 0.0);
    EXPECT_EQ(min_norm_for_epsilon(0.5, 1, std::vector<double>{1.0}), 0.0);
}

TEST(MinNorm, BisectionIsSelfConsistent) {
    const std::vector<double> g{1.0};
    const double x = min_norm_for_epsilon(0.01, 128, g);
    // Root of alpha_{127,127}(x) = 0.99 to 40 digits.
    EXPECT_NEAR(x / 29325.937995422567, 1.0, 2e-6);
    const double alpha = diagonal_alpha_closed_form(x, g, 127);
    EXPECT_GT(alpha, 0.99);
    EXPECT_LE(alpha, 0.99 + 1e-4);
    for (std::int64_t i = 0; i < 128; ++i) EXPECT_GT(diagonal_alpha_closed_form(x, g, i), 0.99);
}

TEST(MinNorm, MonotoneInEpsilonAndLength) {
    const std::vector<double> g{1.0};
    const std::vector<double> eps{0.3, 0.1, 0.05, 0.01, 0.001};
    for (std::int64_t n : {8, 16, 40}) {
        double prev = 0.0;
        for (double e : eps) {
            const double x = min_norm_for_epsilon(e, n, g);
            EXPECT_GE(x, prev * (1.0 - 1e-6));
            prev = x;
        }
    }
    for (double e : eps) {
        double prev = 0.0;
        for (std::int64_t n : {4, 8, 16, 32, 64}) {
            const double x = min_norm_for_epsilon(e, n, g);
            EXPECT_GE(x, prev * (1.0 - 1e-6));
            prev = x;
        }
    }
}

TEST(MinNorm, RejectsEpsilonOutsideUnitInterval) {
    EXPECT_THROW(min_norm_for_epsilon(0.0, 8, std::vector<double>{1.0}), Error);
    EXPECT_THROW(min_norm_for_epsilon(1.0, 8, std::vector<double>{1.0}), Error);
}

TEST(MinNorm, DiagonalAndPreviousTokenReachTarget) {
    const std::vector<double> g{1.0};
    const double x = min_norm_for_epsilon(0.01, 128, g);
    const AttentionMatrix diag = pipeline(make(ConstructionKind::Diagonal, equal_chunk_psi(x, 2), 2), 128);
    const AttentionMatrix prev = pipeline(make(ConstructionKind::PreviousToken, equal_chunk_psi(x, 2), 2), 128);
    for (std::int64_t i = 0; i < 128; ++i) {
        EXPECT_GT(diag.at(i, i), 0.99);
        EXPECT_NEAR(diag.at(i, i), diagonal_alpha_closed_form(x, g, i), 1e-9);
        if (i > 0) EXPECT_GT(prev.at(i, i - 1), 0.99);
    }
}

TEST(BoundGap, DiagonalSaturatesTheBound) {
    const Construction c = make(ConstructionKind::Diagonal, equal_chunk_psi(5.0, 16), 16);
    const BoundGapReport r = cauchy_schwarz_diag(build(c, 10), c.sched);
    ASSERT_EQ(r.rows.size(), 10U);
    for (const auto &row : r.rows) EXPECT_NEAR(row.diag_ratio, 1.0, 1e-9);
    EXPECT_TRUE(std::isnan(r.rows[0].prev_ratio));
}

TEST(BoundGap, PreviousTokenSaturatesAtOffsetOne) {
    const Construction c = make(ConstructionKind::PreviousToken, equal_chunk_psi(5.0, 16), 16);
    const BoundGapReport r = cauchy_schwarz_diag(build(c, 10), c.sched);
    // With equal chunk norms, the diagonal ratio is the mean of cos(g_k).
    double mean_cos = 0.0;
    for (double g : c.sched.effective_angles()) mean_cos += std::cos(g);
    mean_cos /= 8.0;
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        EXPECT_NEAR(r.rows[i].prev_ratio, 1.0, 1e-9);
        EXPECT_NEAR(r.rows[i].diag_ratio, mean_cos, 1e-9);
    }
}

TEST(BoundGap, RandomVectorsAreNearlyOrthogonal) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> n01;
    HeadSequence seq = HeadSequence::zeros(1000, 256);
    for (double &x : seq.queries) x = n01(gen);
    for (double &x : seq.keys) x = n01(gen);
    const BoundGapReport r = cauchy_schwarz_diag(seq, make_schedule(10000.0, 256));
    int small = 0;
    for (const auto &row : r.rows) {
        small += std::abs(row.diag_ratio) < 0.25 ? 1 : 0;
        EXPECT_LE(std::abs(row.diag_logit), row.upper_bound + 1e-9);
        if (!std::isnan(row.prev_logit)) EXPECT_LE(std::abs(row.prev_logit), row.prev_upper_bound + 1e-9);
    }
    EXPECT_GE(small, 990);
}

TEST(BoundGap, CsvColumns) {
    const Construction c = make(ConstructionKind::Diagonal, {2.0, 0.0}, 2);
    std::ostringstream os;
    write_csv(os, cauchy_schwarz_diag(build(c, 2), c.sched));
    std::istringstream is(os.str());
    std::string header, first;
    std::getline(is, header);
    std::getline(is, first);
    EXPECT_EQ(header, "position,upper_bound,diag_logit,prev_logit,diag_ratio,prev_ratio");
    // 1/sqrt(d) scaling: |psi|^2 / sqrt(2).
    EXPECT_EQ(first, "0,2.82842712474619,2.82842712474619,,1,");
}

Construction apostrophe(int d = 256) {
    Construction c;
    c.kind = ConstructionKind::Apostrophe;
    c.sched = make_schedule(10000.0, d);
    c.psi = apostrophe_default_psi(d);
    return c;
}

TEST(Apostrophe, SemanticChannelReproducesPublishedDotProducts) {
    const Construction c = apostrophe();
    const HeadSequence seq = build(c, 6);
    const CausalMatrix ch = apostrophe_channel_report(seq, 119, c.sched);
    // Query token 1 against itself (not BOS) and against BOS, at distance 0 and 1.
    EXPECT_NEAR(ch.at(1, 1), -85.5, 0.1);
    EXPECT_NEAR(ch.at(1, 1), -85.47, 1e-12);
    // BOS at distance 1 rotates by g_119 only; still within the published tolerance.
    EXPECT_NEAR(ch.at(1, 0), 24.9, 0.1);
}

TEST(Apostrophe, BosContributionAtDistance8000) {
    const Construction c = apostrophe();
    HeadSequence seq = build(c, 3);
    seq.positions = {0, 7999, 8000};
    const double g = c.sched.angle(119);
    EXPECT_GE(8000.0 * g, 1.55);
    EXPECT_LE(8000.0 * g, 1.75);
    const CausalMatrix ch = apostrophe_channel_report(seq, 119, c.sched);
    EXPECT_NEAR(ch.at(2, 2), -85.47, 1e-12);
    // q^T rho(g)^(-8000) k_BOS, evaluated at 40 digits.
    EXPECT_NEAR(ch.at(2, 0), 21.065859605430552886, 1e-9);
    EXPECT_LT(std::abs(ch.at(2, 0)), 24.94);
}

TEST(Apostrophe, TokenAfterApostropheAttendsToIt) {
    Construction c = apostrophe();
    c.apostrophe.apostrophe_tokens = {3};
    const HeadSequence seq = build(c, 8);
    EXPECT_EQ(seq.labels[0], "BOS");
    EXPECT_EQ(seq.labels[3], "'");
    const AttentionMatrix att = attention(activations(seq, EncodingKind::rope(), c.sched));
    for (std::int64_t i = 1; i < 8; ++i) {
        EXPECT_EQ(argmax_row(att, i).index, i == 4 ? 3 : 0) << i;
    }
    // The fast channel pulls the token after the apostrophe onto it.
    const CausalMatrix fast = apostrophe_channel_report(seq, 1, c.sched);
    EXPECT_NEAR(fast.at(4, 3), 121.0, 1e-9);
}

TEST(Apostrophe, RejectsBadFrequencyIndex) {
    const Construction c = apostrophe();
    const HeadSequence seq = build(c, 3);
    EXPECT_THROW(apostrophe_channel_report(seq, 0, c.sched), Error);
    EXPECT_THROW(apostrophe_channel_report(seq, 129, c.sched), Error);
}

}  // namespace
}  // namespace ropelab
