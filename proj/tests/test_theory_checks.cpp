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
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ropelab/errors.hpp"
#include "ropelab/parallel.hpp"
#include "ropelab/theory_checks.hpp"

namespace ropelab {
namespace {

class ThreadGuard {
public:
    ~ThreadGuard() { set_num_threads(0); }
};

TEST(GaussianExpectation, ZeroMeanAtEveryDistance) {
    EXPECT_TRUE(gaussian_expectation_check(2, 0, 100000, 1).passed);
    for (std::int64_t r : {1, 100, 10000}) {
        const CheckVerdict v = gaussian_expectation_check(2, r, 100000, 1);
        EXPECT_TRUE(v.passed) << v.detail;
        EXPECT_EQ(v.name, "gaussian_expectation");
        EXPECT_EQ(v.passed, v.statistic <= v.threshold);
    }
}

TEST(GaussianExpectation, IdenticalPairsFailWithMeanNearD) {
    for (int d : {2, 16}) {
        const SampleSummary s = gaussian_expectation_summary(d, 0, 20000, 3, 10000.0, GaussianPairing::Identical);
        EXPECT_NEAR(s.mean / d, 1.0, 0.05);
        EXPECT_FALSE(gaussian_expectation_check(d, 0, 20000, 3, 10000.0, GaussianPairing::Identical).passed);
    }
}

TEST(GaussianExpectation, ParallelMatchesReferenceBitwise) {
    ThreadGuard guard;
    const CheckVerdict ref = reference::gaussian_expectation_check(8, 17, 5000, 4);
    for (int threads : {1, 2, 4, 8}) {
        set_num_threads(threads);
        const CheckVerdict v = gaussian_expectation_check(8, 17, 5000, 4);
        EXPECT_EQ(v.statistic, ref.statistic);
        EXPECT_EQ(v.threshold, ref.threshold);
        EXPECT_EQ(v.detail, ref.detail);
    }
}

TEST(GaussianExpectation, StandardErrorHalvesWhenSamplesQuadruple) {
    double ratio = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SampleSummary a = gaussian_expectation_summary(4, 5, 2000, seed);
        const SampleSummary b = gaussian_expectation_summary(4, 5, 8000, seed + 1000);
        ratio += (a.stddev / std::sqrt(2000.0)) / (b.stddev / std::sqrt(8000.0));
    }
    EXPECT_NEAR(ratio / 20.0, 2.0, 0.6);
}

TEST(GaussianExpectation, RejectsTooFewSamples) { EXPECT_THROW(gaussian_expectation_check(2, 0, 999, 0), Error); }

TEST(SlopeCheck, FlatPointsPassAndTrendFails) {
    const std::vector<std::int64_t> r{0, 1, 100, 10000};
    const std::vector<SampleSummary> flat{{0.01, 1.0, 1000}, {-0.02, 1.0, 1000}, {0.0, 1.0, 1000}, {0.01, 1.0, 1000}};
    EXPECT_TRUE(slope_check(r, flat).passed);
    const std::vector<SampleSummary> trend{{0.0, 1.0, 1000}, {0.0, 1.0, 1000}, {0.1, 1.0, 1000}, {10.0, 1.0, 1000}};
    EXPECT_FALSE(slope_check(r, trend).passed);
    // Exact slope of a line through the means.
    const std::vector<std::int64_t> r2{0, 2};
    const std::vector<SampleSummary> line{{1.0, 1.0, 100}, {2.0, 1.0, 100}};
    EXPECT_NEAR(slope_check(r2, line).statistic, 0.5, 1e-15);
}

TEST(NoPE, CounterexampleHolds) {
    const CheckVerdict v = nope_counterexample_check();
    EXPECT_TRUE(v.passed) << v.detail;
    EXPECT_LT(v.statistic, 0.5);
    EXPECT_NE(v.detail.find("alpha32 == alpha33 on every draw"), std::string::npos);
}

TEST(NoPE, EqualLogitsGiveOneThird) { EXPECT_NEAR(nope_equal_logit_alpha(), 1.0 / 3.0, 1e-12); }

TEST(NoPE, RoPEDiagonalContrastExceedsHalf) { EXPECT_GT(rope_diagonal_contrast_alpha(10.0), 0.5); }

TEST(Verdict, SerializesAsOneJsonObject) {
    const CheckVerdict v{"x", true, 1.5, 2.0, "d", 7};
    const auto j = nlohmann::json::parse(to_json_line(v));
    EXPECT_EQ(j["name"], "x");
    EXPECT_EQ(j["passed"], true);
    EXPECT_EQ(j["statistic"], 1.5);
    EXPECT_EQ(j["threshold"], 2.0);
    EXPECT_EQ(j["detail"], "d");
    EXPECT_EQ(j["seed"], 7);
    EXPECT_EQ(to_json_line(v).find('\n'), std::string::npos);
}

// Single-frequency head at g = 1 with query [1, 0] at position 5 and keys
// placed at angle phi[j] (norm norms[j]).
HeadSequence planted(const std::vector<double> &phi, const std::vector<double> &norms) {
    HeadSequence seq = HeadSequence::zeros(6, 2);
    for (std::int64_t t = 0; t < 6; ++t) {
        seq.query(t)[0] = 1.0;
        seq.key(t)[0] = norms[static_cast<std::size_t>(t)] * std::cos(phi[static_cast<std::size_t>(t)]);
        seq.key(t)[1] = norms[static_cast<std::size_t>(t)] * std::sin(phi[static_cast<std::size_t>(t)]);
    }
    return seq;
}

double alpha_after(const HeadSequence &seq, const SwapPlan &plan, std::int64_t query) {
    const FrequencySchedule s = make_schedule(10000.0, 2);
    const AttentionMatrix att = attention(activations(apply_swap_plan(seq, plan), EncodingKind::rope(), s));
    return att.at(query, plan.target_index_after);
}

// Logit of key j at slot j is 10 cos(phi_j + (j - 5)); phi = pi - (j - 5) gives -10.
std::vector<double> negative_background() {
    std::vector<double> phi(6);
    for (int j = 0; j < 6; ++j) phi[static_cast<std::size_t>(j)] = std::numbers::pi - (j - 5);
    return phi;
}

TEST(SwapAttack, NegativeTargetNeedsOneSwap) {
    auto phi = negative_background();
    phi[5] = std::numbers::pi;  // target logit -0.1, still the largest
    const HeadSequence seq = planted(phi, {10, 10, 10, 10, 10, 0.1});
    const SwapPlan plan = find_swap_attack(seq, 1.0, 5, 5);
    EXPECT_EQ(plan.swaps.size(), 1U);
    EXPECT_LE(alpha_after(seq, plan, 5), 0.5 + 1e-12);
    EXPECT_NEAR(plan.predicted_alpha_target, alpha_after(seq, plan, 5), 1e-12);
}

TEST(SwapAttack, PositiveTargetThatStaysMaximalNeedsTwoSwaps) {
    auto phi = negative_background();
    phi[5] = 0.0;  // target logit +1
    phi[3] = 4.1;  // negative both at slot 3 and when displaced to slot 5
    const HeadSequence seq = planted(phi, {10, 10, 10, 10, 10, 1});
    const SwapPlan plan = find_swap_attack(seq, 1.0, 5, 5);
    ASSERT_EQ(plan.swaps.size(), 2U);
    EXPECT_EQ(plan.swaps[0], (std::pair<std::int64_t, std::int64_t>{3, 5}));
    EXPECT_EQ(plan.target_index_after, 3);
    EXPECT_LE(alpha_after(seq, plan, 5), 0.5 + 1e-12);
}

TEST(SwapAttack, RandomUnitKeysLoseFocus) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const FrequencySchedule s = make_schedule(10000.0, 2);
    int runs = 0;
    for (int t = 0; t < 100; ++t) {
        HeadSequence seq = HeadSequence::zeros(50, 2);
        for (std::int64_t i = 0; i < 50; ++i) {
            const double a = angle(gen);
            const double b = angle(gen);
            seq.query(i)[0] = std::cos(a);
            seq.query(i)[1] = std::sin(a);
            seq.key(i)[0] = std::cos(b);
            seq.key(i)[1] = std::sin(b);
        }
        const RowArgmax top = argmax_row(activations(seq, EncodingKind::rope(), s), 49);
        if (top.index == 0 || top.tied) continue;
        const SwapPlan plan = find_swap_attack(seq, 1.0, 49, top.index);
        EXPECT_LE(plan.swaps.size(), 2U);
        for (const auto &[a, b] : plan.swaps) {
            EXPECT_GE(a, 1);
            EXPECT_GE(b, 1);
            EXPECT_NE(a, b);
        }
        EXPECT_LE(alpha_after(seq, plan, 49), 0.5 + 1e-12);
        ++runs;
    }
    EXPECT_GT(runs, 90);
}

TEST(SwapAttack, BatchCheckSucceedsEverywhere) {
    const CheckVerdict v = swap_attack_check(1.0, 200, 200, 0);
    EXPECT_TRUE(v.passed) << v.detail;
    EXPECT_EQ(v.statistic, 200.0);
}

TEST(SwapAttack, SlowRotationReportsRequiredLength) {
    const HeadSequence seq = planted({0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 2});
    try {
        find_swap_attack(seq, 1e-3, 5, 5);
        FAIL();
    } catch (const NotFoundError &e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
        EXPECT_EQ(e.required_length(), swap_required_length(1e-3));
        EXPECT_GE(e.required_length(), static_cast<long long>(2.0 * std::numbers::pi / 1e-3));
    }
}

TEST(SwapAttack, Preconditions) {
    const HeadSequence seq = planted({0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 2});
    EXPECT_THROW(find_swap_attack(seq, 1.0, 5, 4), Error);  // not the maximum
    EXPECT_THROW(find_swap_attack(seq, 1.0, 5, 0), Error);  // BOS is never moved
    HeadSequence wide = HeadSequence::zeros(4, 4);
    EXPECT_THROW(find_swap_attack(wide, 1.0, 3, 1), Error);
}

TEST(Density, UnitAngleCoversAllArcs) {
    const CheckVerdict v = density_cover_check(1.0, 100, 8);
    EXPECT_TRUE(v.passed) << v.detail;
}

TEST(Density, SlowAngleReportsInsufficientLength) {
    const CheckVerdict v = density_cover_check(0.0002, 1000, 8);
    EXPECT_FALSE(v.passed);
    EXPECT_NE(v.detail.find("insufficient N"), std::string::npos) << v.detail;
}

TEST(Density, RationalAngleReportsCycle) {
    const CheckVerdict v = density_cover_check(2.0 * std::numbers::pi / 4.0, 10000, 8);
    EXPECT_FALSE(v.passed);
    // Four residues on arc boundaries; rounding may spread each over two arcs.
    EXPECT_LT(v.statistic, 8.0);
    EXPECT_NE(v.detail.find("rational cycle: 4*g"), std::string::npos) << v.detail;
}

TEST(Density, RecommendedLengthSuffices) {
    for (double g : {1.0, 0.37, 0.05}) {
        const auto n = static_cast<std::int64_t>(std::ceil(8.0 * 16 / g));
        EXPECT_TRUE(density_cover_check(g, n, 16).passed) << g;
    }
}

}  // namespace
}  // namespace ropelab
