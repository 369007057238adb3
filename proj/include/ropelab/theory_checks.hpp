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
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ropelab/attention.hpp"

namespace ropelab {

struct CheckVerdict {
    std::string name;
    bool passed = false;
    double statistic = 0.0;
    double threshold = 0.0;
    std::string detail;
    std::uint64_t seed = 0;
};

/// {name, passed, statistic, threshold, detail, seed} on one line.
std::string to_json_line(const CheckVerdict &v);

enum class GaussianPairing { Independent, Identical };

struct SampleSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
    std::int64_t n = 0;
};

/// Mean and stddev of q^T R^r k over n_samples Gaussian pairs. Samples come in
/// blocks of kTrialsPerStream, block b drawing from stream b of `seed`.
SampleSummary gaussian_expectation_summary(int head_dim, std::int64_t r, std::int64_t n_samples, std::uint64_t seed,
                                           double theta = 10000.0,
                                           GaussianPairing pairing = GaussianPairing::Independent);

/// Weighted least-squares slope of means against distances with standard error
/// sqrt(sum (r - rbar)^2 s_r^2 / n_r) / sum (r - rbar)^2. Passes iff
/// |slope| <= 4 SE.
CheckVerdict slope_check(std::span<const std::int64_t> distances, std::span<const SampleSummary> points,
                         std::uint64_t seed = 0);

/// Sample mean of q^T R^r k over IID standard Gaussian q, k (or q = k for the
/// Identical control). Passes iff |mean| <= 4 * s / sqrt(n).
CheckVerdict gaussian_expectation_check(int head_dim, std::int64_t r, std::int64_t n_samples, std::uint64_t seed,
                                        double theta = 10000.0,
                                        GaussianPairing pairing = GaussianPairing::Independent);

/// Sequence [BOS, x, x] under NoPE: both alpha_{3,3} and alpha_{3,2} stay
/// below 1/2 for every random embedding draw, and the repeated key gives
/// alpha_{3,2} == alpha_{3,3} exactly.
CheckVerdict nope_counterexample_check(std::uint64_t seed = 0, int draws = 100, int head_dim = 8);

/// alpha_{3,3} of [BOS, x, x] when every logit is equal (exactly 1/3).
double nope_equal_logit_alpha();

/// alpha_{3,3} of the RoPE diagonal construction on three tokens (d = 2,
/// g = 1). Contrast for the NoPE counterexample.
double rope_diagonal_contrast_alpha(double psi_norm_sq);

/// One or two key transpositions that push a single-frequency head off its
/// target. Swap indices are token indices in [1, N]; index 0 (BOS) is never
/// moved.
struct SwapPlan {
    std::vector<std::pair<std::int64_t, std::int64_t>> swaps;
    std::int64_t target_index_after = 0;
    double predicted_alpha_target = 0.0;
};

/// Search for the rearrangement. Requires head_dim == 2 and that key
/// `target` holds the unique maximal logit of query row `query_index`.
/// Candidate destinations are scanned nearest-first from the target.
/// Throws PreconditionViolated, or NotFoundError when no window position
/// exists in [1, query_index].
SwapPlan find_swap_attack(const HeadSequence &seq, double angle, std::int64_t query_index, std::int64_t target);

/// Copy of `seq` with keys (and labels) transposed as the plan says; queries
/// stay in place.
HeadSequence apply_swap_plan(const HeadSequence &seq, const SwapPlan &plan);

/// Heuristic sequence length for the swap search at angle g.
std::int64_t swap_required_length(double angle);

/// Single-frequency head (d = 2, positions 0..n-1) with standard Gaussian
/// queries and keys and a zero BOS key.
HeadSequence random_swap_instance(std::int64_t n, std::uint64_t seed);

/// Runs the swap search on `instances` random sequences, targeting the row
/// argmax of the last query, and re-scores every plan through the attention
/// pipeline. Passes iff every plan exists, has at most two transpositions
/// and leaves the target with attention <= 1/2.
CheckVerdict swap_attack_check(double angle, std::int64_t n, int instances, std::uint64_t seed);

/// Histograms {n g mod 2 pi : 1 <= n <= N} into `bins` equal arcs; passes iff
/// every arc is hit. The detail names the recommended N = ceil(8 bins / g) and
/// any exact cycle n g = 0 mod 2 pi found within N.
CheckVerdict density_cover_check(double angle, std::int64_t n, int bins);

namespace reference {

CheckVerdict gaussian_expectation_check(int head_dim, std::int64_t r, std::int64_t n_samples, std::uint64_t seed,
                                        double theta = 10000.0,
                                        GaussianPairing pairing = GaussianPairing::Independent);

}  // namespace reference

}  // namespace ropelab
