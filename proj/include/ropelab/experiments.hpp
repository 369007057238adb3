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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ropelab/theory_checks.hpp"

namespace ropelab {

struct CurveMetadata {
    std::string experiment;
    std::string encoding;
    double theta = 10000.0;
    int head_dim = 256;
    std::uint64_t seed = 0;
    std::optional<std::int64_t> max_position;  // L, randomized positions only
    std::int64_t n_trials = 1;
};

/// One series per relative distance r = 0..max_r. The query sits r tokens
/// after the key. For deterministic curves stddev is 0 and n is 1.
struct DecayCurve {
    std::vector<std::int64_t> relative_distance;
    std::vector<double> value;
    std::vector<double> stddev;
    std::vector<std::int64_t> n;
    CurveMetadata metadata;

    std::size_t size() const noexcept { return relative_distance.size(); }
    /// Lengths agree, distances are 0..R, metadata named. Throws PreconditionViolated.
    void validate() const;
};

/// All-ones query and key, value = kernel / d so that value(0) = 1.
DecayCurve constant_decay_curve(double theta, int head_dim, std::int64_t max_r);

/// Per r, the mean and sample stddev of kernel / sqrt(d) over n_trials fresh
/// standard Gaussian pairs. Trials of distance r draw from stream r.
DecayCurve gaussian_decay_curve(double theta, int head_dim, std::int64_t max_r, std::int64_t n_trials,
                                std::uint64_t seed, GaussianPairing pairing = GaussianPairing::Independent);

inline constexpr int kRandomRopeResamples = 50;

/// For each L: max_r + 1 positions drawn without replacement from [0, L]
/// and sorted; value(r) is the kernel between the tokens holding order
/// statistics r and 0, averaged over `resamples` draws. The constant variant
/// uses all-ones vectors scaled by 1/d, the Gaussian variant a fresh pair per
/// (draw, r) scaled by 1/sqrt(d). Throws InvalidRange if some L < max_r.
std::vector<DecayCurve> random_rope_decay(double theta, int head_dim, std::int64_t max_r,
                                          std::span<const std::int64_t> l_values, std::uint64_t seed,
                                          int resamples = kRandomRopeResamples);
std::vector<DecayCurve> random_rope_gaussian_decay(double theta, int head_dim, std::int64_t max_r,
                                                   std::span<const std::int64_t> l_values, std::uint64_t seed,
                                                   int resamples = kRandomRopeResamples);

/// One Gaussian query and one Gaussian key (or the same vector twice)
/// repeated at every position; value = kernel / sqrt(d).
DecayCurve constant_gaussian_control(double theta, int head_dim, std::int64_t max_r, std::uint64_t seed,
                                     GaussianPairing pairing = GaussianPairing::Independent);

/// max |value| over r in [R/2, R] divided by max |value| over r in [0, R/2).
double envelope_ratio(const DecayCurve &curve);
inline constexpr double kEnvelopeThreshold = 0.5;

/// Mean |value| over r in [lo, hi] (clamped to the curve).
double mean_abs_value(const DecayCurve &curve, std::int64_t lo, std::int64_t hi);

/// slope_check over the whole curve.
CheckVerdict trend_check(const DecayCurve &curve);

/// |mean(r)| <= 4 stddev(r) / sqrt(n(r)) at each listed r.
CheckVerdict pointwise_zero_mean_check(const DecayCurve &curve, std::span<const std::int64_t> distances);

/// Fraction of seeds seed..seed+count-1 whose constant Gaussian control curve
/// has envelope_ratio >= kEnvelopeThreshold; passes iff >= min_fraction.
CheckVerdict envelope_check(double theta, int head_dim, std::int64_t max_r, std::uint64_t seed, int count,
                            double min_fraction = 0.9);

inline constexpr int kPRoPEEvaluations = 1000;

/// Exact p = 0 / p = 1 endpoint agreement, kept counts at p = 0.25 and 0.75,
/// nesting of kept sets across p, and the p-RoPE / reversed intersection.
std::vector<CheckVerdict> prope_equivalence_suite(double theta, int head_dim, std::uint64_t seed,
                                                  int evaluations = kPRoPEEvaluations);

/// Columns r, mean, stddev, n.
void write_csv(std::ostream &os, const DecayCurve &curve);

/// Metadata sidecar: experiment, encoding, theta, d, seed, L, n_trials,
/// rng algorithm and the build's git describe.
std::string metadata_json(const DecayCurve &curve);

/// git describe of the library build.
std::string_view build_version();

namespace reference {

DecayCurve gaussian_decay_curve(double theta, int head_dim, std::int64_t max_r, std::int64_t n_trials,
                                std::uint64_t seed, GaussianPairing pairing = GaussianPairing::Independent);

std::vector<DecayCurve> random_rope_decay(double theta, int head_dim, std::int64_t max_r,
                                          std::span<const std::int64_t> l_values, std::uint64_t seed,
                                          int resamples = kRandomRopeResamples);

}  // namespace reference

}  // namespace ropelab
