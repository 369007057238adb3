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
#include "ropelab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ropelab/errors.hpp"
#include "ropelab/io.hpp"
#include "ropelab/kernels.hpp"
#include "ropelab/rng.hpp"

#ifndef ROPELAB_GIT_DESCRIBE
#define ROPELAB_GIT_DESCRIBE "unknown"
#endif

namespace ropelab {

namespace {

void check_common(int head_dim, std::int64_t max_r) {
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::InvalidDimension, "head_dim must be even and >= 2");
    if (max_r < 1) throw Error(ErrorCode::InvalidRange, "max_r must be >= 1");
}

DecayCurve empty_curve(std::int64_t max_r, std::int64_t n, CurveMetadata meta) {
    DecayCurve c;
    const auto len = static_cast<std::size_t>(max_r + 1);
    c.relative_distance.resize(len);
    for (std::size_t r = 0; r < len; ++r) c.relative_distance[r] = static_cast<std::int64_t>(r);
    c.value.assign(len, 0.0);
    c.stddev.assign(len, 0.0);
    c.n.assign(len, n);
    c.metadata = std::move(meta);
    return c;
}

// Mean and sample stddev of column r across rows, summed in row order.
void reduce_rows(DecayCurve &c, const std::vector<std::vector<double>> &rows) {
    const double count = static_cast<double>(rows.size());
    for (std::size_t r = 0; r < c.size(); ++r) {
        double sum = 0.0;
        for (const auto &row : rows) sum += row[r];
        const double mean = sum / count;
        double ss = 0.0;
        for (const auto &row : rows) ss += (row[r] - mean) * (row[r] - mean);
        c.value[r] = mean;
        c.stddev[r] = rows.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    }
}

void gaussian_pair(Rng &rng, std::vector<double> &q, std::vector<double> &k, GaussianPairing pairing) {
    for (double &x : q) x = rng.normal();
    if (pairing == GaussianPairing::Identical) {
        k = q;
    } else {
        for (double &x : k) x = rng.normal();
    }
}

void gaussian_point(DecayCurve &c, std::int64_t r, std::int64_t n_trials, std::uint64_t seed,
                    const FrequencySchedule &sched, GaussianPairing pairing) {
    const auto d = static_cast<std::size_t>(sched.head_dim());
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Rng rng(seed, static_cast<std::uint64_t>(r));
    std::vector<double> q(d), k(d), values(static_cast<std::size_t>(n_trials));
    for (double &v : values) {
        gaussian_pair(rng, q, k, pairing);
        v = scale * kernel(q, k, r, 0, EncodingKind::rope(), sched);
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(n_trials);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const auto i = static_cast<std::size_t>(r);
    c.value[i] = mean;
    c.stddev[i] = std::sqrt(ss / static_cast<double>(n_trials - 1));
}

void check_gaussian(int head_dim, std::int64_t max_r, std::int64_t n_trials) {
    check_common(head_dim, max_r);
    if (n_trials < 100) throw Error(ErrorCode::InvalidRange, "n_trials must be >= 100");
}

CurveMetadata gaussian_meta(double theta, int head_dim, std::uint64_t seed, std::int64_t n_trials,
                            GaussianPairing pairing) {
    return {pairing == GaussianPairing::Identical ? "decay-gaussian-identical" : "decay-gaussian",
            EncodingKind::rope().name(), theta, head_dim, seed, std::nullopt, n_trials};
}

void check_l_values(std::int64_t max_r, std::span<const std::int64_t> l_values, int resamples) {
    if (l_values.empty()) throw Error(ErrorCode::InvalidRange, "need at least one L");
    for (std::int64_t l : l_values) {
        if (l < max_r) {
            throw Error(ErrorCode::InvalidRange,
                        "L = " + std::to_string(l) + " is smaller than max_r = " + std::to_string(max_r));
        }
    }
    if (resamples < 2) throw Error(ErrorCode::InvalidRange, "need at least two resamples");
}

enum class RandomVectors { Constant, Gaussian };

// One resampling of positions (and vectors) for a single L.
std::vector<double> random_rope_row(const FrequencySchedule &sched, std::int64_t max_r, std::int64_t l,
                                    std::uint64_t seed, int s, RandomVectors vectors) {
    const auto d = static_cast<std::size_t>(sched.head_dim());
    const std::uint64_t l_seed = derive_seed(seed, static_cast<std::uint64_t>(l));
    std::vector<std::int64_t> pos = sample_random_positions(max_r + 1, l + 1, derive_seed(l_seed, static_cast<std::uint64_t>(s)));
    std::vector<double> row(static_cast<std::size_t>(max_r + 1));
    std::vector<double> q(d, 1.0), k(d, 1.0);
    const EncodingKind kind = EncodingKind::random_rope(l + 1, l_seed);
    if (vectors == RandomVectors::Constant) {
        const double scale = 1.0 / static_cast<double>(d);
        for (std::int64_t r = 0; r <= max_r; ++r) {
            row[static_cast<std::size_t>(r)] = scale * kernel(q, k, pos[static_cast<std::size_t>(r)], pos[0], kind, sched);
        }
        return row;
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Rng rng(l_seed, (std::uint64_t{1} << 32) + static_cast<std::uint64_t>(s));
    for (std::int64_t r = 0; r <= max_r; ++r) {
        gaussian_pair(rng, q, k, GaussianPairing::Independent);
        row[static_cast<std::size_t>(r)] = scale * kernel(q, k, pos[static_cast<std::size_t>(r)], pos[0], kind, sched);
    }
    return row;
}

CurveMetadata random_meta(RandomVectors vectors, double theta, int head_dim, std::uint64_t seed, std::int64_t l,
                          int resamples) {
    return {vectors == RandomVectors::Constant ? "decay-random-rope" : "decay-random-rope-gaussian",
            EncodingKind::random_rope(l + 1, seed).name(), theta, head_dim, seed, l, resamples};
}

std::vector<DecayCurve> random_rope_impl(double theta, int head_dim, std::int64_t max_r,
                                         std::span<const std::int64_t> l_values, std::uint64_t seed, int resamples,
                                         RandomVectors vectors, bool parallel) {
    check_common(head_dim, max_r);
    check_l_values(max_r, l_values, resamples);
    const FrequencySchedule sched = make_schedule(theta, head_dim);
    const auto n_l = static_cast<std::int64_t>(l_values.size());
    const std::int64_t jobs = n_l * resamples;
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(jobs));
    const auto run = [&](std::int64_t job) {
        const std::int64_t l = l_values[static_cast<std::size_t>(job / resamples)];
        rows[static_cast<std::size_t>(job)] =
            random_rope_row(sched, max_r, l, seed, static_cast<int>(job % resamples), vectors);
    };
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t job = 0; job < jobs; ++job) run(job);
    } else {
        for (std::int64_t job = 0; job < jobs; ++job) run(job);
    }
    std::vector<DecayCurve> curves;
    for (std::int64_t li = 0; li < n_l; ++li) {
        const std::int64_t l = l_values[static_cast<std::size_t>(li)];
        DecayCurve c = empty_curve(max_r, resamples, random_meta(vectors, theta, head_dim, seed, l, resamples));
        std::vector<std::vector<double>> mine(rows.begin() + li * resamples, rows.begin() + (li + 1) * resamples);
        reduce_rows(c, mine);
        curves.push_back(std::move(c));
    }
    return curves;
}

CheckVerdict verdict(std::string name, bool passed, double statistic, double threshold, std::string detail,
                     std::uint64_t seed) {
    return {std::move(name), passed, statistic, threshold, std::move(detail), seed};
}

std::string p_label(double p) {
    std::ostringstream os;
    os << p;
    return os.str();
}

}  // namespace

void DecayCurve::validate() const {
    const std::size_t len = relative_distance.size();
    if (len == 0 || value.size() != len || stddev.size() != len || n.size() != len) {
        throw Error(ErrorCode::PreconditionViolated, "decay curve columns have different lengths");
    }
    for (std::size_t r = 0; r < len; ++r) {
        if (relative_distance[r] != static_cast<std::int64_t>(r)) {
            throw Error(ErrorCode::PreconditionViolated, "decay curve distances must run 0..R");
        }
    }
    if (metadata.experiment.empty() || metadata.encoding.empty()) {
        throw Error(ErrorCode::PreconditionViolated, "decay curve metadata is incomplete");
    }
}

DecayCurve constant_decay_curve(double theta, int head_dim, std::int64_t max_r) {
    check_common(head_dim, max_r);
    const FrequencySchedule sched = make_schedule(theta, head_dim);
    DecayCurve c = empty_curve(max_r, 1, {"decay-constant", EncodingKind::rope().name(), theta, head_dim, 0, std::nullopt, 1});
    const std::vector<double> ones(static_cast<std::size_t>(head_dim), 1.0);
    const double scale = 1.0 / static_cast<double>(head_dim);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r <= max_r; ++r) {
        c.value[static_cast<std::size_t>(r)] = scale * kernel(ones, ones, r, 0, EncodingKind::rope(), sched);
    }
    return c;
}

DecayCurve gaussian_decay_curve(double theta, int head_dim, std::int64_t max_r, std::int64_t n_trials,
                                std::uint64_t seed, GaussianPairing pairing) {
    check_gaussian(head_dim, max_r, n_trials);
    const FrequencySchedule sched = make_schedule(theta, head_dim);
    DecayCurve c = empty_curve(max_r, n_trials, gaussian_meta(theta, head_dim, seed, n_trials, pairing));
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t r = 0; r <= max_r; ++r) gaussian_point(c, r, n_trials, seed, sched, pairing);
    return c;
}

std::vector<DecayCurve> random_rope_decay(double theta, int head_dim, std::int64_t max_r,
                                          std::span<const std::int64_t> l_values, std::uint64_t seed, int resamples) {
    return random_rope_impl(theta, head_dim, max_r, l_values, seed, resamples, RandomVectors::Constant, true);
}

std::vector<DecayCurve> random_rope_gaussian_decay(double theta, int head_dim, std::int64_t max_r,
                                                   std::span<const std::int64_t> l_values, std::uint64_t seed,
                                                   int resamples) {
    return random_rope_impl(theta, head_dim, max_r, l_values, seed, resamples, RandomVectors::Gaussian, true);
}

DecayCurve constant_gaussian_control(double theta, int head_dim, std::int64_t max_r, std::uint64_t seed,
                                     GaussianPairing pairing) {
    check_common(head_dim, max_r);
    const FrequencySchedule sched = make_schedule(theta, head_dim);
    const auto d = static_cast<std::size_t>(head_dim);
    std::vector<double> q(d), k(d);
    Rng rng(seed, 0);
    gaussian_pair(rng, q, k, pairing);
    DecayCurve c = empty_curve(max_r, 1,
                               {pairing == GaussianPairing::Identical ? "decay-constant-gaussian-identical"
                                                                      : "decay-constant-gaussian",
                                EncodingKind::rope().name(), theta, head_dim, seed, std::nullopt, 1});
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r <= max_r; ++r) {
        c.value[static_cast<std::size_t>(r)] = scale * kernel(q, k, r, 0, EncodingKind::rope(), sched);
    }
    return c;
}

double envelope_ratio(const DecayCurve &curve) {
    const auto max_r = static_cast<std::int64_t>(curve.size()) - 1;
    const std::int64_t half = max_r / 2;
    double early = 0.0;
    double late = 0.0;
    for (std::int64_t r = 0; r <= max_r; ++r) {
        const double a = std::abs(curve.value[static_cast<std::size_t>(r)]);
        if (r < half) early = std::max(early, a);
        if (r >= half) late = std::max(late, a);
    }
    return early > 0.0 ? late / early : std::numeric_limits<double>::infinity();
}

double mean_abs_value(const DecayCurve &curve, std::int64_t lo, std::int64_t hi) {
    lo = std::max<std::int64_t>(lo, 0);
    hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(curve.size()) - 1);
    if (hi < lo) throw Error(ErrorCode::InvalidRange, "empty distance range");
    double s = 0.0;
    for (std::int64_t r = lo; r <= hi; ++r) s += std::abs(curve.value[static_cast<std::size_t>(r)]);
    return s / static_cast<double>(hi - lo + 1);
}

CheckVerdict trend_check(const DecayCurve &curve) {
    curve.validate();
    std::vector<SampleSummary> points(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) points[i] = {curve.value[i], curve.stddev[i], curve.n[i]};
    CheckVerdict v = slope_check(curve.relative_distance, points, curve.metadata.seed);
    v.name = "decay_trend";
    return v;
}

CheckVerdict pointwise_zero_mean_check(const DecayCurve &curve, std::span<const std::int64_t> distances) {
    curve.validate();
    double worst = 0.0;
    int failures = 0;
    std::ostringstream os;
    for (std::int64_t r : distances) {
        if (r < 0 || r >= static_cast<std::int64_t>(curve.size())) throw Error(ErrorCode::IndexOutOfRange, "distance outside the curve");
        const auto i = static_cast<std::size_t>(r);
        const double se = curve.stddev[i] / std::sqrt(static_cast<double>(curve.n[i]));
        const double z = se > 0.0 ? std::abs(curve.value[i]) / se : std::numeric_limits<double>::infinity();
        worst = std::max(worst, z);
        failures += z <= 4.0 ? 0 : 1;
        os << "r=" << r << " z=" << z << "; ";
    }
    os << "failures=" << failures;
    return verdict("decay_pointwise_zero_mean", failures == 0, worst, 4.0, os.str(), curve.metadata.seed);
}

CheckVerdict envelope_check(double theta, int head_dim, std::int64_t max_r, std::uint64_t seed, int count,
                            double min_fraction) {
    if (count < 1) throw Error(ErrorCode::InvalidRange, "need at least one seed");
    int holds = 0;
    double lowest = std::numeric_limits<double>::infinity();
    for (int s = 0; s < count; ++s) {
        const double ratio = envelope_ratio(constant_gaussian_control(theta, head_dim, max_r, seed + static_cast<std::uint64_t>(s)));
        lowest = std::min(lowest, ratio);
        holds += ratio >= kEnvelopeThreshold ? 1 : 0;
    }
    const double fraction = static_cast<double>(holds) / count;
    std::ostringstream os;
    os << holds << "/" << count << " seeds keep late/early envelope >= " << kEnvelopeThreshold
       << "; lowest ratio=" << lowest;
    return verdict("constant_gaussian_envelope", fraction >= min_fraction, fraction, min_fraction, os.str(), seed);
}

std::vector<CheckVerdict> prope_equivalence_suite(double theta, int head_dim, std::uint64_t seed, int evaluations) {
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::InvalidDimension, "head_dim must be even and >= 2");
    if (evaluations < 1) throw Error(ErrorCode::InvalidRange, "evaluations must be >= 1");
    std::vector<CheckVerdict> out;
    const auto d = static_cast<std::size_t>(head_dim);
    const int half = head_dim / 2;

    const FrequencySchedule full = make_schedule(theta, head_dim);
    const FrequencySchedule p0 = make_prope_schedule(0.0, theta, head_dim);
    const FrequencySchedule p1 = make_prope_schedule(1.0, theta, head_dim);
    Rng rng(seed, 0);
    std::vector<double> q(d), k(d);
    std::int64_t mismatch0 = 0;
    std::int64_t mismatch1 = 0;
    constexpr std::uint64_t kPositionRange = 8192;
    for (int e = 0; e < evaluations; ++e) {
        gaussian_pair(rng, q, k, GaussianPairing::Independent);
        const auto i = static_cast<std::int64_t>(rng.below(kPositionRange));
        const auto j = static_cast<std::int64_t>(rng.below(kPositionRange));
        if (kernel(q, k, i, j, EncodingKind::prope(0.0), p0) != kernel(q, k, i, j, EncodingKind::nope(), full)) {
            ++mismatch0;
        }
        if (kernel(q, k, i, j, EncodingKind::prope(1.0), p1) != kernel(q, k, i, j, EncodingKind::rope(), full)) {
            ++mismatch1;
        }
    }
    const std::string n_eval = "evaluations=" + std::to_string(evaluations);
    out.push_back(verdict("prope_p0_equals_nope", mismatch0 == 0, static_cast<double>(mismatch0), 0.0,
                          n_eval + " mismatches=" + std::to_string(mismatch0), seed));
    out.push_back(verdict("prope_p1_equals_rope", mismatch1 == 0, static_cast<double>(mismatch1), 0.0,
                          n_eval + " mismatches=" + std::to_string(mismatch1), seed));

    for (double p : {0.25, 0.75}) {
        const int active = make_prope_schedule(p, theta, head_dim).active_count();
        const auto expected = static_cast<int>(std::floor(p * half));
        out.push_back(verdict("prope_kept_count_p" + p_label(p), active == expected, active, expected,
                              "d=" + std::to_string(head_dim) + " active=" + std::to_string(active) +
                                  " expected=" + std::to_string(expected),
                              seed));
    }

    // Kept sets grow with p.
    const std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
    std::int64_t violations = 0;
    for (std::size_t a = 0; a + 1 < levels.size(); ++a) {
        const FrequencySchedule lo = make_prope_schedule(levels[a], theta, head_dim);
        const FrequencySchedule hi = make_prope_schedule(levels[a + 1], theta, head_dim);
        for (int kk = 1; kk <= half; ++kk) {
            if (lo.active(kk) && !hi.active(kk)) ++violations;
        }
    }
    out.push_back(verdict("prope_nested_kept_sets", violations == 0, static_cast<double>(violations), 0.0,
                          "levels=0,0.25,0.5,0.75,1 violations=" + std::to_string(violations), seed));

    const FrequencySchedule fast = make_prope_schedule(0.75, theta, head_dim);
    const FrequencySchedule slow = make_reversed_prope_schedule(0.75, theta, head_dim);
    const int kept = kept_frequencies(0.75, head_dim);
    const int first = half - kept + 1;
    int both = 0;
    bool exact = true;
    for (int kk = 1; kk <= half; ++kk) {
        const bool in = fast.active(kk) && slow.active(kk);
        both += in ? 1 : 0;
        if (in != (kk >= first && kk <= kept)) exact = false;
    }
    const int expected_both = std::max(0, kept - first + 1);
    out.push_back(verdict("prope_reversed_intersection_p0.75", exact && both == expected_both, both, expected_both,
                          "intersection=" + std::to_string(first) + ".." + std::to_string(kept), seed));
    return out;
}

void write_csv(std::ostream &os, const DecayCurve &curve) {
    curve.validate();
    os << "r,mean,stddev,n\n";
    for (std::size_t r = 0; r < curve.size(); ++r) {
        os << curve.relative_distance[r] << ',' << format_double(curve.value[r]) << ','
           << format_double(curve.stddev[r]) << ',' << curve.n[r] << '\n';
    }
}

std::string metadata_json(const DecayCurve &curve) {
    const CurveMetadata &m = curve.metadata;
    nlohmann::ordered_json j;
    j["experiment"] = m.experiment;
    j["encoding"] = m.encoding;
    j["theta"] = m.theta;
    j["head_dim"] = m.head_dim;
    j["seed"] = m.seed;
    j["L"] = m.max_position ? nlohmann::ordered_json(*m.max_position) : nlohmann::ordered_json(nullptr);
    j["n_trials"] = m.n_trials;
    j["max_r"] = static_cast<std::int64_t>(curve.size()) - 1;
    j["rng"] = std::string(kRngAlgorithm);
    j["git_describe"] = std::string(build_version());
    return j.dump(2) + "\n";
}

std::string_view build_version() { return ROPELAB_GIT_DESCRIBE; }

namespace reference {

DecayCurve gaussian_decay_curve(double theta, int head_dim, std::int64_t max_r, std::int64_t n_trials,
                                std::uint64_t seed, GaussianPairing pairing) {
    check_gaussian(head_dim, max_r, n_trials);
    const FrequencySchedule sched = make_schedule(theta, head_dim);
    DecayCurve c = empty_curve(max_r, n_trials, gaussian_meta(theta, head_dim, seed, n_trials, pairing));
    for (std::int64_t r = 0; r <= max_r; ++r) gaussian_point(c, r, n_trials, seed, sched, pairing);
    return c;
}

std::vector<DecayCurve> random_rope_decay(double theta, int head_dim, std::int64_t max_r,
                                          std::span<const std::int64_t> l_values, std::uint64_t seed, int resamples) {
    return random_rope_impl(theta, head_dim, max_r, l_values, seed, resamples, RandomVectors::Constant, false);
}

}  // namespace reference

}  // namespace ropelab
