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
#include "ropelab/theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "ropelab/errors.hpp"
#include "ropelab/parallel.hpp"
#include "ropelab/rng.hpp"

namespace ropelab {

namespace {

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;
};

Moments moments(const std::vector<double> &xs) {
    Moments m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.stddev = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return m;
}

void gaussian_block(std::vector<double> &values, std::int64_t block, const FrequencySchedule &sched, std::int64_t r,
                    std::uint64_t seed, GaussianPairing pairing) {
    const auto d = static_cast<std::size_t>(sched.head_dim());
    const std::int64_t n = static_cast<std::int64_t>(values.size());
    const std::int64_t begin = block * kTrialsPerStream;
    const std::int64_t end = std::min(n, begin + kTrialsPerStream);
    Rng rng(seed, static_cast<std::uint64_t>(block));
    std::vector<double> q(d), k(d);
    for (std::int64_t t = begin; t < end; ++t) {
        for (double &x : q) x = rng.normal();
        if (pairing == GaussianPairing::Identical) {
            k = q;
        } else {
            for (double &x : k) x = rng.normal();
        }
        values[static_cast<std::size_t>(t)] = kernel(q, k, 0, r, EncodingKind::rope(), sched);
    }
}

CheckVerdict gaussian_verdict(const SampleSummary &m, int head_dim, std::int64_t r, std::uint64_t seed,
                              GaussianPairing pairing) {
    CheckVerdict v;
    v.name = "gaussian_expectation";
    v.seed = seed;
    v.statistic = std::abs(m.mean);
    v.threshold = 4.0 * m.stddev / std::sqrt(static_cast<double>(m.n));
    v.passed = v.statistic <= v.threshold;
    std::ostringstream os;
    os << "d=" << head_dim << " r=" << r << " n=" << m.n << " mean=" << m.mean << " stddev=" << m.stddev
       << (pairing == GaussianPairing::Identical ? " pairing=identical" : " pairing=independent");
    v.detail = os.str();
    return v;
}

SampleSummary summarize(const std::vector<double> &values) {
    const Moments m = moments(values);
    return {m.mean, m.stddev, static_cast<std::int64_t>(values.size())};
}

void check_gaussian_args(int head_dim, std::int64_t n_samples) {
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::InvalidDimension, "head_dim must be even and >= 2");
    if (n_samples < 1000) throw Error(ErrorCode::InvalidRange, "gaussian check needs n_samples >= 1000");
}

double softmax_entry(std::span<const double> logits, std::size_t index) {
    double peak = logits[0];
    for (double a : logits) peak = std::max(peak, a);
    double total = 0.0;
    for (double a : logits) total += std::exp(a - peak);
    return std::exp(logits[index] - peak) / total;
}

// Logit of the key originally at token `key_token` when placed at position slot `slot`.
class RowLogits {
public:
    RowLogits(const HeadSequence &seq, double angle, std::int64_t query_index)
        : seq_(seq),
          sched_(1.0 / angle, 2, {angle}, {true}),
          query_index_(query_index),
          order_(static_cast<std::size_t>(query_index + 1)) {
        for (std::size_t p = 0; p < order_.size(); ++p) order_[p] = static_cast<std::int64_t>(p);
    }

    double placed(std::int64_t key_token, std::int64_t slot) const {
        return kernel(seq_.query(query_index_), seq_.key(key_token), seq_.positions[static_cast<std::size_t>(query_index_)],
                      seq_.positions[static_cast<std::size_t>(slot)], EncodingKind::rope(), sched_);
    }
    double at(std::int64_t slot) const { return placed(order_[static_cast<std::size_t>(slot)], slot); }
    std::int64_t occupant(std::int64_t slot) const { return order_[static_cast<std::size_t>(slot)]; }
    void swap(std::int64_t a, std::int64_t b) {
        std::swap(order_[static_cast<std::size_t>(a)], order_[static_cast<std::size_t>(b)]);
    }

    std::vector<double> row() const {
        std::vector<double> out(order_.size());
        for (std::size_t p = 0; p < order_.size(); ++p) out[p] = at(static_cast<std::int64_t>(p));
        return out;
    }
    /// True when the entry at `slot` is strictly larger than every other.
    bool strict_max(std::int64_t slot) const {
        const double a = at(slot);
        for (std::int64_t p = 0; p <= query_index_; ++p) {
            if (p != slot && at(p) >= a) return false;
        }
        return true;
    }

private:
    const HeadSequence &seq_;
    FrequencySchedule sched_;
    std::int64_t query_index_;
    std::vector<std::int64_t> order_;
};

// Slots 1..limit ordered by distance from `center`, ties to the left.
std::vector<std::int64_t> nearest_first(std::int64_t center, std::int64_t limit) {
    std::vector<std::int64_t> slots;
    for (std::int64_t p = 1; p <= limit; ++p) slots.push_back(p);
    std::stable_sort(slots.begin(), slots.end(),
                     [center](std::int64_t a, std::int64_t b) { return std::llabs(a - center) < std::llabs(b - center); });
    return slots;
}

// Swap that moves some non-target key to a slot where its logit is positive.
bool make_rival(RowLogits &logits, std::int64_t target_slot, std::int64_t limit,
                std::vector<std::pair<std::int64_t, std::int64_t>> &swaps) {
    const auto slots = nearest_first(target_slot, limit);
    for (std::int64_t dest : slots) {
        if (dest == target_slot) continue;
        for (std::int64_t src : slots) {
            if (src == target_slot || src == dest) continue;
            if (logits.placed(logits.occupant(src), dest) > 0.0) {
                logits.swap(src, dest);
                swaps.emplace_back(std::min(src, dest), std::max(src, dest));
                return true;
            }
        }
    }
    return false;
}

SwapPlan finish_plan(const RowLogits &logits, std::vector<std::pair<std::int64_t, std::int64_t>> swaps,
                     std::int64_t target_slot) {
    SwapPlan plan;
    plan.swaps = std::move(swaps);
    plan.target_index_after = target_slot;
    plan.predicted_alpha_target = softmax_entry(logits.row(), static_cast<std::size_t>(target_slot));
    return plan;
}

}  // namespace

std::string to_json_line(const CheckVerdict &v) {
    nlohmann::ordered_json j;
    j["name"] = v.name;
    j["passed"] = v.passed;
    j["statistic"] = v.statistic;
    j["threshold"] = v.threshold;
    j["detail"] = v.detail;
    j["seed"] = v.seed;
    return j.dump();
}

SampleSummary gaussian_expectation_summary(int head_dim, std::int64_t r, std::int64_t n_samples, std::uint64_t seed,
                                           double theta, GaussianPairing pairing) {
    check_gaussian_args(head_dim, n_samples);
    const FrequencySchedule sched = make_schedule(theta, head_dim);
    std::vector<double> values(static_cast<std::size_t>(n_samples));
    const std::int64_t blocks = (n_samples + kTrialsPerStream - 1) / kTrialsPerStream;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t b = 0; b < blocks; ++b) gaussian_block(values, b, sched, r, seed, pairing);
    return summarize(values);
}

CheckVerdict gaussian_expectation_check(int head_dim, std::int64_t r, std::int64_t n_samples, std::uint64_t seed,
                                        double theta, GaussianPairing pairing) {
    return gaussian_verdict(gaussian_expectation_summary(head_dim, r, n_samples, seed, theta, pairing), head_dim, r,
                            seed, pairing);
}

CheckVerdict slope_check(std::span<const std::int64_t> distances, std::span<const SampleSummary> points,
                         std::uint64_t seed) {
    if (distances.size() != points.size() || distances.size() < 2) {
        throw Error(ErrorCode::InvalidRange, "slope check needs matching distances and at least two points");
    }
    const auto len = static_cast<double>(points.size());
    double rbar = 0.0;
    double ybar = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        rbar += static_cast<double>(distances[i]);
        ybar += points[i].mean;
    }
    rbar /= len;
    ybar /= len;
    double sxx = 0.0;
    double sxy = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double dx = static_cast<double>(distances[i]) - rbar;
        sxx += dx * dx;
        sxy += dx * (points[i].mean - ybar);
        var += dx * dx * points[i].stddev * points[i].stddev / static_cast<double>(points[i].n);
    }
    if (sxx == 0.0) throw Error(ErrorCode::InvalidRange, "slope check needs at least two distinct distances");
    const double slope = sxy / sxx;
    const double se = std::sqrt(var) / sxx;
    CheckVerdict v;
    v.name = "mean_vs_distance_slope";
    v.seed = seed;
    v.statistic = std::abs(slope);
    v.threshold = 4.0 * se;
    v.passed = v.statistic <= v.threshold;
    std::ostringstream os;
    os << "slope=" << slope << " se=" << se << " points=" << points.size();
    v.detail = os.str();
    return v;
}

namespace reference {

CheckVerdict gaussian_expectation_check(int head_dim, std::int64_t r, std::int64_t n_samples, std::uint64_t seed,
                                        double theta, GaussianPairing pairing) {
    check_gaussian_args(head_dim, n_samples);
    const FrequencySchedule sched = make_schedule(theta, head_dim);
    std::vector<double> values(static_cast<std::size_t>(n_samples));
    const std::int64_t blocks = (n_samples + kTrialsPerStream - 1) / kTrialsPerStream;
    for (std::int64_t b = 0; b < blocks; ++b) gaussian_block(values, b, sched, r, seed, pairing);
    return gaussian_verdict(summarize(values), head_dim, r, seed, pairing);
}

}  // namespace reference

CheckVerdict nope_counterexample_check(std::uint64_t seed, int draws, int head_dim) {
    if (draws < 1) throw Error(ErrorCode::InvalidRange, "need at least one draw");
    const FrequencySchedule sched = make_schedule(10000.0, head_dim);
    double worst = 0.0;
    bool repeated_equal = true;
    for (int t = 0; t < draws; ++t) {
        Rng rng(seed, static_cast<std::uint64_t>(t));
        HeadSequence seq = HeadSequence::zeros(3, head_dim);
        seq.labels = {"BOS", "x1", "x1"};
        for (std::int64_t tok = 0; tok < 2; ++tok) {
            for (double &x : seq.query(tok)) x = rng.normal();
            for (double &x : seq.key(tok)) x = rng.normal();
        }
        std::copy(seq.query(1).begin(), seq.query(1).end(), seq.query(2).begin());
        std::copy(seq.key(1).begin(), seq.key(1).end(), seq.key(2).begin());
        const AttentionMatrix att = attention(activations(seq, EncodingKind::nope(), sched));
        const double a33 = att.at(2, 2);
        const double a32 = att.at(2, 1);
        repeated_equal = repeated_equal && a33 == a32;
        worst = std::max({worst, a33, a32});
    }
    CheckVerdict v;
    v.name = "nope_counterexample";
    v.seed = seed;
    v.statistic = worst;
    v.threshold = 0.5;
    v.passed = worst < 0.5 && repeated_equal;
    std::ostringstream os;
    os << draws << " draws of [BOS, x1, x1], d=" << head_dim << "; max(alpha33, alpha32)=" << worst
       << (repeated_equal ? "; alpha32 == alpha33 on every draw" : "; alpha32 != alpha33 on some draw");
    v.detail = os.str();
    return v;
}

double nope_equal_logit_alpha() {
    HeadSequence seq = HeadSequence::zeros(3, 2);
    for (std::int64_t t = 0; t < 3; ++t) {
        seq.query(t)[0] = 1.0;
        seq.key(t)[0] = 1.0;
    }
    const AttentionMatrix att = attention(activations(seq, EncodingKind::nope(), make_schedule(10000.0, 2)));
    return att.at(2, 2);
}

double rope_diagonal_contrast_alpha(double psi_norm_sq) {
    HeadSequence seq = HeadSequence::zeros(3, 2);
    const double a = std::sqrt(psi_norm_sq);
    for (std::int64_t t = 0; t < 3; ++t) {
        seq.query(t)[0] = a;
        seq.key(t)[0] = a;
    }
    const AttentionMatrix att = attention(activations(seq, EncodingKind::rope(), make_schedule(10000.0, 2)));
    return att.at(2, 2);
}

std::int64_t swap_required_length(double angle) {
    return static_cast<std::int64_t>(std::ceil(8.0 * 2.0 * std::numbers::pi / std::abs(angle)));
}

SwapPlan find_swap_attack(const HeadSequence &seq, double angle, std::int64_t query_index, std::int64_t target) {
    seq.validate();
    if (seq.head_dim != 2) throw Error(ErrorCode::PreconditionViolated, "swap attack needs a single frequency (d = 2)");
    if (!std::isfinite(angle) || angle == 0.0) throw Error(ErrorCode::InvalidAngle, "angle must be finite and non-zero");
    if (query_index < 1 || query_index >= seq.size()) throw Error(ErrorCode::IndexOutOfRange, "query index out of range");
    if (target < 1 || target > query_index) throw Error(ErrorCode::IndexOutOfRange, "target must lie in [1, query_index]");

    RowLogits logits(seq, angle, query_index);
    if (!logits.strict_max(target)) {
        throw Error(ErrorCode::PreconditionViolated, "target does not hold the unique maximal logit");
    }
    const auto not_found = [&] {
        return NotFoundError("no swap window within " + std::to_string(query_index) + " positions",
                             swap_required_length(angle));
    };

    std::vector<std::pair<std::int64_t, std::int64_t>> swaps;
    if (logits.at(target) <= 0.0) {
        // Every other logit is negative: one positive rival suffices.
        if (!make_rival(logits, target, query_index, swaps)) throw not_found();
        return finish_plan(logits, std::move(swaps), target);
    }

    const std::int64_t target_key = logits.occupant(target);
    for (std::int64_t slot : nearest_first(target, query_index)) {
        if (slot == target || !(logits.placed(target_key, slot) < 0.0)) continue;
        RowLogits trial = logits;
        trial.swap(target, slot);
        std::vector<std::pair<std::int64_t, std::int64_t>> attempt{{std::min(target, slot), std::max(target, slot)}};
        if (!trial.strict_max(slot)) return finish_plan(trial, std::move(attempt), slot);
        if (make_rival(trial, slot, query_index, attempt)) return finish_plan(trial, std::move(attempt), slot);
    }
    throw not_found();
}

HeadSequence random_swap_instance(std::int64_t n, std::uint64_t seed) {
    if (n < 3) throw Error(ErrorCode::InvalidRange, "swap instance needs N >= 3");
    HeadSequence seq = HeadSequence::zeros(n, 2);
    Rng rng(seed);
    for (std::int64_t t = 0; t < n; ++t) {
        for (double &x : seq.query(t)) x = rng.normal();
        if (t == 0) continue;
        for (double &x : seq.key(t)) x = rng.normal();
    }
    return seq;
}

CheckVerdict swap_attack_check(double angle, std::int64_t n, int instances, std::uint64_t seed) {
    if (instances < 1) throw Error(ErrorCode::InvalidRange, "need at least one instance");
    if (!std::isfinite(angle) || angle == 0.0) throw Error(ErrorCode::InvalidAngle, "angle must be finite and non-zero");
    const FrequencySchedule sched(1.0 / angle, 2, {angle}, {true});
    const std::int64_t query = n - 1;
    std::vector<int> ok(static_cast<std::size_t>(instances), 0);
    std::vector<double> alpha(static_cast<std::size_t>(instances), 1.0);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(instances), 0);
#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 0; t < instances; ++t) {
        const HeadSequence seq = random_swap_instance(n, derive_seed(seed, static_cast<std::uint64_t>(t)));
        const ActivationMatrix before = activations(seq, EncodingKind::rope(), sched);
        const RowArgmax top = argmax_row(before, query);
        if (top.tied || top.index == 0) continue;
        try {
            const SwapPlan plan = find_swap_attack(seq, angle, query, top.index);
            const AttentionMatrix after = attention(activations(apply_swap_plan(seq, plan), EncodingKind::rope(), sched));
            const auto i = static_cast<std::size_t>(t);
            alpha[i] = after.at(query, plan.target_index_after);
            sizes[i] = plan.swaps.size();
            ok[i] = (alpha[i] <= 0.5 && !plan.swaps.empty() && plan.swaps.size() <= 2) ? 1 : 0;
        } catch (const NotFoundError &) {
        }
    }
    const auto successes = static_cast<int>(std::count(ok.begin(), ok.end(), 1));
    std::size_t one = 0;
    std::size_t two = 0;
    for (std::size_t s : sizes) {
        one += s == 1 ? 1 : 0;
        two += s == 2 ? 1 : 0;
    }
    CheckVerdict v;
    v.name = "swap_attack";
    v.seed = seed;
    v.statistic = successes;
    v.threshold = instances;
    v.passed = successes == instances;
    std::ostringstream os;
    os << "g=" << angle << " N=" << n << " succeeded " << successes << "/" << instances << "; plans with 1 swap: " << one
       << ", 2 swaps: " << two << "; max target alpha after swap=" << *std::max_element(alpha.begin(), alpha.end());
    v.detail = os.str();
    return v;
}

HeadSequence apply_swap_plan(const HeadSequence &seq, const SwapPlan &plan) {
    HeadSequence out = seq;
    for (const auto &[a, b] : plan.swaps) {
        if (a < 1 || b < 1 || a >= seq.size() || b >= seq.size() || a == b) {
            throw Error(ErrorCode::IndexOutOfRange, "swap indices must be distinct and lie in [1, N]");
        }
        auto ka = out.key(a);
        auto kb = out.key(b);
        std::swap_ranges(ka.begin(), ka.end(), kb.begin());
        if (!out.labels.empty()) std::swap(out.labels[static_cast<std::size_t>(a)], out.labels[static_cast<std::size_t>(b)]);
    }
    return out;
}

CheckVerdict density_cover_check(double angle, std::int64_t n, int bins) {
    if (bins < 4) throw Error(ErrorCode::InvalidRange, "density check needs bins >= 4");
    if (n < 1) throw Error(ErrorCode::InvalidRange, "density check needs N >= 1");
    if (!std::isfinite(angle) || angle == 0.0) throw Error(ErrorCode::InvalidAngle, "angle must be finite and non-zero");
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    std::vector<bool> hit(static_cast<std::size_t>(bins), false);
    std::int64_t cycle = 0;
    for (std::int64_t m = 1; m <= n; ++m) {
        double phase = reduced_phase(m, angle);
        if (cycle == 0 && std::abs(phase) < 1e-9) cycle = m;
        if (phase < 0.0) phase += kTwoPi;
        auto bin = static_cast<int>(phase / kTwoPi * bins);
        bin = std::clamp(bin, 0, bins - 1);
        hit[static_cast<std::size_t>(bin)] = true;
    }
    const auto covered = static_cast<int>(std::count(hit.begin(), hit.end(), true));
    const auto recommended = static_cast<std::int64_t>(std::ceil(8.0 * bins / std::abs(angle)));

    CheckVerdict v;
    v.name = "density_cover";
    v.statistic = covered;
    v.threshold = bins;
    v.passed = covered == bins;
    std::ostringstream os;
    os << "g=" << angle << " N=" << n << " covered " << covered << "/" << bins << " arcs; recommended N >= "
       << recommended;
    if (cycle > 0) os << "; rational cycle: " << cycle << "*g = 0 mod 2pi, only " << cycle << " distinct residues";
    if (!v.passed && cycle == 0 && n < recommended) os << "; insufficient N";
    v.detail = os.str();
    return v;
}

}  // namespace ropelab
