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
#include "ropelab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "ropelab/errors.hpp"
#include "ropelab/rng.hpp"

namespace ropelab {

namespace {

void check_fraction(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorCode::InvalidFraction, "fraction p must lie in [0, 1]");
    }
}

}  // namespace

EncodingKind EncodingKind::prope(double p) {
    check_fraction(p);
    return {EncodingFamily::PRoPE, p, 0, 0};
}

EncodingKind EncodingKind::prope_reversed(double p) {
    check_fraction(p);
    return {EncodingFamily::PRoPEReversed, p, 0, 0};
}

EncodingKind EncodingKind::partial(double p) {
    check_fraction(p);
    return {EncodingFamily::PartialRoPE, p, 0, 0};
}

EncodingKind EncodingKind::random_rope(std::int64_t max_position, std::uint64_t seed) {
    if (max_position < 1) throw Error(ErrorCode::InvalidRange, "RandomRoPE needs L >= 1");
    return {EncodingFamily::RandomRoPE, 1.0, max_position, seed};
}

std::string EncodingKind::name() const {
    std::ostringstream os;
    switch (family) {
    case EncodingFamily::NoPE: os << "NoPE"; break;
    case EncodingFamily::RoPE: os << "RoPE"; break;
    case EncodingFamily::PRoPE: os << "p-RoPE(" << p << ")"; break;
    case EncodingFamily::PRoPEReversed: os << "p-RoPE-reversed(" << p << ")"; break;
    case EncodingFamily::PartialRoPE: os << "partial-RoPE(" << p << ")"; break;
    case EncodingFamily::RandomRoPE: os << "RandomRoPE(L=" << max_position << ")"; break;
    }
    return os.str();
}

int kept_frequencies(double p, int head_dim) {
    check_fraction(p);
    // Same grouping as `int(p * head_dim // 2)`.
    return static_cast<int>(std::floor(p * static_cast<double>(head_dim) / 2.0));
}

FrequencySchedule make_prope_schedule(double p, double theta, int head_dim) {
    check_fraction(p);
    const FrequencySchedule full = make_schedule(theta, head_dim);
    const int kept = kept_frequencies(p, head_dim);
    std::vector<bool> mask(full.mask().size());
    for (int k = 1; k <= full.num_frequencies(); ++k) mask[static_cast<std::size_t>(k - 1)] = k <= kept;
    return FrequencySchedule(theta, head_dim, full.angles(), std::move(mask), ScheduleVariant::PRoPE, p);
}

FrequencySchedule make_reversed_prope_schedule(double p, double theta, int head_dim) {
    check_fraction(p);
    const FrequencySchedule full = make_schedule(theta, head_dim);
    const int half = full.num_frequencies();
    const int kept = kept_frequencies(p, head_dim);
    std::vector<bool> mask(full.mask().size());
    for (int k = 1; k <= half; ++k) mask[static_cast<std::size_t>(k - 1)] = k > half - kept;
    return FrequencySchedule(theta, head_dim, full.angles(), std::move(mask), ScheduleVariant::PRoPEReversed, p);
}

FrequencySchedule make_partial_rope_schedule(double p, double theta, int head_dim) {
    check_fraction(p);
    const FrequencySchedule full = make_schedule(theta, head_dim);
    const int kept = kept_frequencies(p, head_dim);
    std::vector<double> angles = full.angles();
    std::vector<bool> mask(angles.size(), false);
    if (kept > 0) {
        const FrequencySchedule rotary = make_schedule(theta, 2 * kept);
        for (int k = 1; k <= kept; ++k) {
            angles[static_cast<std::size_t>(k - 1)] = rotary.angle(k);
            mask[static_cast<std::size_t>(k - 1)] = true;
        }
    }
    return FrequencySchedule(theta, head_dim, std::move(angles), std::move(mask), ScheduleVariant::Partial, p);
}

FrequencySchedule schedule_for(const EncodingKind &kind, double theta, int head_dim) {
    switch (kind.family) {
    case EncodingFamily::PRoPE: return make_prope_schedule(kind.p, theta, head_dim);
    case EncodingFamily::PRoPEReversed: return make_reversed_prope_schedule(kind.p, theta, head_dim);
    case EncodingFamily::PartialRoPE: return make_partial_rope_schedule(kind.p, theta, head_dim);
    case EncodingFamily::NoPE:
    case EncodingFamily::RoPE:
    case EncodingFamily::RandomRoPE: break;
    }
    return make_schedule(theta, head_dim);
}

namespace detail {

double nope_dot(std::span<const double> q, std::span<const double> k) {
    double acc = 0.0;
    for (std::size_t c = 0; c + 1 < q.size(); c += 2) acc += plain_chunk_dot(&q[c], &k[c]);
    return acc;
}

void check_kind_schedule(const EncodingKind &kind, const FrequencySchedule &sched) {
    ScheduleVariant expected = ScheduleVariant::Full;
    switch (kind.family) {
    case EncodingFamily::NoPE: return;
    case EncodingFamily::RoPE:
    case EncodingFamily::RandomRoPE: expected = ScheduleVariant::Full; break;
    case EncodingFamily::PRoPE: expected = ScheduleVariant::PRoPE; break;
    case EncodingFamily::PRoPEReversed: expected = ScheduleVariant::PRoPEReversed; break;
    case EncodingFamily::PartialRoPE: expected = ScheduleVariant::Partial; break;
    }
    const bool fraction_ok = expected == ScheduleVariant::Full || sched.fraction() == kind.p;
    if (sched.variant() != expected || !fraction_ok) {
        throw Error(ErrorCode::ScheduleMismatch, "schedule was not built for encoding " + kind.name());
    }
}

}  // namespace detail

double kernel(std::span<const double> q, std::span<const double> k, std::int64_t pos_q, std::int64_t pos_k,
              const EncodingKind &kind, const FrequencySchedule &sched) {
    const auto d = static_cast<std::size_t>(sched.head_dim());
    if (q.size() != d || k.size() != d) {
        throw Error(ErrorCode::DimensionMismatch, "query/key length does not match head_dim");
    }
    detail::check_kind_schedule(kind, sched);
    if (kind.family == EncodingFamily::NoPE) return detail::nope_dot(q, k);

    const std::int64_t offset = pos_k - pos_q;
    const auto &angles = sched.angles();
    const auto &mask = sched.mask();
    double acc = 0.0;
    for (std::size_t c = 0; c < d / 2; ++c) {
        if (mask[c]) {
            acc += detail::rotated_chunk_dot(&q[2 * c], &k[2 * c], phase_cos_sin(offset, angles[c]));
        } else {
            acc += detail::plain_chunk_dot(&q[2 * c], &k[2 * c]);
        }
    }
    return acc;
}

std::vector<std::int64_t> sample_random_positions(std::int64_t n, std::int64_t max_position, std::uint64_t seed) {
    if (n < 1) throw Error(ErrorCode::InvalidRange, "need at least one position");
    if (max_position < n) {
        throw Error(ErrorCode::InvalidRange,
                    "cannot sample " + std::to_string(n) + " distinct positions from [1, " +
                        std::to_string(max_position) + "]");
    }
    Rng rng(seed);
    std::unordered_set<std::int64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(n) * 2);
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::int64_t j = max_position - n + 1; j <= max_position; ++j) {
        const auto t = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(j))) + 1;
        const std::int64_t pick = chosen.contains(t) ? j : t;
        chosen.insert(pick);
        out.push_back(pick);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace ropelab
