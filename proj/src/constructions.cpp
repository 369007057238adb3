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
#include "ropelab/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ropelab/errors.hpp"
#include "ropelab/io.hpp"

namespace ropelab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

EncodingKind kind_for(const FrequencySchedule &sched) {
    switch (sched.variant()) {
    case ScheduleVariant::PRoPE: return EncodingKind::prope(sched.fraction());
    case ScheduleVariant::PRoPEReversed: return EncodingKind::prope_reversed(sched.fraction());
    case ScheduleVariant::Partial: return EncodingKind::partial(sched.fraction());
    case ScheduleVariant::Full: break;
    }
    return EncodingKind::rope();
}

// 1 - cos(m g) without cancellation.
double one_minus_cos(std::int64_t m, double angle) {
    if (angle == 0.0 || m == 0) return 0.0;
    const double half = 0.5 * reduced_phase(m, angle);
    const double s = std::sin(half);
    return 2.0 * s * s;
}

void set_chunk(std::span<double> v, int k, std::array<double, 2> value) {
    v[static_cast<std::size_t>(2 * (k - 1))] = value[0];
    v[static_cast<std::size_t>(2 * (k - 1) + 1)] = value[1];
}

HeadSequence build_apostrophe(const Construction &cons, std::int64_t n) {
    const FrequencySchedule &sched = cons.sched;
    const int d = sched.head_dim();
    const ApostropheConfig &cfg = cons.apostrophe;
    if (cfg.semantic_index < 2 || cfg.semantic_index > sched.num_frequencies()) {
        throw Error(ErrorCode::IndexOutOfRange, "semantic frequency must lie in 2..d/2");
    }
    HeadSequence seq = HeadSequence::zeros(n, d);
    seq.labels.assign(static_cast<std::size_t>(n), "tok");
    if (n > 0) seq.labels[0] = "BOS";

    const Chunked psi(cons.psi);
    const std::array<double, 2> positional = psi.chunk(1);
    std::array<double, 2> rotated{};
    {
        const Mat2 rot = rotation_block(sched.effective_angle(1));
        rotated = {rot[0][0] * positional[0] + rot[0][1] * positional[1],
                   rot[1][0] * positional[0] + rot[1][1] * positional[1]};
    }
    for (std::int64_t t = 0; t < n; ++t) {
        auto q = seq.query(t);
        auto k = seq.key(t);
        if (t == 0) {
            set_chunk(q, cfg.semantic_index, cfg.q_bos);
            set_chunk(k, cfg.semantic_index, cfg.k_bos);
            continue;
        }
        std::copy(cons.psi.begin(), cons.psi.end(), q.begin());
        set_chunk(q, cfg.semantic_index, cfg.q_not_bos);
        set_chunk(k, cfg.semantic_index, cfg.k_not_bos);
    }
    for (std::int64_t a : cfg.apostrophe_tokens) {
        if (a < 1) throw Error(ErrorCode::IndexOutOfRange, "apostrophe tokens must be >= 1");
        if (a >= n) continue;
        set_chunk(seq.key(a), 1, rotated);
        seq.labels[static_cast<std::size_t>(a)] = "'";
    }
    return seq;
}

}  // namespace

std::vector<double> equal_chunk_psi(double norm_sq, int head_dim) {
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::InvalidDimension, "head_dim must be even and >= 2");
    if (!(norm_sq >= 0.0)) throw Error(ErrorCode::InvalidRange, "norm_sq must be >= 0");
    std::vector<double> psi(static_cast<std::size_t>(head_dim), 0.0);
    const double per_chunk = std::sqrt(norm_sq / static_cast<double>(head_dim / 2));
    for (int k = 0; k < head_dim / 2; ++k) psi[static_cast<std::size_t>(2 * k)] = per_chunk;
    return psi;
}

std::vector<double> apostrophe_default_psi(int head_dim) {
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::InvalidDimension, "head_dim must be even and >= 2");
    std::vector<double> psi(static_cast<std::size_t>(head_dim), 0.0);
    psi[0] = 11.0;
    return psi;
}

HeadSequence build(const Construction &cons, std::int64_t n) {
    if (n < 1) throw Error(ErrorCode::InvalidRange, "construction needs N >= 1");
    const int d = cons.sched.head_dim();
    if (cons.psi.size() != static_cast<std::size_t>(d)) {
        throw Error(ErrorCode::DimensionMismatch, "psi length does not match the schedule head_dim");
    }
    if (norm(cons.psi) == 0.0) throw Error(ErrorCode::DegenerateConstruction, "psi must be non-zero");

    if (cons.kind == ConstructionKind::Apostrophe) return build_apostrophe(cons, n);

    std::int64_t shift = 0;
    switch (cons.kind) {
    case ConstructionKind::ArbitraryDistance: shift = cons.r; break;
    case ConstructionKind::PreviousToken: shift = 1; break;
    case ConstructionKind::Diagonal:
    case ConstructionKind::Apostrophe: break;
    }
    const std::vector<double> key = apply_rope(cons.psi, shift, cons.sched);
    HeadSequence seq = HeadSequence::zeros(n, d);
    for (std::int64_t t = 0; t < n; ++t) {
        std::copy(cons.psi.begin(), cons.psi.end(), seq.query(t).begin());
        std::copy(key.begin(), key.end(), seq.key(t).begin());
    }
    return seq;
}

double diagonal_alpha_closed_form(double psi_norm_sq, std::span<const double> angles, std::int64_t i) {
    if (i <= 0 || angles.empty()) return 1.0;
    const double per_chunk = psi_norm_sq / static_cast<double>(angles.size());
    double tail = 0.0;
    for (std::int64_t m = 1; m <= i; ++m) {
        double exponent = 0.0;
        for (double g : angles) exponent -= per_chunk * one_minus_cos(m, g);
        tail += std::exp(exponent);
    }
    return 1.0 / (1.0 + tail);
}

double min_norm_for_epsilon(double eps, std::int64_t n, std::span<const double> angles) {
    if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorCode::InvalidRange, "eps must lie in (0, 1)");
    if (n < 1) throw Error(ErrorCode::InvalidRange, "N must be >= 1");
    const double target = 1.0 - eps;
    if (n == 1 || angles.empty()) return 0.0;

    // alpha_{i,i} only gains terms as i grows, so row n-1 binds.
    std::vector<double> gaps(static_cast<std::size_t>(n - 1));
    for (std::int64_t m = 1; m < n; ++m) {
        double g = 0.0;
        for (double a : angles) g += one_minus_cos(m, a);
        gaps[static_cast<std::size_t>(m - 1)] = g / static_cast<double>(angles.size());
        if (gaps[static_cast<std::size_t>(m - 1)] == 0.0) return std::numeric_limits<double>::infinity();
    }
    const auto alpha_last = [&](double norm_sq) {
        double tail = 0.0;
        for (double g : gaps) tail += std::exp(-norm_sq * g);
        return 1.0 / (1.0 + tail);
    };
    if (alpha_last(0.0) > target) return 0.0;

    double lo = 0.0;
    double hi = 1.0;
    while (!(alpha_last(hi) > target)) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) return std::numeric_limits<double>::infinity();
    }
    while (hi - lo > 1e-6 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (alpha_last(mid) > target) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;
}

BoundGapReport cauchy_schwarz_diag(const HeadSequence &seq, const FrequencySchedule &sched) {
    seq.validate();
    if (seq.head_dim != sched.head_dim()) throw Error(ErrorCode::DimensionMismatch, "sequence and schedule head_dim differ");
    const EncodingKind kind = kind_for(sched);
    const double scale = 1.0 / std::sqrt(static_cast<double>(seq.head_dim));
    const auto ratio = [](double logit, double bound) { return bound > 0.0 ? logit / bound : 0.0; };

    BoundGapReport report;
    report.rows.reserve(static_cast<std::size_t>(seq.size()));
    for (std::int64_t i = 0; i < seq.size(); ++i) {
        const std::int64_t pos_i = seq.positions[static_cast<std::size_t>(i)];
        const double q_norm = norm(seq.query(i));
        BoundGapRow row;
        row.position = i;
        row.upper_bound = scale * q_norm * norm(seq.key(i));
        row.diag_logit = scale * kernel(seq.query(i), seq.key(i), pos_i, pos_i, kind, sched);
        row.diag_ratio = ratio(row.diag_logit, row.upper_bound);
        if (i == 0) {
            row.prev_upper_bound = kNaN;
            row.prev_logit = kNaN;
            row.prev_ratio = kNaN;
        } else {
            const std::int64_t pos_j = seq.positions[static_cast<std::size_t>(i - 1)];
            row.prev_upper_bound = scale * q_norm * norm(seq.key(i - 1));
            row.prev_logit = scale * kernel(seq.query(i), seq.key(i - 1), pos_i, pos_j, kind, sched);
            row.prev_ratio = ratio(row.prev_logit, row.prev_upper_bound);
        }
        report.rows.push_back(row);
    }
    return report;
}

void write_csv(std::ostream &os, const BoundGapReport &report) {
    os << "position,upper_bound,diag_logit,prev_logit,diag_ratio,prev_ratio\n";
    for (const BoundGapRow &r : report.rows) {
        os << r.position << ',' << format_double(r.upper_bound) << ',' << format_double(r.diag_logit) << ','
           << format_double(r.prev_logit) << ',' << format_double(r.diag_ratio) << ',' << format_double(r.prev_ratio)
           << '\n';
    }
}

CausalMatrix apostrophe_channel_report(const HeadSequence &seq, int frequency_index, const FrequencySchedule &sched) {
    seq.validate();
    if (seq.head_dim != sched.head_dim()) throw Error(ErrorCode::DimensionMismatch, "sequence and schedule head_dim differ");
    if (frequency_index < 1 || frequency_index > sched.num_frequencies()) {
        throw Error(ErrorCode::IndexOutOfRange, "frequency index must lie in 1..d/2");
    }
    const auto base = static_cast<std::size_t>(2 * (frequency_index - 1));
    const double angle = sched.effective_angle(frequency_index);
    CausalMatrix out(seq.size());
    for (std::int64_t i = 0; i < seq.size(); ++i) {
        const double *q = seq.query(i).data() + base;
        for (std::int64_t j = 0; j <= i; ++j) {
            const double *k = seq.key(j).data() + base;
            const std::int64_t offset =
                seq.positions[static_cast<std::size_t>(j)] - seq.positions[static_cast<std::size_t>(i)];
            out.at(i, j) = angle == 0.0 ? detail::plain_chunk_dot(q, k)
                                        : detail::rotated_chunk_dot(q, k, phase_cos_sin(offset, angle));
        }
    }
    return out;
}

}  // namespace ropelab
