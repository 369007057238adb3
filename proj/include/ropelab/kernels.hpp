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
#include <vector>

#include "ropelab/rotations.hpp"

namespace ropelab {

enum class EncodingFamily { NoPE, RoPE, PRoPE, PRoPEReversed, PartialRoPE, RandomRoPE };

/// Positional-encoding variant of an attention kernel.
struct EncodingKind {
    EncodingFamily family = EncodingFamily::RoPE;
    double p = 1.0;            // fraction for the p-variants
    std::int64_t max_position = 0;  // L for RandomRoPE
    std::uint64_t seed = 0;    // RandomRoPE sampler seed

    static EncodingKind nope() { return {EncodingFamily::NoPE, 0.0, 0, 0}; }
    static EncodingKind rope() { return {EncodingFamily::RoPE, 1.0, 0, 0}; }
    static EncodingKind prope(double p);
    static EncodingKind prope_reversed(double p);
    static EncodingKind partial(double p);
    static EncodingKind random_rope(std::int64_t max_position, std::uint64_t seed);

    /// e.g. "RoPE", "p-RoPE(0.75)", "RandomRoPE(L=4096)".
    std::string name() const;
};

/// p-RoPE: the floor(p*d/2) fastest frequencies keep their angles, the
/// slowest ones get zero angular velocity. p = 0 is NoPE, p = 1 is RoPE.
FrequencySchedule make_prope_schedule(double p, double theta, int head_dim);

/// Mirror image of p-RoPE: keeps the floor(p*d/2) slowest frequencies.
FrequencySchedule make_reversed_prope_schedule(double p, double theta, int head_dim);

/// Partial rotary embedding: the first floor(p*d/2) chunks rotate with a
/// schedule recomputed over d_rot = 2*floor(p*d/2); the rest do not rotate.
FrequencySchedule make_partial_rope_schedule(double p, double theta, int head_dim);

/// Number of frequencies the p-variants keep.
int kept_frequencies(double p, int head_dim);

/// The schedule each encoding kind expects.
FrequencySchedule schedule_for(const EncodingKind &kind, double theta, int head_dim);

/// a_{ij} for one query/key pair. RoPE-family kinds compute
/// q^T R^(pos_k - pos_q) k chunk by chunk (one relative rotation per chunk);
/// NoPE is the plain dot product, accumulated in the same chunk order so that
/// an all-masked schedule reproduces it exactly. No 1/sqrt(d) factor.
///
/// Throws DimensionMismatch on length mismatch and ScheduleMismatch when
/// `sched` was not built for `kind`.
double kernel(std::span<const double> q, std::span<const double> k, std::int64_t pos_q, std::int64_t pos_k,
              const EncodingKind &kind, const FrequencySchedule &sched);

/// Strictly increasing sample of N distinct integers from [1, L] (Floyd's
/// algorithm, then sorted). Deterministic in (N, L, seed).
std::vector<std::int64_t> sample_random_positions(std::int64_t n, std::int64_t max_position, std::uint64_t seed);

namespace detail {

inline double plain_chunk_dot(const double *q, const double *k) { return q[0] * k[0] + q[1] * k[1]; }

inline double rotated_chunk_dot(const double *q, const double *k, CosSin r) {
    const double kx = r.c * k[0] - r.s * k[1];
    const double ky = r.s * k[0] + r.c * k[1];
    return q[0] * kx + q[1] * ky;
}

/// Shared by kernel() and the activation builders so that both produce the
/// same bits.
double nope_dot(std::span<const double> q, std::span<const double> k);

void check_kind_schedule(const EncodingKind &kind, const FrequencySchedule &sched);

}  // namespace detail

}  // namespace ropelab
