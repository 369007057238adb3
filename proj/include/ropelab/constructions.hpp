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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ropelab/attention.hpp"

namespace ropelab {

enum class ConstructionKind { ArbitraryDistance, Diagonal, PreviousToken, Apostrophe };

/// Two-channel head that attends to BOS by default and to a directly
/// preceding apostrophe token when there is one. The semantic channel holds
/// the chunk vectors measured on a production model's apostrophe head.
struct ApostropheConfig {
    int semantic_index = 119;  // 1-based frequency of the BOS channel
    std::array<double, 2> q_not_bos{-4.1, 11.3};
    std::array<double, 2> k_not_bos{11.2, -3.5};
    std::array<double, 2> q_bos{0.7, -1.9};
    std::array<double, 2> k_bos{-2.5, 1.3};
    /// Token indices (>= 1) that are apostrophes. Their keys carry the
    /// previous-token pattern on frequency 1.
    std::vector<std::int64_t> apostrophe_tokens{3, 9, 17};
};

/// Query/key recipe built from a base vector psi.
///
/// - ArbitraryDistance(r): q = psi, k = R^r psi; row i peaks at j = i - r.
/// - Diagonal: q = k = psi.
/// - PreviousToken: q = psi, k = R psi.
/// - Apostrophe: chunk 1 of psi drives the previous-token channel, the
///   semantic chunk comes from `apostrophe`.
struct Construction {
    ConstructionKind kind = ConstructionKind::Diagonal;
    std::int64_t r = 0;
    std::vector<double> psi;
    FrequencySchedule sched = make_schedule(10000.0, 2);
    ApostropheConfig apostrophe{};
};

/// psi with every chunk of squared norm norm_sq / (d/2), pointing along the
/// first axis of its chunk.
std::vector<double> equal_chunk_psi(double norm_sq, int head_dim);

/// Default psi for the apostrophe head: chunk 1 = [11, 0], rest zero.
std::vector<double> apostrophe_default_psi(int head_dim);

/// Throws DegenerateConstruction for a zero psi and DimensionMismatch when
/// psi does not match the schedule.
HeadSequence build(const Construction &cons, std::int64_t n);

/// alpha_{i,i} of the diagonal construction in closed form, with psi split
/// into equal-norm chunks over `angles` (one entry per chunk; use 0 for a
/// masked chunk):
///   1 / (1 + sum_{m=1..i} exp(sum_k |psi_k|^2 (cos(m g_k) - 1))).
double diagonal_alpha_closed_form(double psi_norm_sq, std::span<const double> angles, std::int64_t i);

/// Smallest |psi|^2 (bisection on the closed form, relative tolerance 1e-6)
/// with alpha_{i,i} > 1 - eps for every i < n. Returns +inf when some
/// relative offset never rotates away from alignment, so no norm suffices.
double min_norm_for_epsilon(double eps, std::int64_t n, std::span<const double> angles);

struct BoundGapRow {
    std::int64_t position = 0;
    double upper_bound = 0.0;       // |q_i||k_i| / sqrt(d)
    double diag_logit = 0.0;        // q_i^T k_i / sqrt(d)
    double prev_upper_bound = 0.0;  // |q_i||k_{i-1}| / sqrt(d); NaN at i = 0
    double prev_logit = 0.0;        // q_i^T R^-1 k_{i-1} / sqrt(d); NaN at i = 0
    double diag_ratio = 0.0;
    double prev_ratio = 0.0;
};

struct BoundGapReport {
    std::vector<BoundGapRow> rows;
};

/// Cauchy-Schwarz diagnostic: compares diagonal and previous-token logits
/// against the norm-product bound, all scaled by 1/sqrt(d). Encoding is
/// inferred from the schedule variant.
BoundGapReport cauchy_schwarz_diag(const HeadSequence &seq, const FrequencySchedule &sched);

/// Columns: position, upper_bound, diag_logit, prev_logit, diag_ratio, prev_ratio.
void write_csv(std::ostream &os, const BoundGapReport &report);

/// Contribution of a single frequency to every causal logit:
/// <q_i^(k), rho(g_k)^(pos_j - pos_i) k_j^(k)>. Throws IndexOutOfRange.
CausalMatrix apostrophe_channel_report(const HeadSequence &seq, int frequency_index, const FrequencySchedule &sched);

}  // namespace ropelab
