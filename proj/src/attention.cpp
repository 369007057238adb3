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
#include "ropelab/attention.hpp"

#include <cmath>
#include <memory>
#include <ostream>

#include "ropelab/errors.hpp"
#include "ropelab/io.hpp"

namespace ropelab {

namespace {

// Above this many cached rotations, activations() falls back to on-the-fly trig.
constexpr std::size_t kMaxTableEntries = std::size_t{1} << 22;

double rotary_entry(const double *q, const double *k, std::int64_t back, const RelativeRotationTable &table,
                    const std::vector<bool> &mask, int half) {
    double acc = 0.0;
    for (int c = 0; c < half; ++c) {
        if (mask[static_cast<std::size_t>(c)]) {
            acc += detail::rotated_chunk_dot(q + 2 * c, k + 2 * c, table.at(back, c + 1));
        } else {
            acc += detail::plain_chunk_dot(q + 2 * c, k + 2 * c);
        }
    }
    return acc;
}

void softmax_row(std::span<const double> logits, std::span<double> out) {
    double peak = logits[0];
    for (double a : logits) {
        if (!std::isfinite(a)) throw Error(ErrorCode::NonFiniteActivation, "activation matrix holds a non-finite logit");
        if (a > peak) peak = a;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] - peak);
        total += out[j];
    }
    for (double &x : out) x /= total;
}

}  // namespace

HeadSequence HeadSequence::zeros(std::int64_t n, int head_dim) {
    if (n < 0) throw Error(ErrorCode::InvalidRange, "sequence length must be >= 0");
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::InvalidDimension, "head_dim must be even and >= 2");
    HeadSequence seq;
    seq.head_dim = head_dim;
    seq.queries.assign(static_cast<std::size_t>(n * head_dim), 0.0);
    seq.keys.assign(static_cast<std::size_t>(n * head_dim), 0.0);
    seq.positions.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) seq.positions[static_cast<std::size_t>(i)] = i;
    return seq;
}

std::span<const double> HeadSequence::query(std::int64_t i) const {
    return {queries.data() + i * head_dim, static_cast<std::size_t>(head_dim)};
}
std::span<const double> HeadSequence::key(std::int64_t i) const {
    return {keys.data() + i * head_dim, static_cast<std::size_t>(head_dim)};
}
std::span<double> HeadSequence::query(std::int64_t i) {
    return {queries.data() + i * head_dim, static_cast<std::size_t>(head_dim)};
}
std::span<double> HeadSequence::key(std::int64_t i) {
    return {keys.data() + i * head_dim, static_cast<std::size_t>(head_dim)};
}

void HeadSequence::validate() const {
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::InvalidDimension, "head_dim must be even and >= 2");
    const auto expected = positions.size() * static_cast<std::size_t>(head_dim);
    if (queries.size() != expected || keys.size() != expected) {
        throw Error(ErrorCode::DimensionMismatch, "queries/keys must both be N x head_dim");
    }
    if (!labels.empty() && labels.size() != positions.size()) {
        throw Error(ErrorCode::DimensionMismatch, "labels must be empty or one per token");
    }
    for (std::size_t i = 1; i < positions.size(); ++i) {
        if (positions[i] <= positions[i - 1]) throw Error(ErrorCode::InvalidRange, "positions must be strictly increasing");
    }
}

ActivationMatrix activations(const HeadSequence &seq, const EncodingKind &kind, const FrequencySchedule &sched) {
    seq.validate();
    if (seq.head_dim != sched.head_dim()) throw Error(ErrorCode::DimensionMismatch, "sequence and schedule head_dim differ");
    detail::check_kind_schedule(kind, sched);

    const std::int64_t n = seq.size();
    const int d = seq.head_dim;
    ActivationMatrix out(n);
    if (n == 0) return out;

    if (kind.family == EncodingFamily::NoPE) {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j <= i; ++j) out.at(i, j) = detail::nope_dot(seq.query(i), seq.key(j));
        }
        return out;
    }

    const std::int64_t span = seq.positions.back() - seq.positions.front();
    if (RelativeRotationTable::footprint(span, d) > kMaxTableEntries) {
#pragma omp parallel for schedule(dynamic, 16)
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j <= i; ++j) {
                out.at(i, j) = kernel(seq.query(i), seq.key(j), seq.positions[static_cast<std::size_t>(i)],
                                      seq.positions[static_cast<std::size_t>(j)], kind, sched);
            }
        }
        return out;
    }

    const RelativeRotationTable table(sched, span);
    const auto &mask = sched.mask();
    const int half = d / 2;
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) {
        const double *q = seq.query(i).data();
        const std::int64_t pos_i = seq.positions[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j <= i; ++j) {
            const std::int64_t back = pos_i - seq.positions[static_cast<std::size_t>(j)];
            out.at(i, j) = rotary_entry(q, seq.key(j).data(), back, table, mask, half);
        }
    }
    return out;
}

AttentionMatrix attention(const ActivationMatrix &act) {
    const std::int64_t n = act.size();
    AttentionMatrix out(n);
    // Exceptions must not escape an OpenMP region; record and rethrow.
    bool non_finite = false;
#pragma omp parallel for schedule(dynamic, 32) reduction(|| : non_finite)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            softmax_row(act.row(i), out.row(i));
        } catch (const Error &) {
            non_finite = true;
        }
    }
    if (non_finite) throw Error(ErrorCode::NonFiniteActivation, "activation matrix holds a non-finite logit");
    return out;
}

RowArgmax argmax_row(const CausalMatrix &m, std::int64_t i) {
    if (i < 0 || i >= m.size()) throw Error(ErrorCode::IndexOutOfRange, "row index out of range");
    const auto row = m.row(i);
    RowArgmax best;
    for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[static_cast<std::size_t>(best.index)]) {
            best.index = static_cast<std::int64_t>(j);
            best.tied = false;
        } else if (row[j] == row[static_cast<std::size_t>(best.index)]) {
            best.tied = true;
        }
    }
    return best;
}

void write_csv(std::ostream &os, const CausalMatrix &m) {
    const std::int64_t n = m.size();
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            if (j > 0) os << ',';
            if (!CausalMatrix::masked(i, j)) os << format_double(m.at(i, j));
        }
        os << '\n';
    }
}

namespace reference {

ActivationMatrix activations(const HeadSequence &seq, const EncodingKind &kind, const FrequencySchedule &sched) {
    seq.validate();
    if (seq.head_dim != sched.head_dim()) throw Error(ErrorCode::DimensionMismatch, "sequence and schedule head_dim differ");
    const std::int64_t n = seq.size();
    ActivationMatrix out(n);
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j <= i; ++j) {
            out.at(i, j) = kernel(seq.query(i), seq.key(j), seq.positions[static_cast<std::size_t>(i)],
                                  seq.positions[static_cast<std::size_t>(j)], kind, sched);
        }
    }
    return out;
}

AttentionMatrix attention(const ActivationMatrix &act) {
    AttentionMatrix out(act.size());
    for (std::int64_t i = 0; i < act.size(); ++i) softmax_row(act.row(i), out.row(i));
    return out;
}

}  // namespace reference

}  // namespace ropelab
