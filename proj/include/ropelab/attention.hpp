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

#include "ropelab/kernels.hpp"

namespace ropelab {

/// Queries and keys of one attention head over N tokens, stored row-major
/// (N x d). Positions default to 0..N-1 and must be strictly increasing.
struct HeadSequence {
    int head_dim = 0;
    std::vector<double> queries;
    std::vector<double> keys;
    std::vector<std::int64_t> positions;
    std::vector<std::string> labels;  // optional per-token tags ("BOS", "'", ...)

    /// N tokens of zeros at positions 0..N-1.
    static HeadSequence zeros(std::int64_t n, int head_dim);

    std::int64_t size() const noexcept { return static_cast<std::int64_t>(positions.size()); }
    std::span<const double> query(std::int64_t i) const;
    std::span<const double> key(std::int64_t i) const;
    std::span<double> query(std::int64_t i);
    std::span<double> key(std::int64_t i);

    /// Throws DimensionMismatch / InvalidRange when the invariants do not hold.
    void validate() const;
};

/// Dense N x N causal matrix; entries with j > i are masked and hold 0.
class CausalMatrix {
public:
    CausalMatrix() = default;
    explicit CausalMatrix(std::int64_t n) : n_(n), values_(static_cast<std::size_t>(n * n), 0.0) {}

    std::int64_t size() const noexcept { return n_; }
    static bool masked(std::int64_t i, std::int64_t j) noexcept { return j > i; }

    double at(std::int64_t i, std::int64_t j) const { return values_[index(i, j)]; }
    double &at(std::int64_t i, std::int64_t j) { return values_[index(i, j)]; }

    /// The i+1 unmasked entries of row i.
    std::span<const double> row(std::int64_t i) const {
        return {values_.data() + i * n_, static_cast<std::size_t>(i + 1)};
    }
    std::span<double> row(std::int64_t i) { return {values_.data() + i * n_, static_cast<std::size_t>(i + 1)}; }

    const std::vector<double> &values() const noexcept { return values_; }

    friend bool operator==(const CausalMatrix &, const CausalMatrix &) = default;

private:
    std::size_t index(std::int64_t i, std::int64_t j) const { return static_cast<std::size_t>(i * n_ + j); }

    std::int64_t n_ = 0;
    std::vector<double> values_;
};

/// Logits a_{ij} = kernel(q_i, k_j, pos_i, pos_j).
class ActivationMatrix : public CausalMatrix {
public:
    using CausalMatrix::CausalMatrix;
};

/// Row-wise causal softmax of an ActivationMatrix.
class AttentionMatrix : public CausalMatrix {
public:
    using CausalMatrix::CausalMatrix;
};

/// Parallel over rows. RoPE-family kinds reuse a relative-rotation table when
/// the position span is small enough; results are bit-identical to calling
/// kernel() entrywise.
ActivationMatrix activations(const HeadSequence &seq, const EncodingKind &kind, const FrequencySchedule &sched);

/// Causal softmax, stabilized by subtracting the row maximum.
/// Throws NonFiniteActivation on NaN/inf logits.
AttentionMatrix attention(const ActivationMatrix &act);

struct RowArgmax {
    std::int64_t index = 0;
    bool tied = false;
};

/// Largest coefficient in row i (j <= i); ties resolve to the smallest j and
/// set `tied`.
RowArgmax argmax_row(const CausalMatrix &m, std::int64_t i);

/// Row-major CSV, masked entries as empty fields.
void write_csv(std::ostream &os, const CausalMatrix &m);

namespace reference {

/// Serial entrywise loop over kernel(); the oracle for activations().
ActivationMatrix activations(const HeadSequence &seq, const EncodingKind &kind, const FrequencySchedule &sched);

/// Serial softmax.
AttentionMatrix attention(const ActivationMatrix &act);

}  // namespace reference

}  // namespace ropelab
