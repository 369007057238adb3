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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace ropelab {

enum class Tensor { Q, K, V };

std::string_view to_string(Tensor t);

/// Per-layer, per-head Q/K/V activations, each laid out
/// (layer, head, position, dim) row-major.
///
/// On disk ("QKT1"): the 4 magic bytes `QKT1`, five little-endian uint32
/// (version = 1, L, H, N, d), then Q, K and V as little-endian IEEE-754
/// float32 in the layout above. Nothing follows V.
struct QKVTensorFile {
    std::uint32_t layers = 0;
    std::uint32_t heads = 0;
    std::uint32_t seq_len = 0;
    std::uint32_t head_dim = 0;
    std::vector<float> q;
    std::vector<float> k;
    std::vector<float> v;

    static QKVTensorFile zeros(std::uint32_t layers, std::uint32_t heads, std::uint32_t seq_len, std::uint32_t head_dim);

    std::size_t slice_size() const noexcept { return static_cast<std::size_t>(seq_len) * head_dim; }
    std::size_t element_count() const noexcept { return static_cast<std::size_t>(layers) * heads * slice_size(); }

    const std::vector<float> &tensor(Tensor t) const;
    std::vector<float> &tensor(Tensor t);
    /// The N x d block of one (layer, head).
    std::span<const float> slice(Tensor t, std::uint32_t layer, std::uint32_t head) const;
    std::span<float> slice(Tensor t, std::uint32_t layer, std::uint32_t head);

    /// d even, sizes consistent, every value finite. Throws Format.
    void validate() const;
};

inline constexpr std::uint32_t kQkt1Version = 1;

void write_qkt1(std::ostream &os, const QKVTensorFile &file);
void write_qkt1(const std::filesystem::path &path, const QKVTensorFile &file);
QKVTensorFile read_qkt1(std::istream &is);
QKVTensorFile read_qkt1(const std::filesystem::path &path);

/// Mean Euclidean norm of each 2-d chunk over the N rows of an N x d slice,
/// summed in double in ascending order so that
/// the result does not depend on row order. Throws DimensionMismatch.
std::vector<double> chunk_norms(std::span<const float> slice, int head_dim);
std::vector<double> chunk_norms(std::span<const double> slice, int head_dim);

enum class GroupBy { Layer, Head };

/// Rows are layers (means over heads) or the heads of one layer; columns are
/// frequency indices 1..d/2, fastest first.
struct NormProfile {
    GroupBy group_by = GroupBy::Layer;
    std::uint32_t layer_index = 0;  // meaningful for GroupBy::Head
    Tensor which = Tensor::Q;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // rows x cols

    /// 1-based frequency index.
    double mean_norm(std::size_t row, int k) const { return values[row * cols + static_cast<std::size_t>(k - 1)]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// Parallel over (layer, head). Layer rows are the head rows averaged in head
/// order, so the output does not depend on the thread count.
/// Throws IndexOutOfRange for a bad layer_index.
NormProfile profile(const QKVTensorFile &file, Tensor which, GroupBy group_by, std::uint32_t layer_index = 0);

/// Columns: group, frequency_index, mean_norm.
void write_csv(std::ostream &os, const NormProfile &p);

inline constexpr int kDefaultHiBand = 8;
inline constexpr double kDefaultRatioThreshold = 2.0;

/// Heads whose mean norm over the `hi_band` fastest frequencies is at least
/// ratio_threshold times their mean over all frequencies, in both Q and K.
std::vector<std::uint32_t> detect_positional_heads(const NormProfile &profile_q, const NormProfile &profile_k,
                                                   int hi_band = kDefaultHiBand,
                                                   double ratio_threshold = kDefaultRatioThreshold);

// Synthetic fixtures.

/// IID standard normal Q, K and V.
QKVTensorFile gaussian_fixture(std::uint32_t layers, std::uint32_t heads, std::uint32_t seq_len,
                               std::uint32_t head_dim, std::uint64_t seed);

/// Gaussian background with a shared low-frequency band, plus Q/K mass on the
/// two fastest chunks of `positional_heads` in every layer.
QKVTensorFile positional_heads_fixture(std::uint32_t layers, std::uint32_t heads, std::uint32_t seq_len,
                                       std::uint32_t head_dim, std::uint64_t seed,
                                       std::span<const std::uint32_t> positional_heads);

/// Q = K = psi (diagonal construction) with psi concentrated on chunk 1 and
/// small Gaussian jitter elsewhere; V Gaussian.
QKVTensorFile diagonal_fixture(std::uint32_t layers, std::uint32_t heads, std::uint32_t seq_len,
                               std::uint32_t head_dim, std::uint64_t seed);

namespace reference {

NormProfile profile(const QKVTensorFile &file, Tensor which, GroupBy group_by, std::uint32_t layer_index = 0);

}  // namespace reference

}  // namespace ropelab
