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
#include "ropelab/analysis.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ropelab/errors.hpp"
#include "ropelab/io.hpp"
#include "ropelab/rng.hpp"

namespace ropelab {

namespace {

constexpr std::array<char, 4> kMagic{'Q', 'K', 'T', '1'};

void put_u32(std::ostream &os, std::uint32_t x) {
    const char bytes[4] = {static_cast<char>(x & 0xffU), static_cast<char>((x >> 8) & 0xffU),
                           static_cast<char>((x >> 16) & 0xffU), static_cast<char>((x >> 24) & 0xffU)};
    os.write(bytes, 4);
}

std::uint32_t get_u32(const unsigned char *b) {
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_floats(std::ostream &os, const std::vector<float> &xs) {
    std::string buf(xs.size() * 4, '\0');
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(xs[i]);
        for (int b = 0; b < 4; ++b) buf[4 * i + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xffU);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void read_exact(std::istream &is, char *dst, std::size_t n, const char *what) {
    is.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) {
        throw Error(ErrorCode::Format, std::string("QKT1: truncated ") + what);
    }
}

void read_floats(std::istream &is, std::vector<float> &xs, const char *what) {
    std::string buf(xs.size() * 4, '\0');
    read_exact(is, buf.data(), buf.size(), what);
    const auto *b = reinterpret_cast<const unsigned char *>(buf.data());
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::bit_cast<float>(get_u32(b + 4 * i));
}

template <typename T>
std::vector<double> chunk_norms_impl(std::span<const T> slice, int head_dim) {
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::InvalidDimension, "head_dim must be even and >= 2");
    const auto d = static_cast<std::size_t>(head_dim);
    if (slice.size() % d != 0) throw Error(ErrorCode::DimensionMismatch, "slice length is not a multiple of head_dim");
    const std::size_t rows = slice.size() / d;
    std::vector<double> out(d / 2, 0.0);
    if (rows == 0) return out;
    // Summing each column in ascending order makes the mean independent of row order.
    std::vector<double> norms(rows);
    for (std::size_t k = 0; k < d / 2; ++k) {
        for (std::size_t r = 0; r < rows; ++r) {
            const T *row = slice.data() + r * d;
            norms[r] = std::hypot(static_cast<double>(row[2 * k]), static_cast<double>(row[2 * k + 1]));
        }
        std::sort(norms.begin(), norms.end());
        double sum = 0.0;
        for (double x : norms) sum += x;
        out[k] = sum / static_cast<double>(rows);
    }
    return out;
}

void check_layer(const QKVTensorFile &file, GroupBy group_by, std::uint32_t layer_index) {
    if (group_by == GroupBy::Head && layer_index >= file.layers) {
        throw Error(ErrorCode::IndexOutOfRange, "layer_index " + std::to_string(layer_index) + " out of range (L=" +
                                                    std::to_string(file.layers) + ")");
    }
}

NormProfile empty_profile(const QKVTensorFile &file, Tensor which, GroupBy group_by, std::uint32_t layer_index) {
    NormProfile p;
    p.group_by = group_by;
    p.layer_index = layer_index;
    p.which = which;
    p.rows = group_by == GroupBy::Layer ? file.layers : file.heads;
    p.cols = file.head_dim / 2;
    p.values.assign(p.rows * p.cols, 0.0);
    return p;
}

// head_norms holds one row per (layer, head) in the requested range.
void fold_profile(NormProfile &p, const std::vector<std::vector<double>> &head_norms, std::uint32_t heads) {
    if (p.group_by == GroupBy::Head) {
        for (std::size_t h = 0; h < p.rows; ++h) std::copy(head_norms[h].begin(), head_norms[h].end(), p.values.begin() + static_cast<std::ptrdiff_t>(h * p.cols));
        return;
    }
    for (std::size_t l = 0; l < p.rows; ++l) {
        for (std::size_t k = 0; k < p.cols; ++k) {
            double sum = 0.0;
            for (std::uint32_t h = 0; h < heads; ++h) sum += head_norms[l * heads + h][k];
            p.values[l * p.cols + k] = sum / static_cast<double>(heads);
        }
    }
}

void fill_gaussian(std::span<float> out, std::uint64_t seed, std::uint64_t stream, double scale = 1.0) {
    Rng rng(seed, stream);
    for (float &x : out) x = static_cast<float>(scale * rng.normal());
}

std::uint64_t stream_id(Tensor t, std::uint32_t layer, std::uint32_t head, std::uint32_t heads) {
    return (static_cast<std::uint64_t>(t) << 40) | (static_cast<std::uint64_t>(layer) * heads + head);
}

}  // namespace

std::string_view to_string(Tensor t) {
    switch (t) {
    case Tensor::Q: return "Q";
    case Tensor::K: return "K";
    case Tensor::V: return "V";
    }
    return "?";
}

QKVTensorFile QKVTensorFile::zeros(std::uint32_t layers, std::uint32_t heads, std::uint32_t seq_len,
                                   std::uint32_t head_dim) {
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::InvalidDimension, "head_dim must be even and >= 2");
    QKVTensorFile f;
    f.layers = layers;
    f.heads = heads;
    f.seq_len = seq_len;
    f.head_dim = head_dim;
    f.q.assign(f.element_count(), 0.0f);
    f.k.assign(f.element_count(), 0.0f);
    f.v.assign(f.element_count(), 0.0f);
    return f;
}

const std::vector<float> &QKVTensorFile::tensor(Tensor t) const {
    switch (t) {
    case Tensor::Q: return q;
    case Tensor::K: return k;
    case Tensor::V: break;
    }
    return v;
}

std::vector<float> &QKVTensorFile::tensor(Tensor t) {
    return const_cast<std::vector<float> &>(std::as_const(*this).tensor(t));
}

std::span<const float> QKVTensorFile::slice(Tensor t, std::uint32_t layer, std::uint32_t head) const {
    if (layer >= layers || head >= heads) throw Error(ErrorCode::IndexOutOfRange, "layer/head out of range");
    const std::size_t offset = (static_cast<std::size_t>(layer) * heads + head) * slice_size();
    return {tensor(t).data() + offset, slice_size()};
}

std::span<float> QKVTensorFile::slice(Tensor t, std::uint32_t layer, std::uint32_t head) {
    if (layer >= layers || head >= heads) throw Error(ErrorCode::IndexOutOfRange, "layer/head out of range");
    const std::size_t offset = (static_cast<std::size_t>(layer) * heads + head) * slice_size();
    return {tensor(t).data() + offset, slice_size()};
}

void QKVTensorFile::validate() const {
    if (head_dim < 2 || head_dim % 2 != 0) throw Error(ErrorCode::Format, "QKT1: head_dim must be even and >= 2");
    for (Tensor t : {Tensor::Q, Tensor::K, Tensor::V}) {
        const auto &xs = tensor(t);
        if (xs.size() != element_count()) {
            throw Error(ErrorCode::Format, std::string("QKT1: tensor ") + std::string(to_string(t)) + " has the wrong size");
        }
        for (float x : xs) {
            if (!std::isfinite(x)) {
                throw Error(ErrorCode::Format, std::string("QKT1: non-finite value in ") + std::string(to_string(t)));
            }
        }
    }
}

void write_qkt1(std::ostream &os, const QKVTensorFile &file) {
    file.validate();
    os.write(kMagic.data(), kMagic.size());
    for (std::uint32_t x : {kQkt1Version, file.layers, file.heads, file.seq_len, file.head_dim}) put_u32(os, x);
    write_floats(os, file.q);
    write_floats(os, file.k);
    write_floats(os, file.v);
    if (!os) throw Error(ErrorCode::Io, "QKT1: write failed");
}

void write_qkt1(const std::filesystem::path &path, const QKVTensorFile &file) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    write_qkt1(os, file);
}

QKVTensorFile read_qkt1(std::istream &is) {
    std::array<char, 4> magic{};
    read_exact(is, magic.data(), magic.size(), "magic");
    if (magic != kMagic) throw Error(ErrorCode::Format, "QKT1: bad magic");
    unsigned char header[20];
    read_exact(is, reinterpret_cast<char *>(header), sizeof(header), "header");
    const std::uint32_t version = get_u32(header);
    if (version != kQkt1Version) throw Error(ErrorCode::Format, "QKT1: unsupported version " + std::to_string(version));
    QKVTensorFile f;
    f.layers = get_u32(header + 4);
    f.heads = get_u32(header + 8);
    f.seq_len = get_u32(header + 12);
    f.head_dim = get_u32(header + 16);
    if (f.head_dim < 2 || f.head_dim % 2 != 0) throw Error(ErrorCode::Format, "QKT1: head_dim must be even and >= 2");
    f.q.resize(f.element_count());
    f.k.resize(f.element_count());
    f.v.resize(f.element_count());
    read_floats(is, f.q, "Q");
    read_floats(is, f.k, "K");
    read_floats(is, f.v, "V");
    if (is.peek() != std::istream::traits_type::eof()) throw Error(ErrorCode::Format, "QKT1: trailing bytes after V");
    f.validate();
    return f;
}

QKVTensorFile read_qkt1(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return read_qkt1(is);
}

std::vector<double> chunk_norms(std::span<const float> slice, int head_dim) { return chunk_norms_impl(slice, head_dim); }
std::vector<double> chunk_norms(std::span<const double> slice, int head_dim) { return chunk_norms_impl(slice, head_dim); }

NormProfile profile(const QKVTensorFile &file, Tensor which, GroupBy group_by, std::uint32_t layer_index) {
    check_layer(file, group_by, layer_index);
    NormProfile p = empty_profile(file, which, group_by, layer_index);
    const std::uint32_t first_layer = group_by == GroupBy::Head ? layer_index : 0;
    const std::uint32_t layer_count = group_by == GroupBy::Head ? 1 : file.layers;
    const auto jobs = static_cast<std::int64_t>(layer_count) * file.heads;
    std::vector<std::vector<double>> head_norms(static_cast<std::size_t>(jobs));
    const int d = static_cast<int>(file.head_dim);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t job = 0; job < jobs; ++job) {
        const auto layer = first_layer + static_cast<std::uint32_t>(job / file.heads);
        const auto head = static_cast<std::uint32_t>(job % file.heads);
        head_norms[static_cast<std::size_t>(job)] = chunk_norms(file.slice(which, layer, head), d);
    }
    fold_profile(p, head_norms, file.heads);
    return p;
}

namespace reference {

NormProfile profile(const QKVTensorFile &file, Tensor which, GroupBy group_by, std::uint32_t layer_index) {
    check_layer(file, group_by, layer_index);
    NormProfile p = empty_profile(file, which, group_by, layer_index);
    const std::uint32_t first_layer = group_by == GroupBy::Head ? layer_index : 0;
    const std::uint32_t layer_count = group_by == GroupBy::Head ? 1 : file.layers;
    std::vector<std::vector<double>> head_norms;
    for (std::uint32_t l = first_layer; l < first_layer + layer_count; ++l) {
        for (std::uint32_t h = 0; h < file.heads; ++h) {
            head_norms.push_back(chunk_norms(file.slice(which, l, h), static_cast<int>(file.head_dim)));
        }
    }
    fold_profile(p, head_norms, file.heads);
    return p;
}

}  // namespace reference

void write_csv(std::ostream &os, const NormProfile &p) {
    os << "group,frequency_index,mean_norm\n";
    for (std::size_t r = 0; r < p.rows; ++r) {
        for (std::size_t k = 0; k < p.cols; ++k) {
            os << r << ',' << (k + 1) << ',' << format_double(p.values[r * p.cols + k]) << '\n';
        }
    }
}

std::vector<std::uint32_t> detect_positional_heads(const NormProfile &profile_q, const NormProfile &profile_k,
                                                   int hi_band, double ratio_threshold) {
    if (profile_q.rows != profile_k.rows || profile_q.cols != profile_k.cols) {
        throw Error(ErrorCode::DimensionMismatch, "Q and K profiles cover different heads or frequencies");
    }
    if (hi_band < 1 || static_cast<std::size_t>(hi_band) > profile_q.cols) {
        throw Error(ErrorCode::InvalidRange, "hi_band must lie in 1..d/2");
    }
    const auto band_mean = [](std::span<const double> row, std::size_t count) {
        double s = 0.0;
        for (std::size_t k = 0; k < count; ++k) s += row[k];
        return s / static_cast<double>(count);
    };
    const auto uses_high = [&](std::span<const double> row) {
        return band_mean(row, static_cast<std::size_t>(hi_band)) >= ratio_threshold * band_mean(row, row.size());
    };
    std::vector<std::uint32_t> heads;
    for (std::size_t h = 0; h < profile_q.rows; ++h) {
        if (uses_high(profile_q.row(h)) && uses_high(profile_k.row(h))) heads.push_back(static_cast<std::uint32_t>(h));
    }
    return heads;
}

QKVTensorFile gaussian_fixture(std::uint32_t layers, std::uint32_t heads, std::uint32_t seq_len,
                               std::uint32_t head_dim, std::uint64_t seed) {
    QKVTensorFile f = QKVTensorFile::zeros(layers, heads, seq_len, head_dim);
    for (Tensor t : {Tensor::Q, Tensor::K, Tensor::V}) {
        for (std::uint32_t l = 0; l < layers; ++l) {
            for (std::uint32_t h = 0; h < heads; ++h) fill_gaussian(f.slice(t, l, h), seed, stream_id(t, l, h, heads));
        }
    }
    return f;
}

QKVTensorFile positional_heads_fixture(std::uint32_t layers, std::uint32_t heads, std::uint32_t seq_len,
                                       std::uint32_t head_dim, std::uint64_t seed,
                                       std::span<const std::uint32_t> positional_heads) {
    constexpr double kFastScale = 20.0;
    constexpr double kBandScale = 4.0;
    QKVTensorFile f = gaussian_fixture(layers, heads, seq_len, head_dim, seed);
    const std::uint32_t half = head_dim / 2;
    // A high-norm low-frequency band shared by all heads.
    const std::uint32_t band = half > 4 ? half - 3 : half;
    for (Tensor t : {Tensor::Q, Tensor::K}) {
        for (std::uint32_t l = 0; l < layers; ++l) {
            for (std::uint32_t h = 0; h < heads; ++h) {
                const bool positional =
                    std::find(positional_heads.begin(), positional_heads.end(), h) != positional_heads.end();
                auto s = f.slice(t, l, h);
                for (std::uint32_t n = 0; n < seq_len; ++n) {
                    float *row = s.data() + static_cast<std::size_t>(n) * head_dim;
                    const std::size_t b = 2 * static_cast<std::size_t>(band - 1);
                    row[b] = static_cast<float>(row[b] * kBandScale);
                    row[b + 1] = static_cast<float>(row[b + 1] * kBandScale);
                    if (!positional) continue;
                    for (std::size_t c = 0; c < std::min<std::size_t>(4, head_dim); ++c) {
                        row[c] = static_cast<float>(row[c] * kFastScale);
                    }
                }
            }
        }
    }
    return f;
}

QKVTensorFile diagonal_fixture(std::uint32_t layers, std::uint32_t heads, std::uint32_t seq_len,
                               std::uint32_t head_dim, std::uint64_t seed) {
    QKVTensorFile f = QKVTensorFile::zeros(layers, heads, seq_len, head_dim);
    for (std::uint32_t l = 0; l < layers; ++l) {
        for (std::uint32_t h = 0; h < heads; ++h) {
            Rng rng(seed, stream_id(Tensor::Q, l, h, heads));
            std::vector<float> psi(head_dim);
            for (float &x : psi) x = static_cast<float>(0.1 * rng.normal());
            psi[0] = 3.0f;
            psi[1] = 4.0f;
            auto q = f.slice(Tensor::Q, l, h);
            auto k = f.slice(Tensor::K, l, h);
            for (std::uint32_t n = 0; n < seq_len; ++n) {
                std::copy(psi.begin(), psi.end(), q.begin() + static_cast<std::ptrdiff_t>(n) * head_dim);
                std::copy(psi.begin(), psi.end(), k.begin() + static_cast<std::ptrdiff_t>(n) * head_dim);
            }
            fill_gaussian(f.slice(Tensor::V, l, h), seed, stream_id(Tensor::V, l, h, heads));
        }
    }
    return f;
}

}  // namespace ropelab
