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
#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "ropelab/analysis.hpp"
#include "ropelab/errors.hpp"
#include "ropelab/parallel.hpp"

namespace ropelab {
namespace {

ErrorCode code_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "no Error thrown";
    return ErrorCode::Io;
}

TEST(ChunkNorms, SmallExample) {
    // rows [3,4,0,1] and [0,0,1,0]: chunk 1 norms 5, 0; chunk 2 norms 1, 1.
    const std::vector<float> slice{3, 4, 0, 1, 0, 0, 1, 0};
    const auto n = chunk_norms(std::span<const float>(slice), 4);
    ASSERT_EQ(n.size(), 2U);
    EXPECT_DOUBLE_EQ(n[0], 2.5);
    EXPECT_DOUBLE_EQ(n[1], 1.0);
}

TEST(ChunkNorms, ScaleAndPermutationInvariance) {
    QKVTensorFile f = gaussian_fixture(1, 1, 64, 8, 3);
    const auto s = f.slice(Tensor::Q, 0, 0);
    const std::vector<double> base = chunk_norms(std::vector<double>(s.begin(), s.end()), 8);

    std::vector<double> scaled(s.begin(), s.end());
    for (double &x : scaled) x *= 4.0;
    const auto n4 = chunk_norms(scaled, 8);
    for (std::size_t k = 0; k < base.size(); ++k) EXPECT_DOUBLE_EQ(n4[k], 4.0 * base[k]);

    std::vector<double> perm;
    for (int row = 63; row >= 0; --row) {
        for (int c = 0; c < 8; ++c) perm.push_back(s[static_cast<std::size_t>(row * 8 + c)]);
    }
    EXPECT_EQ(chunk_norms(perm, 8), base);
}

TEST(ChunkNorms, RejectsBadShapes) {
    const std::vector<double> v(10, 1.0);
    EXPECT_EQ(code_of([&] { chunk_norms(v, 4); }), ErrorCode::DimensionMismatch);
    EXPECT_THROW(chunk_norms(v, 3), Error);
}

TEST(Profile, GaussianMeansNearRayleigh) {
    const QKVTensorFile f = gaussian_fixture(1, 4, 4096, 16, 1);
    const double expected = std::sqrt(std::numbers::pi / 2.0);
    for (Tensor t : {Tensor::Q, Tensor::K, Tensor::V}) {
        const NormProfile p = profile(f, t, GroupBy::Layer);
        ASSERT_EQ(p.rows, 1U);
        ASSERT_EQ(p.cols, 8U);
        for (int k = 1; k <= 8; ++k) EXPECT_NEAR(p.mean_norm(0, k), expected, 0.02 * expected);
    }
}

TEST(Profile, LayerRowIsMeanOfHeadRows) {
    const QKVTensorFile f = gaussian_fixture(2, 3, 32, 8, 9);
    const NormProfile by_layer = profile(f, Tensor::K, GroupBy::Layer);
    for (std::uint32_t l = 0; l < 2; ++l) {
        const NormProfile by_head = profile(f, Tensor::K, GroupBy::Head, l);
        ASSERT_EQ(by_head.rows, 3U);
        for (int k = 1; k <= 4; ++k) {
            double sum = 0.0;
            for (std::size_t h = 0; h < 3; ++h) sum += by_head.mean_norm(h, k);
            EXPECT_NEAR(by_layer.mean_norm(l, k), sum / 3.0, 1e-12);
        }
    }
    EXPECT_EQ(code_of([&] { profile(f, Tensor::K, GroupBy::Head, 2); }), ErrorCode::IndexOutOfRange);
}

TEST(Profile, ParallelMatchesReferenceBitwise) {
    const QKVTensorFile f = gaussian_fixture(2, 5, 128, 16, 4);
    for (int threads : {1, 3, 8}) {
        set_num_threads(threads);
        for (GroupBy g : {GroupBy::Layer, GroupBy::Head}) {
            EXPECT_EQ(profile(f, Tensor::Q, g, 1).values, reference::profile(f, Tensor::Q, g, 1).values);
        }
    }
    set_num_threads(0);
}

TEST(Profile, CsvLayout) {
    const QKVTensorFile f = gaussian_fixture(1, 1, 4, 4, 0);
    std::ostringstream os;
    write_csv(os, profile(f, Tensor::Q, GroupBy::Layer));
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "group,frequency_index,mean_norm");
    std::getline(is, line);
    EXPECT_EQ(line.rfind("0,1,", 0), 0U) << line;
    int rows = 1;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 2);
}

TEST(Detect, FindsPlantedHeads) {
    const std::vector<std::uint32_t> planted{5, 8};
    const QKVTensorFile f = positional_heads_fixture(1, 16, 1024, 64, 2, planted);
    const auto q = profile(f, Tensor::Q, GroupBy::Head, 0);
    const auto k = profile(f, Tensor::K, GroupBy::Head, 0);
    EXPECT_EQ(detect_positional_heads(q, k), planted);
}

TEST(Detect, GaussianHasNoPositionalHeads) {
    const QKVTensorFile f = gaussian_fixture(1, 8, 512, 64, 2);
    const auto q = profile(f, Tensor::Q, GroupBy::Head, 0);
    const auto k = profile(f, Tensor::K, GroupBy::Head, 0);
    EXPECT_TRUE(detect_positional_heads(q, k).empty());
}

TEST(Detect, FullBandEqualsTheMean) {
    const QKVTensorFile f = gaussian_fixture(1, 4, 64, 16, 2);
    const auto q = profile(f, Tensor::Q, GroupBy::Head, 0);
    const auto k = profile(f, Tensor::K, GroupBy::Head, 0);
    EXPECT_EQ(detect_positional_heads(q, k, 8, 1.0).size(), 4U);
    EXPECT_TRUE(detect_positional_heads(q, k, 8, 1.0001).empty());
}

TEST(Detect, Preconditions) {
    const QKVTensorFile f = gaussian_fixture(1, 4, 16, 16, 2);
    const auto q = profile(f, Tensor::Q, GroupBy::Head, 0);
    const auto k = profile(f, Tensor::K, GroupBy::Head, 0);
    EXPECT_EQ(code_of([&] { detect_positional_heads(q, k, 0); }), ErrorCode::InvalidRange);
    EXPECT_EQ(code_of([&] { detect_positional_heads(q, k, 9); }), ErrorCode::InvalidRange);
    const QKVTensorFile g = gaussian_fixture(1, 3, 16, 16, 2);
    EXPECT_EQ(code_of([&] { detect_positional_heads(q, profile(g, Tensor::K, GroupBy::Head, 0)); }),
              ErrorCode::DimensionMismatch);
}

TEST(Fixtures, DiagonalIsConcentratedOnFastestChunk) {
    const QKVTensorFile f = diagonal_fixture(1, 2, 32, 8, 5);
    const auto p = profile(f, Tensor::Q, GroupBy::Layer);
    EXPECT_NEAR(p.mean_norm(0, 1), 5.0, 0.2);
    for (int k = 2; k <= 4; ++k) EXPECT_LT(p.mean_norm(0, k), 0.5);
    EXPECT_EQ(f.q, f.k);
}

TEST(Fixtures, SeedDeterminism) {
    EXPECT_EQ(gaussian_fixture(1, 2, 8, 4, 7).q, gaussian_fixture(1, 2, 8, 4, 7).q);
    EXPECT_NE(gaussian_fixture(1, 2, 8, 4, 7).q, gaussian_fixture(1, 2, 8, 4, 8).q);
}

TEST(Qkt1, RoundTripIsByteIdentical) {
    const QKVTensorFile f = gaussian_fixture(2, 3, 5, 4, 1);
    std::ostringstream a;
    write_qkt1(a, f);
    std::istringstream in(a.str());
    const QKVTensorFile g = read_qkt1(in);
    EXPECT_EQ(g.layers, 2U);
    EXPECT_EQ(g.heads, 3U);
    EXPECT_EQ(g.seq_len, 5U);
    EXPECT_EQ(g.head_dim, 4U);
    EXPECT_EQ(g.q, f.q);
    EXPECT_EQ(g.v, f.v);
    std::ostringstream b;
    write_qkt1(b, g);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().size(), 24U + 3U * 4U * f.element_count());
    EXPECT_EQ(a.str().substr(0, 4), "QKT1");
}

TEST(Qkt1, PathRoundTripCreatesDirectories) {
    const auto dir = std::filesystem::temp_directory_path() / "ropelab_qkt1_test" / "nested";
    std::filesystem::remove_all(dir.parent_path());
    const QKVTensorFile f = gaussian_fixture(1, 1, 3, 2, 1);
    write_qkt1(dir / "x.qkt1", f);
    EXPECT_EQ(read_qkt1(dir / "x.qkt1").k, f.k);
    std::filesystem::remove_all(dir.parent_path());
}

TEST(Qkt1, RejectsMalformedInput) {
    const QKVTensorFile f = gaussian_fixture(1, 1, 2, 2, 1);
    std::ostringstream os;
    write_qkt1(os, f);
    const std::string good = os.str();
    auto parse = [](std::string bytes) {
        std::istringstream is(bytes);
        return read_qkt1(is);
    };
    EXPECT_EQ(code_of([&] { parse(good.substr(0, good.size() - 1)); }), ErrorCode::Format);
    EXPECT_EQ(code_of([&] { parse(good + "x"); }), ErrorCode::Format);
    std::string bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_EQ(code_of([&] { parse(bad_magic); }), ErrorCode::Format);
    std::string bad_version = good;
    bad_version[4] = 2;
    EXPECT_EQ(code_of([&] { parse(bad_version); }), ErrorCode::Format);
    std::string odd_d = good;
    odd_d[20] = 3;
    EXPECT_EQ(code_of([&] { parse(odd_d); }), ErrorCode::Format);
    std::string nan_value = good;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    const auto bits = std::bit_cast<std::uint32_t>(nan);
    for (int b = 0; b < 4; ++b) nan_value[24 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    EXPECT_EQ(code_of([&] { parse(nan_value); }), ErrorCode::Format);
    EXPECT_EQ(code_of([] { read_qkt1(std::filesystem::path("/nonexistent/x.qkt1")); }), ErrorCode::Io);
}

}  // namespace
}  // namespace ropelab
