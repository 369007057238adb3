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
// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include <vector>

#include "ropelab/analysis.hpp"
#include "ropelab/attention.hpp"
#include "ropelab/experiments.hpp"
#include "ropelab/rng.hpp"
#include "ropelab/theory_checks.hpp"

namespace {

using namespace ropelab;

HeadSequence random_sequence(std::int64_t n, int d) {
    HeadSequence seq = HeadSequence::zeros(n, d);
    Rng rng(1);
    for (double &x : seq.queries) x = rng.normal();
    for (double &x : seq.keys) x = rng.normal();
    return seq;
}

void BM_Activations(benchmark::State &state) {
    const HeadSequence seq = random_sequence(state.range(0), 64);
    const FrequencySchedule s = make_schedule(10000.0, 64);
    for (auto _ : state) benchmark::DoNotOptimize(activations(seq, EncodingKind::rope(), s));
}

void BM_ActivationsReference(benchmark::State &state) {
    const HeadSequence seq = random_sequence(state.range(0), 64);
    const FrequencySchedule s = make_schedule(10000.0, 64);
    for (auto _ : state) benchmark::DoNotOptimize(reference::activations(seq, EncodingKind::rope(), s));
}

void BM_Attention(benchmark::State &state) {
    const HeadSequence seq = random_sequence(state.range(0), 64);
    const ActivationMatrix act = activations(seq, EncodingKind::rope(), make_schedule(10000.0, 64));
    for (auto _ : state) benchmark::DoNotOptimize(attention(act));
}

void BM_AttentionReference(benchmark::State &state) {
    const HeadSequence seq = random_sequence(state.range(0), 64);
    const ActivationMatrix act = activations(seq, EncodingKind::rope(), make_schedule(10000.0, 64));
    for (auto _ : state) benchmark::DoNotOptimize(reference::attention(act));
}

void BM_GaussianExpectation(benchmark::State &state) {
    for (auto _ : state) benchmark::DoNotOptimize(gaussian_expectation_check(256, 100, state.range(0), 1));
}

void BM_GaussianExpectationReference(benchmark::State &state) {
    for (auto _ : state) benchmark::DoNotOptimize(reference::gaussian_expectation_check(256, 100, state.range(0), 1));
}

void BM_GaussianCurve(benchmark::State &state) {
    for (auto _ : state) benchmark::DoNotOptimize(gaussian_decay_curve(10000.0, 64, state.range(0), 100, 1));
}

void BM_GaussianCurveReference(benchmark::State &state) {
    for (auto _ : state) benchmark::DoNotOptimize(reference::gaussian_decay_curve(10000.0, 64, state.range(0), 100, 1));
}

const std::vector<std::int64_t> kRanges{1024, 2048, 4096};

void BM_RandomRope(benchmark::State &state) {
    for (auto _ : state) benchmark::DoNotOptimize(random_rope_decay(10000.0, 64, 1024, kRanges, 1, 10));
}

void BM_RandomRopeReference(benchmark::State &state) {
    for (auto _ : state) benchmark::DoNotOptimize(reference::random_rope_decay(10000.0, 64, 1024, kRanges, 1, 10));
}

void BM_Profile(benchmark::State &state) {
    const QKVTensorFile f = gaussian_fixture(4, 16, static_cast<std::uint32_t>(state.range(0)), 64, 1);
    for (auto _ : state) benchmark::DoNotOptimize(profile(f, Tensor::Q, GroupBy::Layer));
}

void BM_ProfileReference(benchmark::State &state) {
    const QKVTensorFile f = gaussian_fixture(4, 16, static_cast<std::uint32_t>(state.range(0)), 64, 1);
    for (auto _ : state) benchmark::DoNotOptimize(reference::profile(f, Tensor::Q, GroupBy::Layer));
}

}  // namespace

BENCHMARK(BM_Activations)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ActivationsReference)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Attention)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AttentionReference)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GaussianExpectation)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GaussianExpectationReference)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GaussianCurve)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GaussianCurveReference)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomRope)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RandomRopeReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Profile)->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProfileReference)->Arg(1024)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
