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
#include <random>
#include <string_view>

namespace ropelab {

/// Recorded in experiment metadata. Bump the suffix if any draw changes.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64+splitmix64-streams/polar-normal v1";

/// splitmix64 finalizer over (seed, stream). Distinct streams give
/// statistically independent mt19937_64 seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Portable random source. std::mt19937_64 output is fixed by the standard;
/// the distribution transforms below are spelled out here because the
/// standard library ones are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform integer on [0, n), n > 0, by rejection.
    std::uint64_t below(std::uint64_t n);
    /// Standard normal, Marsaglia polar method.
    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ropelab
