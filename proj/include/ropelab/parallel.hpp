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

namespace ropelab {

// Parallel kernels split work into fixed-size blocks and reduce block results
// in index order, so output never depends on the thread count.

/// Caps the OpenMP worker count; n <= 0 restores the runtime default.
void set_num_threads(int n);
int num_threads();

/// Trials per independent random stream in Monte-Carlo loops.
inline constexpr std::int64_t kTrialsPerStream = 256;

}  // namespace ropelab
