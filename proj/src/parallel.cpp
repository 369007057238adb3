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
#include "ropelab/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ropelab {

namespace {
#ifdef _OPENMP
const int kDefaultThreads = omp_get_max_threads();
#endif
}  // namespace

void set_num_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(n > 0 ? n : kDefaultThreads);
#else
    (void)n;
#endif
}

int num_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace ropelab
