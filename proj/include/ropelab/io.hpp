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

#include <filesystem>
#include <string>

namespace ropelab {

/// Shortest round-trip decimal form; NaN becomes the empty string so that
/// missing values show up as empty CSV fields.
std::string format_double(double x);

/// Writes `contents` to `path`, creating parent directories. Throws Io.
void write_file(const std::filesystem::path &path, const std::string &contents);

}  // namespace ropelab
