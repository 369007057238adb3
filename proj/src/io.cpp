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
#include "ropelab/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "ropelab/errors.hpp"

namespace ropelab {

std::string format_double(double x) {
    if (std::isnan(x)) return {};
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, result.ptr);
}

void write_file(const std::filesystem::path &path, const std::string &contents) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorCode::Io, "cannot create directory " + path.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace ropelab
