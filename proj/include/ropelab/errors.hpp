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

#include <stdexcept>
#include <string>
#include <string_view>

namespace ropelab {

enum class ErrorCode {
    InvalidDimension,
    InvalidWavelength,
    InvalidAngle,
    DimensionMismatch,
    InvalidFraction,
    InvalidRange,
    ScheduleMismatch,
    NonFiniteActivation,
    DegenerateConstruction,
    IndexOutOfRange,
    PreconditionViolated,
    NotFound,
    Format,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the cause without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by the swap search when no rearrangement exists at the given
/// sequence length. `required_length()` is the heuristic length at which
/// the search is expected to succeed.
class NotFoundError : public Error {
public:
    NotFoundError(const std::string &what, long long required_length)
        : Error(ErrorCode::NotFound, what), required_length_(required_length) {}

    long long required_length() const noexcept { return required_length_; }

private:
    long long required_length_;
};

}  // namespace ropelab
