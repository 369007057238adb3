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
#include "ropelab/rotations.hpp"

#include <cmath>
#include <string>

#include "ropelab/errors.hpp"

namespace ropelab {

namespace {

// 2*pi split into a double and the residual.
constexpr double kTwoPiHi = 6.283185307179586;
constexpr double kTwoPiLo = 2.4492935982947064e-16;

void check_head_dim(int head_dim) {
    if (head_dim < 2 || head_dim % 2 != 0) {
        throw Error(ErrorCode::InvalidDimension,
                    "head_dim must be even and >= 2, got " + std::to_string(head_dim));
    }
}

}  // namespace

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::InvalidWavelength: return "InvalidWavelength";
    case ErrorCode::InvalidAngle: return "InvalidAngle";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidFraction: return "InvalidFraction";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::ScheduleMismatch: return "ScheduleMismatch";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::DegenerateConstruction: return "DegenerateConstruction";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Format: return "Format";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

FrequencySchedule::FrequencySchedule(double theta, int head_dim, std::vector<double> angles, std::vector<bool> mask,
                                     ScheduleVariant variant, double fraction)
    : theta_(theta),
      head_dim_(head_dim),
      angles_(std::move(angles)),
      mask_(std::move(mask)),
      variant_(variant),
      fraction_(fraction) {
    check_head_dim(head_dim_);
    const auto half = static_cast<std::size_t>(head_dim_ / 2);
    if (angles_.size() != half || mask_.size() != half) {
        throw Error(ErrorCode::DimensionMismatch, "schedule needs head_dim/2 angles and mask entries");
    }
    for (double a : angles_) {
        if (!std::isfinite(a) || a <= 0.0) {
            throw Error(ErrorCode::InvalidAngle, "schedule angles must be finite and positive");
        }
    }
}

int FrequencySchedule::active_count() const noexcept {
    int n = 0;
    for (bool m : mask_) n += m ? 1 : 0;
    return n;
}

std::vector<double> FrequencySchedule::effective_angles() const {
    std::vector<double> out(angles_.size());
    for (std::size_t i = 0; i < angles_.size(); ++i) out[i] = mask_[i] ? angles_[i] : 0.0;
    return out;
}

FrequencySchedule make_schedule(double theta, int head_dim) {
    check_head_dim(head_dim);
    if (!(theta > 0.0) || !std::isfinite(theta)) {
        throw Error(ErrorCode::InvalidWavelength, "theta must be finite and > 0");
    }
    const int half = head_dim / 2;
    const double log_theta = std::log(theta);
    std::vector<double> angles(static_cast<std::size_t>(half));
    for (int k = 1; k <= half; ++k) {
        const double exponent = -2.0 * static_cast<double>(k - 1) / static_cast<double>(head_dim);
        angles[static_cast<std::size_t>(k - 1)] = std::exp(exponent * log_theta);
    }
    return FrequencySchedule(theta, head_dim, std::move(angles), std::vector<bool>(static_cast<std::size_t>(half), true));
}

Mat2 rotation_block(double angle) {
    if (!std::isfinite(angle)) throw Error(ErrorCode::InvalidAngle, "rotation angle must be finite");
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return Mat2{{{c, -s}, {s, c}}};
}

double reduced_phase(std::int64_t offset, double angle) {
    const double x = static_cast<double>(offset);
    const double p = x * angle;
    const double residual = std::fma(x, angle, -p);
    const double n = std::nearbyint(p / kTwoPiHi);
    double r = std::fma(-n, kTwoPiHi, p);
    r -= n * kTwoPiLo;
    return r + residual;
}

CosSin phase_cos_sin(std::int64_t offset, double angle) {
    if (offset == 0) return {1.0, 0.0};
    const double phase = reduced_phase(offset, angle);
    return {std::cos(phase), std::sin(phase)};
}

Chunked::Chunked(std::span<const double> v) : v_(v) {
    if (v.size() % 2 != 0) throw Error(ErrorCode::InvalidDimension, "chunked view needs an even length");
}

std::array<double, 2> Chunked::chunk(int k) const {
    if (k < 1 || k > count()) throw Error(ErrorCode::IndexOutOfRange, "chunk index out of range");
    const auto base = static_cast<std::size_t>(2 * (k - 1));
    return {v_[base], v_[base + 1]};
}

void apply_rope_into(std::span<const double> v, std::int64_t position, const FrequencySchedule &sched,
                     std::span<double> out) {
    const auto d = static_cast<std::size_t>(sched.head_dim());
    if (v.size() != d || out.size() != d) {
        throw Error(ErrorCode::DimensionMismatch, "vector length " + std::to_string(v.size()) +
                                                      " does not match head_dim " + std::to_string(d));
    }
    const auto &angles = sched.angles();
    const auto &mask = sched.mask();
    for (std::size_t k = 0; k < d / 2; ++k) {
        const double x0 = v[2 * k];
        const double x1 = v[2 * k + 1];
        if (!mask[k]) {
            out[2 * k] = x0;
            out[2 * k + 1] = x1;
            continue;
        }
        const CosSin r = phase_cos_sin(position, angles[k]);
        out[2 * k] = r.c * x0 - r.s * x1;
        out[2 * k + 1] = r.s * x0 + r.c * x1;
    }
}

std::vector<double> apply_rope(std::span<const double> v, std::int64_t position, const FrequencySchedule &sched) {
    std::vector<double> out(static_cast<std::size_t>(sched.head_dim()));
    apply_rope_into(v, position, sched, out);
    return out;
}

std::vector<double> dense_rotation(std::int64_t position, const FrequencySchedule &sched) {
    const auto d = static_cast<std::size_t>(sched.head_dim());
    std::vector<double> m(d * d, 0.0);
    for (std::size_t k = 0; k < d / 2; ++k) {
        const double phase = sched.mask()[k] ? reduced_phase(position, sched.angles()[k]) : 0.0;
        const Mat2 block = rotation_block(phase);
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t c = 0; c < 2; ++c) m[(2 * k + r) * d + 2 * k + c] = block[r][c];
        }
    }
    return m;
}

RelativeRotationTable::RelativeRotationTable(const FrequencySchedule &sched, std::int64_t span)
    : span_(span), half_(sched.num_frequencies()) {
    if (span < 0) throw Error(ErrorCode::InvalidRange, "rotation table span must be >= 0");
    table_.resize(footprint(span, sched.head_dim()));
    for (std::int64_t back = 0; back <= span; ++back) {
        for (int k = 1; k <= half_; ++k) {
            table_[static_cast<std::size_t>(back) * static_cast<std::size_t>(half_) + static_cast<std::size_t>(k - 1)] =
                sched.active(k) ? phase_cos_sin(-back, sched.angle(k)) : CosSin{1.0, 0.0};
        }
    }
}

}  // namespace ropelab
