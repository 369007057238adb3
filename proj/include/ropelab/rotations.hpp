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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace ropelab {

/// How a schedule was derived. Kernels use this to reject a schedule that
/// does not belong to the requested encoding.
enum class ScheduleVariant { Full, PRoPE, PRoPEReversed, Partial };

/// Angular velocities of the d/2 rotary chunks.
///
/// Frequency indices are 1-based throughout the public API: chunk k covers
/// vector components (2k-1, 2k) in 1-based terms, i.e. [2(k-1), 2(k-1)+1]
/// in memory. k = 1 is the fastest frequency (angle exactly 1 rad/token for
/// the full schedule). A masked-off frequency rotates with zero angular
/// velocity: consumers treat its angle as 0 while `angle(k)` still reports
/// the nominal value.
class FrequencySchedule {
public:
    FrequencySchedule(double theta, int head_dim, std::vector<double> angles, std::vector<bool> mask,
                      ScheduleVariant variant = ScheduleVariant::Full, double fraction = 1.0);

    double theta() const noexcept { return theta_; }
    int head_dim() const noexcept { return head_dim_; }
    int num_frequencies() const noexcept { return head_dim_ / 2; }
    ScheduleVariant variant() const noexcept { return variant_; }
    double fraction() const noexcept { return fraction_; }

    double angle(int k) const { return angles_.at(static_cast<std::size_t>(k - 1)); }
    bool active(int k) const { return mask_.at(static_cast<std::size_t>(k - 1)); }
    /// angle(k) if active, else 0.
    double effective_angle(int k) const { return active(k) ? angle(k) : 0.0; }
    int active_count() const noexcept;

    const std::vector<double> &angles() const noexcept { return angles_; }
    const std::vector<bool> &mask() const noexcept { return mask_; }
    std::vector<double> effective_angles() const;

    friend bool operator==(const FrequencySchedule &, const FrequencySchedule &) = default;

private:
    double theta_;
    int head_dim_;
    std::vector<double> angles_;
    std::vector<bool> mask_;
    ScheduleVariant variant_;
    double fraction_;
};

/// angles[k] = theta^(-2(k-1)/d), all active.
FrequencySchedule make_schedule(double theta, int head_dim);

using Mat2 = std::array<std::array<double, 2>, 2>;

/// [[cos, -sin], [sin, cos]].
Mat2 rotation_block(double angle);

/// offset * angle reduced to [-pi, pi]. The product is formed exactly with an
/// fma residual and reduced against a two-word 2*pi, so positions up to 1e9
/// keep full double accuracy.
double reduced_phase(std::int64_t offset, double angle);

struct CosSin {
    double c;
    double s;
};

/// cos/sin of reduced_phase(offset, angle). Every rotation in the library goes
/// through this function so that cached and on-the-fly rotations agree bit for
/// bit.
CosSin phase_cos_sin(std::int64_t offset, double angle);

/// Read-only view of a d-vector as d/2 consecutive 2-component chunks.
class Chunked {
public:
    explicit Chunked(std::span<const double> v);

    int count() const noexcept { return static_cast<int>(v_.size() / 2); }
    /// 1-based chunk index.
    std::array<double, 2> chunk(int k) const;
    std::span<const double> data() const noexcept { return v_; }

private:
    std::span<const double> v_;
};

/// R^position v: chunk k rotated by position * effective_angle(k).
std::vector<double> apply_rope(std::span<const double> v, std::int64_t position, const FrequencySchedule &sched);

/// In-place variant used by the hot paths; `out` must have head_dim entries.
void apply_rope_into(std::span<const double> v, std::int64_t position, const FrequencySchedule &sched,
                     std::span<double> out);

/// Dense d x d block-diagonal R^position. Test and diagnostic use only.
std::vector<double> dense_rotation(std::int64_t position, const FrequencySchedule &sched);

/// cos/sin of every (offset, frequency) pair for offsets -span..0, used to fill
/// causal activation matrices without re-evaluating trig per entry.
class RelativeRotationTable {
public:
    RelativeRotationTable(const FrequencySchedule &sched, std::int64_t span);

    std::int64_t span() const noexcept { return span_; }
    /// Rotation for relative offset -back (back in [0, span]) at 1-based frequency k.
    CosSin at(std::int64_t back, int k) const {
        return table_[static_cast<std::size_t>(back) * static_cast<std::size_t>(half_) +
                      static_cast<std::size_t>(k - 1)];
    }

    static std::size_t footprint(std::int64_t span, int head_dim) {
        return static_cast<std::size_t>(span + 1) * static_cast<std::size_t>(head_dim / 2);
    }

private:
    std::int64_t span_;
    int half_;
    std::vector<CosSin> table_;
};

}  // namespace ropelab
