#pragma once

#include <array>

#include "formcoach/motion/sequence.hpp"

namespace formcoach::motion {

// Records the transform applied by normalize() so centering and rotation can
// be undone exactly for display.
struct NormalizationReport {
  double scale_factor = 1.0;                    // sum(reference lengths) / sum(observed mean lengths)
  std::array<double, 9> applied_rotation{};     // row-major 3x3, world -> normalized
  Tensor hip_offset_per_frame;                  // shape {N, 3}, original hip positions

  bool rotation_orthonormal(double tol = 1e-9) const;
};

// Canonical pose normalization:
//   1. center the hip joint at the origin on every frame,
//   2. rescale every bone to the reference length, preserving the per-frame
//      parent-to-child directions,
//   3. rotate so the mean hip->spine vector points to +Z,
//   4. yaw so the mean shoulder-line normal faces +X (skipped when the
//      skeleton has no l_shoulder/r_shoulder joints or the direction is
//      ill-defined).
// reference_bone_lengths is keyed by child joint index; the root entry is
// ignored. Throws DegenerateOrientation / DegenerateBone.
std::pair<MotionSequence, NormalizationReport> normalize(const MotionSequence& seq,
                                                         const std::vector<double>& reference_bone_lengths);

// Applies the inverse of the recorded rotation and re-adds the per-frame hip
// offsets. Bone rescaling is not undone.
MotionSequence denormalize_pose(const MotionSequence& seq, const NormalizationReport& report);

}  // namespace formcoach::motion
