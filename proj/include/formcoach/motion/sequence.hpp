#pragma once

#include "formcoach/motion/skeleton.hpp"
#include "formcoach/tensor.hpp"

namespace formcoach::motion {

// A world-space trajectory: N frames x J joints x 3 coordinates (meters).
struct MotionSequence {
  SkeletonPtr skeleton;
  Tensor frames;  // shape {N, J, 3}
  double fps = 30.0;

  std::size_t frame_count() const { return frames.dim(0); }
  std::size_t joint_count() const { return frames.dim(1); }

  // Enforces N >= 2, finite values, fps > 0 and shape consistency.
  void validate() const;

  // Frame f as a flat pointer to J*3 doubles.
  const double* frame(std::size_t f) const { return frames.data() + f * joint_count() * 3; }
  double* frame(std::size_t f) { return frames.data() + f * joint_count() * 3; }
};

MotionSequence make_sequence(SkeletonPtr skeleton, Tensor frames, double fps = 30.0);

// Frame-to-frame position differences, shape {N-1, J, 3}.
Tensor velocities(const MotionSequence& seq);

// Mean per-bone length over all frames, keyed by child joint (root entry 0).
std::vector<double> bone_lengths(const MotionSequence& seq);

}  // namespace formcoach::motion
