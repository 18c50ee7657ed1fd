#include "formcoach/motion/sequence.hpp"

#include <cmath>

namespace formcoach::motion {

void MotionSequence::validate() const {
  if (!skeleton) throw ValidationError("motion sequence has no skeleton");
  skeleton->validate();
  if (frames.rank() != 3 || frames.dim(2) != 3) throw ValidationError("frames must have shape {N,J,3}");
  if (frames.dim(1) != skeleton->joint_count()) throw ValidationError("frame joint count does not match skeleton");
  if (frames.dim(0) < 2) throw ValidationError("motion sequence needs at least 2 frames");
  if (!(fps > 0.0)) throw ValidationError("fps must be positive");
  if (!frames.all_finite()) throw ValidationError("motion sequence contains non-finite values");
}

MotionSequence make_sequence(SkeletonPtr skeleton, Tensor frames, double fps) {
  MotionSequence seq{std::move(skeleton), std::move(frames), fps};
  seq.validate();
  return seq;
}

Tensor velocities(const MotionSequence& seq) {
  const std::size_t n = seq.frame_count();
  const std::size_t stride = seq.joint_count() * 3;
  Tensor out({n - 1, seq.joint_count(), 3});
  const double* cur = seq.frames.data();
  double* dst = out.data();
  for (std::size_t f = 0; f + 1 < n; ++f) {
    const double* a = cur + f * stride;
    const double* b = cur + (f + 1) * stride;
    for (std::size_t i = 0; i < stride; ++i) dst[f * stride + i] = b[i] - a[i];
  }
  return out;
}

std::vector<double> bone_lengths(const MotionSequence& seq) {
  const auto& skel = *seq.skeleton;
  const std::size_t j = skel.joint_count();
  const std::size_t n = seq.frame_count();
  std::vector<double> lengths(j, 0.0);
  for (std::size_t f = 0; f < n; ++f) {
    const double* frame = seq.frame(f);
    for (std::size_t c = 0; c < j; ++c) {
      int p = skel.parent_index[c];
      if (p == static_cast<int>(c)) continue;
      double dx = frame[c * 3 + 0] - frame[p * 3 + 0];
      double dy = frame[c * 3 + 1] - frame[p * 3 + 1];
      double dz = frame[c * 3 + 2] - frame[p * 3 + 2];
      lengths[c] += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
  }
  for (double& l : lengths) l /= static_cast<double>(n);
  return lengths;
}

}  // namespace formcoach::motion
