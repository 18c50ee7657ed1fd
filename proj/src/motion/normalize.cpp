#include "formcoach/motion/normalize.hpp"

#include <cmath>

namespace formcoach::motion {

namespace {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

using Mat3 = std::array<double, 9>;

Mat3 identity3() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

Mat3 matmul3(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return c;
}

Vec3 apply3(const Mat3& m, const Vec3& v) {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

// Rodrigues rotation about a unit axis.
Mat3 axis_angle(const Vec3& axis, double angle) {
  double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  double x = axis.x, y = axis.y, z = axis.z;
  return {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
          t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
          t * x * z - s * y, t * y * z + s * x, t * z * z + c};
}

// Minimal rotation taking unit vector `from` to unit vector `to`.
Mat3 minimal_rotation(const Vec3& from, const Vec3& to) {
  double c = dot(from, to);
  Vec3 ax = cross(from, to);
  double s = norm(ax);
  if (s < 1e-14) {
    if (c > 0.0) return identity3();
    // Antiparallel: rotate pi about any axis orthogonal to `from`.
    Vec3 pick = std::abs(from.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 ortho = cross(from, pick);
    double n = norm(ortho);
    return axis_angle((1.0 / n) * ortho, M_PI);
  }
  return axis_angle((1.0 / s) * ax, std::atan2(s, c));
}

Vec3 get_joint(const Tensor& frames, std::size_t f, std::size_t j) {
  return {frames.at(f, j, 0), frames.at(f, j, 1), frames.at(f, j, 2)};
}

void set_joint(Tensor& frames, std::size_t f, std::size_t j, const Vec3& v) {
  frames.at(f, j, 0) = v.x;
  frames.at(f, j, 1) = v.y;
  frames.at(f, j, 2) = v.z;
}

}  // namespace

bool NormalizationReport::rotation_orthonormal(double tol) const {
  const auto& r = applied_rotation;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) acc += r[k * 3 + i] * r[k * 3 + j];
      if (std::abs(acc - (i == j ? 1.0 : 0.0)) > tol) return false;
    }
  }
  return true;
}

std::pair<MotionSequence, NormalizationReport> normalize(const MotionSequence& seq,
                                                         const std::vector<double>& reference_bone_lengths) {
  seq.validate();
  const auto& skel = *seq.skeleton;
  const std::size_t n = seq.frame_count();
  const std::size_t j = skel.joint_count();
  if (reference_bone_lengths.size() != j)
    throw ValidationError("reference bone lengths must have one entry per joint (root ignored)");
  for (std::size_t c = 0; c < j; ++c) {
    if (skel.parent_index[c] == static_cast<int>(c)) continue;
    if (!(reference_bone_lengths[c] > 0.0))
      throw ValidationError("reference bone length for joint " + skel.joint_names[c] + " must be positive");
  }

  NormalizationReport report;
  report.hip_offset_per_frame = Tensor({n, 3});
  Tensor frames = seq.frames;

  // 1. Hip to origin on every frame.
  const int hip = skel.hip_index;
  for (std::size_t f = 0; f < n; ++f) {
    Vec3 h = get_joint(frames, f, hip);
    report.hip_offset_per_frame.at(f, 0) = h.x;
    report.hip_offset_per_frame.at(f, 1) = h.y;
    report.hip_offset_per_frame.at(f, 2) = h.z;
    for (std::size_t q = 0; q < j; ++q) set_joint(frames, f, q, get_joint(frames, f, q) - h);
  }

  // 2. Retarget bone lengths, keeping per-frame parent-to-child directions.
  const auto order = skel.topo_order();
  double observed_total = 0.0, reference_total = 0.0;
  {
    std::vector<double> observed(j, 0.0);
    for (std::size_t f = 0; f < n; ++f)
      for (int c : order) {
        int p = skel.parent_index[c];
        if (p == c) continue;
        Vec3 d = get_joint(frames, f, c) - get_joint(frames, f, p);
        observed[c] += norm(d);
      }
    for (std::size_t c = 0; c < j; ++c) {
      if (skel.parent_index[c] == static_cast<int>(c)) continue;
      observed_total += observed[c] / static_cast<double>(n);
      reference_total += reference_bone_lengths[c];
    }
  }
  Tensor retargeted({n, j, 3});
  for (std::size_t f = 0; f < n; ++f) {
    set_joint(retargeted, f, hip, {0, 0, 0});
    for (int c : order) {
      int p = skel.parent_index[c];
      if (p == c) continue;
      Vec3 d = get_joint(frames, f, c) - get_joint(frames, f, p);
      double len = norm(d);
      if (len < 1e-12)
        throw DegenerateBone("zero-length bone " + skel.joint_names[p] + " -> " + skel.joint_names[c] + " at frame " +
                             std::to_string(f));
      set_joint(retargeted, f, c, get_joint(retargeted, f, p) + (reference_bone_lengths[c] / len) * d);
    }
  }
  if (observed_total < 1e-12) throw DegenerateBone("skeleton has zero total bone length");
  report.scale_factor = reference_total / observed_total;

  // 3. Minimal rotation taking the mean hip->spine vector to +Z.
  Vec3 spine_mean{};
  for (std::size_t f = 0; f < n; ++f) spine_mean = spine_mean + get_joint(retargeted, f, skel.spine_index);
  spine_mean = (1.0 / static_cast<double>(n)) * spine_mean;
  double spine_len = norm(spine_mean);
  if (spine_len < 1e-12) throw DegenerateOrientation("mean hip->spine vector has zero norm");
  Mat3 upright = minimal_rotation((1.0 / spine_len) * spine_mean, {0, 0, 1});
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t q = 0; q < j; ++q) set_joint(retargeted, f, q, apply3(upright, get_joint(retargeted, f, q)));

  // 4. Yaw so the mean shoulder-line normal faces +X. Heuristic; skipped when
  //    shoulders are absent or the horizontal direction is ill-defined.
  Mat3 yaw = identity3();
  auto ls = skel.find("l_shoulder");
  auto rs = skel.find("r_shoulder");
  if (ls && rs) {
    Vec3 line{};
    for (std::size_t f = 0; f < n; ++f)
      line = line + (get_joint(retargeted, f, *ls) - get_joint(retargeted, f, *rs));
    Vec3 facing = cross(line, Vec3{0, 0, 1});
    facing.z = 0.0;
    double flen = norm(facing);
    if (flen > 1e-9) {
      double angle = std::atan2(facing.y / flen, facing.x / flen);
      yaw = axis_angle({0, 0, 1}, -angle);
      for (std::size_t f = 0; f < n; ++f)
        for (std::size_t q = 0; q < j; ++q) set_joint(retargeted, f, q, apply3(yaw, get_joint(retargeted, f, q)));
    }
  }

  report.applied_rotation = matmul3(yaw, upright);

  MotionSequence out;
  out.skeleton = seq.skeleton;
  out.fps = seq.fps;
  out.frames = std::move(retargeted);
  out.validate();
  return {std::move(out), std::move(report)};
}

MotionSequence denormalize_pose(const MotionSequence& seq, const NormalizationReport& report) {
  const std::size_t n = seq.frame_count();
  const std::size_t j = seq.joint_count();
  const std::size_t offsets = report.hip_offset_per_frame.dim(0);
  Tensor frames({n, j, 3});
  const auto& r = report.applied_rotation;
  for (std::size_t f = 0; f < n; ++f) {
    // Reuse the last recorded offset when the sequence is longer than the
    // original (e.g. decoded at a different length).
    std::size_t fo = std::min(f, offsets - 1);
    Vec3 off{report.hip_offset_per_frame.at(fo, 0), report.hip_offset_per_frame.at(fo, 1),
             report.hip_offset_per_frame.at(fo, 2)};
    for (std::size_t q = 0; q < j; ++q) {
      Vec3 v = get_joint(seq.frames, f, q);
      // Transpose = inverse for orthonormal rotations.
      Vec3 undone{r[0] * v.x + r[3] * v.y + r[6] * v.z, r[1] * v.x + r[4] * v.y + r[7] * v.z,
                  r[2] * v.x + r[5] * v.y + r[8] * v.z};
      set_joint(frames, f, q, undone + off);
    }
  }
  MotionSequence out;
  out.skeleton = seq.skeleton;
  out.fps = seq.fps;
  out.frames = std::move(frames);
  return out;
}

}  // namespace formcoach::motion
