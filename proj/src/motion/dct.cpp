#include "formcoach/motion/dct.hpp"

#include <cmath>

namespace formcoach::motion {

void DctMotion::validate() const {
  if (!skeleton) throw ValidationError("dct motion has no skeleton");
  if (coeffs.rank() != 3 || coeffs.dim(2) != 3) throw ValidationError("coeffs must have shape {K,J,3}");
  if (coeffs.dim(0) > source_length)
    throw CoefficientCountExceedsLength("coefficient count " + std::to_string(coeffs.dim(0)) +
                                        " exceeds source length " + std::to_string(source_length));
  if (!coeffs.all_finite()) throw ValidationError("dct motion contains non-finite values");
}

Tensor dct_basis(std::size_t n, std::size_t k) {
  Tensor basis({n, k});
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double s = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < k; ++c) {
      double scale = (c == 0) ? s0 : s;
      basis.at(t, c) = scale * std::cos(M_PI * (2.0 * t + 1.0) * c / (2.0 * n));
    }
  }
  return basis;
}

DctMotion dct_encode(const MotionSequence& seq, std::size_t k) {
  const std::size_t n = seq.frame_count();
  const std::size_t j = seq.joint_count();
  if (k < 1) throw ValidationError("coefficient count must be at least 1");
  if (k > n)
    throw CoefficientCountExceedsLength("requested " + std::to_string(k) + " coefficients from " + std::to_string(n) +
                                        " frames");
  Tensor basis = dct_basis(n, k);
  DctMotion out;
  out.skeleton = seq.skeleton;
  out.source_length = n;
  out.fps = seq.fps;
  out.coeffs = Tensor({k, j, 3});
  // coeff[c] = sum_t basis[t,c] * x[t] per joint coordinate.
  const std::size_t stride = j * 3;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t t = 0; t < n; ++t) {
      const double b = basis.at(t, c);
      const double* frame = seq.frames.data() + t * stride;
      double* dst = out.coeffs.data() + c * stride;
      for (std::size_t i = 0; i < stride; ++i) dst[i] += b * frame[i];
    }
  }
  return out;
}

MotionSequence dct_decode(const DctMotion& dct, std::size_t out_length) {
  std::size_t n = out_length == 0 ? dct.source_length : out_length;
  if (n < 2) throw ValidationError("decode length must be at least 2");
  const std::size_t j = dct.joint_count();
  const std::size_t k_used = std::min(dct.coeff_count(), n);  // zero padding beyond stored coeffs
  Tensor basis = dct_basis(n, k_used);
  MotionSequence out;
  out.skeleton = dct.skeleton;
  out.fps = dct.fps;
  out.frames = Tensor({n, j, 3});
  const std::size_t stride = j * 3;
  for (std::size_t t = 0; t < n; ++t) {
    double* frame = out.frames.data() + t * stride;
    for (std::size_t c = 0; c < k_used; ++c) {
      const double b = basis.at(t, c);
      const double* src = dct.coeffs.data() + c * stride;
      for (std::size_t i = 0; i < stride; ++i) frame[i] += b * src[i];
    }
  }
  return out;
}

}  // namespace formcoach::motion
