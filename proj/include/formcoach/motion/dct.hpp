#pragma once

#include "formcoach/motion/sequence.hpp"

namespace formcoach::motion {

// Leading orthonormal DCT-II coefficients of each joint coordinate's
// trajectory. Makes the network input independent of sequence length.
struct DctMotion {
  SkeletonPtr skeleton;
  Tensor coeffs;  // shape {K, J, 3}
  std::size_t source_length = 0;
  double fps = 30.0;

  std::size_t coeff_count() const { return coeffs.dim(0); }
  std::size_t joint_count() const { return coeffs.dim(1); }

  void validate() const;  // K <= source_length, finite values
};

// Orthonormal DCT-II basis, shape {n, k}: column c holds the basis vector
// s_c * cos(pi*(2t+1)*c / (2n)) with s_0 = sqrt(1/n), s_c = sqrt(2/n).
Tensor dct_basis(std::size_t n, std::size_t k);

// First k orthonormal DCT-II projections of each trajectory.
// Throws CoefficientCountExceedsLength when k > N.
DctMotion dct_encode(const MotionSequence& seq, std::size_t k);

// Inverse orthonormal DCT-II of the zero-padded coefficient vector, evaluated
// at out_length samples. out_length == 0 means the source length.
MotionSequence dct_decode(const DctMotion& dct, std::size_t out_length = 0);

}  // namespace formcoach::motion
