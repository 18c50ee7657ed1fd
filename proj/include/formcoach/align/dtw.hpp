#pragma once

#include <span>
#include <string>
#include <vector>

#include "formcoach/motion/sequence.hpp"
#include "formcoach/tensor.hpp"

namespace formcoach::align {

struct SoftDtwConfig {
  double gamma = 0.01;  // soft-min temperature, > 0
};

struct MatchedPair {
  std::string incorrect_id;
  std::string correct_id;
  double dtw_cost = 0.0;
};

// Entry (i,j) = squared Euclidean distance between flattened pose i of `a`
// and pose j of `b`.
Tensor cost_matrix(const MotionSequence& a, const MotionSequence& b);

// --- Core kernels over flat feature sequences (rows = time steps) ----------
// a: n x d, b: m x d, row-major.

double dtw_flat(const double* a, std::size_t n, const double* b, std::size_t m, std::size_t d);
double soft_dtw_flat(const double* a, std::size_t n, const double* b, std::size_t m, std::size_t d, double gamma);

struct SoftDtwResult {
  double value = 0.0;
  Tensor grad_a;  // n x d, d(value)/d(a)
};
SoftDtwResult soft_dtw_with_grad_flat(const double* a, std::size_t n, const double* b, std::size_t m, std::size_t d,
                                      double gamma);

// --- MotionSequence wrappers ------------------------------------------------

// Minimal monotone alignment cost; DP over
//   R[i,j] = cost(i,j) + min(R[i-1,j], R[i,j-1], R[i-1,j-1]).
// Throws SkeletonMismatch when the skeletons differ.
double dtw(const MotionSequence& a, const MotionSequence& b);

// Same DP with the min replaced by softmin_gamma (log-sum-exp), stabilized by
// a min-shift. Can undershoot 0; converges to dtw as gamma -> 0+.
double soft_dtw(const MotionSequence& a, const MotionSequence& b, const SoftDtwConfig& cfg);

// Analytic d(soft_dtw)/d(a) via the backward alignment-weight recursion,
// shape {N, J, 3}.
Tensor soft_dtw_grad(const MotionSequence& a, const MotionSequence& b, const SoftDtwConfig& cfg);

// One candidate for pair matching.
struct MatchCandidate {
  std::string id;
  std::string subject;
  std::string exercise;
  const MotionSequence* seq = nullptr;
};

// Matches every incorrect sequence to the same-subject, same-exercise correct
// candidate with minimal dtw; ties broken by lowest correct id. Throws
// NoCorrectCandidate when a (subject, exercise) group has no candidate.
std::vector<MatchedPair> match_pairs(std::span<const MatchCandidate> incorrect,
                                     std::span<const MatchCandidate> correct, int threads = 1);

}  // namespace formcoach::align
