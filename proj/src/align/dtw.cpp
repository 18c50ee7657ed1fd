#include "formcoach/align/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace formcoach::align {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq_dist(const double* x, const double* y, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double diff = x[i] - y[i];
    acc += diff * diff;
  }
  return acc;
}

void check_skeletons(const MotionSequence& a, const MotionSequence& b) {
  if (!a.skeleton->same_topology(*b.skeleton)) throw SkeletonMismatch("dtw: sequences use different skeletons");
}

// softmin_gamma(x,y,z) = -gamma * log(exp(-x/g) + exp(-y/g) + exp(-z/g)),
// shifted by the min for stability; infinite entries drop out.
double softmin3(double x, double y, double z, double gamma) {
  double lo = std::min(x, std::min(y, z));
  if (!std::isfinite(lo)) return lo;
  double acc = 0.0;
  if (std::isfinite(x)) acc += std::exp(-(x - lo) / gamma);
  if (std::isfinite(y)) acc += std::exp(-(y - lo) / gamma);
  if (std::isfinite(z)) acc += std::exp(-(z - lo) / gamma);
  return lo - gamma * std::log(acc);
}

// Full soft-DTW DP with the padded border used by the backward recursion.
// R has (n+2) x (m+2) entries; R[0][0] = 0, other border entries +inf.
std::vector<double> soft_dtw_table(const double* a, std::size_t n, const double* b, std::size_t m, std::size_t d,
                                   double gamma, std::vector<double>* cost_out) {
  const std::size_t w = m + 2;
  std::vector<double> r((n + 2) * w, kInf);
  r[0] = 0.0;
  if (cost_out) cost_out->assign(n * m, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      double c = sq_dist(a + (i - 1) * d, b + (j - 1) * d, d);
      if (cost_out) (*cost_out)[(i - 1) * m + (j - 1)] = c;
      r[i * w + j] = c + softmin3(r[(i - 1) * w + j - 1], r[(i - 1) * w + j], r[i * w + j - 1], gamma);
    }
  }
  return r;
}

}  // namespace

Tensor cost_matrix(const MotionSequence& a, const MotionSequence& b) {
  check_skeletons(a, b);
  const std::size_t n = a.frame_count(), m = b.frame_count(), d = a.joint_count() * 3;
  Tensor costs({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) costs.at(i, j) = sq_dist(a.frame(i), b.frame(j), d);
  return costs;
}

double dtw_flat(const double* a, std::size_t n, const double* b, std::size_t m, std::size_t d) {
  std::vector<double> row(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double up_left = (i == 0) ? kInf : row[0];  // R[i-1, 0] before overwrite
    double c0 = sq_dist(a + i * d, b, d);
    row[0] = (i == 0) ? c0 : c0 + up_left;
    double diag = up_left;
    for (std::size_t j = 1; j < m; ++j) {
      double up = (i == 0) ? kInf : row[j];
      double best;
      if (i == 0) {
        best = row[j - 1];
      } else {
        best = std::min(up, std::min(row[j - 1], diag));
      }
      row[j] = sq_dist(a + i * d, b + j * d, d) + best;
      diag = up;
    }
  }
  return row[m - 1];
}

double soft_dtw_flat(const double* a, std::size_t n, const double* b, std::size_t m, std::size_t d, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("soft-dtw gamma must be > 0");
  auto r = soft_dtw_table(a, n, b, m, d, gamma, nullptr);
  return r[n * (m + 2) + m];
}

SoftDtwResult soft_dtw_with_grad_flat(const double* a, std::size_t n, const double* b, std::size_t m, std::size_t d,
                                      double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("soft-dtw gamma must be > 0");
  std::vector<double> cost;
  auto r = soft_dtw_table(a, n, b, m, d, gamma, &cost);
  const std::size_t w = m + 2;

  // Backward alignment-weight recursion: e[i][j] = d(value)/d(cost(i,j)).
  std::vector<double> e((n + 2) * w, 0.0);
  e[(n + 1) * w + (m + 1)] = 1.0;
  // Border bookkeeping for the last row/column transitions.
  r[(n + 1) * w + (m + 1)] = r[n * w + m];
  auto cost_at = [&](std::size_t i, std::size_t j) -> double {
    // 1-based DP indices; the virtual terminal cell has zero cost.
    if (i == n + 1 && j == m + 1) return 0.0;
    if (i > n || j > m) return kInf;
    return cost[(i - 1) * m + (j - 1)];
  };
  for (std::size_t i = n; i >= 1; --i) {
    for (std::size_t jj = m; jj >= 1; --jj) {
      double rij = r[i * w + jj];
      double down = 0.0, right = 0.0, diag = 0.0;
      double cd = cost_at(i + 1, jj);
      if (std::isfinite(cd) && std::isfinite(r[(i + 1) * w + jj]))
        down = std::exp((r[(i + 1) * w + jj] - rij - cd) / gamma) * e[(i + 1) * w + jj];
      double cr = cost_at(i, jj + 1);
      if (std::isfinite(cr) && std::isfinite(r[i * w + jj + 1]))
        right = std::exp((r[i * w + jj + 1] - rij - cr) / gamma) * e[i * w + jj + 1];
      double cg = cost_at(i + 1, jj + 1);
      if (std::isfinite(cg) && std::isfinite(r[(i + 1) * w + jj + 1]))
        diag = std::exp((r[(i + 1) * w + jj + 1] - rij - cg) / gamma) * e[(i + 1) * w + jj + 1];
      e[i * w + jj] = down + right + diag;
    }
  }

  SoftDtwResult out;
  out.value = r[n * w + m];
  out.grad_a = Tensor({n, d});
  // Chain rule through cost(i,j) = ||a_i - b_j||^2.
  for (std::size_t i = 0; i < n; ++i) {
    double* g = out.grad_a.data() + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      double weight = e[(i + 1) * w + (j + 1)];
      if (weight == 0.0) continue;
      const double* ai = a + i * d;
      const double* bj = b + j * d;
      for (std::size_t q = 0; q < d; ++q) g[q] += weight * 2.0 * (ai[q] - bj[q]);
    }
  }
  return out;
}

double dtw(const MotionSequence& a, const MotionSequence& b) {
  check_skeletons(a, b);
  return dtw_flat(a.frames.data(), a.frame_count(), b.frames.data(), b.frame_count(), a.joint_count() * 3);
}

double soft_dtw(const MotionSequence& a, const MotionSequence& b, const SoftDtwConfig& cfg) {
  check_skeletons(a, b);
  return soft_dtw_flat(a.frames.data(), a.frame_count(), b.frames.data(), b.frame_count(), a.joint_count() * 3,
                       cfg.gamma);
}

Tensor soft_dtw_grad(const MotionSequence& a, const MotionSequence& b, const SoftDtwConfig& cfg) {
  check_skeletons(a, b);
  const std::size_t n = a.frame_count(), j = a.joint_count();
  auto res = soft_dtw_with_grad_flat(a.frames.data(), n, b.frames.data(), b.frame_count(), j * 3, cfg.gamma);
  return Tensor({n, j, 3}, std::move(res.grad_a.values()));
}

std::vector<MatchedPair> match_pairs(std::span<const MatchCandidate> incorrect,
                                     std::span<const MatchCandidate> correct, int threads) {
  // Pre-check: every (subject, exercise) in `incorrect` needs a candidate.
  for (const auto& inc : incorrect) {
    bool found = false;
    for (const auto& cand : correct)
      if (cand.subject == inc.subject && cand.exercise == inc.exercise) {
        found = true;
        break;
      }
    if (!found) throw NoCorrectCandidate(inc.subject, inc.exercise);
  }

  std::vector<MatchedPair> pairs(incorrect.size());
  parallel_for(incorrect.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& inc = incorrect[i];
      double best_cost = kInf;
      const MatchCandidate* best = nullptr;
      for (const auto& cand : correct) {
        if (cand.subject != inc.subject || cand.exercise != inc.exercise) continue;
        double cost = dtw(*inc.seq, *cand.seq);
        if (cost < best_cost || (cost == best_cost && best && cand.id < best->id)) {
          best_cost = cost;
          best = &cand;
        }
      }
      pairs[i] = MatchedPair{inc.id, best->id, best_cost};
    }
  });
  return pairs;
}

}  // namespace formcoach::align
