#pragma once

#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace formcoach {

// Base for all library errors. Anything deriving from ValidationError maps to
// CLI exit code 1 (bad input), everything else to 2 (runtime failure).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

struct DegenerateOrientation : Error {
  explicit DegenerateOrientation(const std::string& msg) : Error(msg) {}
};

struct DegenerateBone : Error {
  explicit DegenerateBone(const std::string& msg) : Error(msg) {}
};

struct CoefficientCountExceedsLength : Error {
  explicit CoefficientCountExceedsLength(const std::string& msg) : Error(msg) {}
};

struct SkeletonMismatch : Error {
  explicit SkeletonMismatch(const std::string& msg) : Error(msg) {}
};

struct NoCorrectCandidate : Error {
  NoCorrectCandidate(const std::string& subject, const std::string& exercise)
      : Error("no correct candidate for subject '" + subject + "', exercise '" + exercise + "'"),
        subject(subject),
        exercise(exercise) {}
  std::string subject;
  std::string exercise;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

struct NonScalarRoot : Error {
  explicit NonScalarRoot(const std::string& msg) : Error(msg) {}
};

// Default worker count: FORMCOACH_THREADS env var, else hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("FORMCOACH_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static-partition parallel loop. Each worker owns a contiguous index range,
// so results are bitwise independent of the worker count as long as workers
// write disjoint outputs.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  if (threads < 1) threads = 1;
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace formcoach
