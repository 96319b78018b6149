#pragma once

#include <Eigen/Core>

namespace mcrec {

// Reductions in a pinned sequential order. Eigen's SIMD kernels peel to
// runtime alignment boundaries, so the same numbers in differently
// aligned storage can round differently; the eager and taped paths must
// agree bitwise, so both route reductions through these.
namespace strictord {

inline double dot(const double* a, const double* b, Eigen::Index n) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline double sum(const double* a, Eigen::Index n) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += a[i];
  return acc;
}

inline void matvec(const double* w, const double* x, double* out, Eigen::Index rows,
                   Eigen::Index cols) {
  for (Eigen::Index r = 0; r < rows; ++r) out[r] = dot(w + r * cols, x, cols);
}

}  // namespace strictord
}  // namespace mcrec
