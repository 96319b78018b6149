#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "mcrec/errors.hpp"
#include "mcrec/strictord.hpp"

// Core formulas of the kappa-stereographic model: one chart that covers
// hyperbolic space (kappa < 0, open ball of radius 1/sqrt(-kappa)),
// Euclidean space (kappa = 0) and the sphere (kappa > 0), smoothly in
// kappa. Everything here is templated over a scalar type S and vector
// type V so the same expressions run either eagerly on
// (double, Eigen::VectorXd) or recorded on an autodiff tape
// (Var, Var). Branch decisions use the current numeric value of kappa;
// both instantiations therefore take identical branches.

namespace mcrec {

using RMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// --- eager hooks for (double, Eigen::VectorXd) -----------------------

inline double scalar_value(double x) { return x; }
inline const Eigen::VectorXd& vector_value(const Eigen::VectorXd& v) { return v; }
inline Eigen::VectorXd zero_vector_like(const Eigen::VectorXd& v) {
  return Eigen::VectorXd::Zero(v.size());
}
inline double make_scalar_like(double, double c) { return c; }

inline double scale(double s, double v) { return s * v; }
inline Eigen::VectorXd scale(double s, const Eigen::VectorXd& v) { return s * v; }
inline double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return strictord::dot(a.data(), b.data(), a.size());
}
inline double squared_norm(const Eigen::VectorXd& v) {
  return strictord::dot(v.data(), v.data(), v.size());
}
inline double norm(const Eigen::VectorXd& v) { return std::sqrt(squared_norm(v)); }
inline Eigen::VectorXd matvec(const RMatrix& m, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(m.rows());
  strictord::matvec(m.data(), x.data(), out.data(), m.rows(), m.cols());
  return out;
}
inline Eigen::VectorXd concat(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}
inline double component(const Eigen::VectorXd& v, int i) { return v[i]; }
inline Eigen::VectorXd leaky_relu(const Eigen::VectorXd& v, double slope) {
  return (v.array().max(0.0) + slope * v.array().min(0.0)).matrix();
}
inline Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  Eigen::ArrayXd e = (v.array() - v.maxCoeff()).exp();
  return (e / strictord::sum(e.data(), e.size())).matrix();
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double clamp_abs(double x, double limit) { return std::clamp(x, -limit, limit); }
inline double hinge(double x) { return std::max(x, 0.0); }

inline Eigen::VectorXd stack(const std::vector<double>& parts) {
  return Eigen::Map<const Eigen::VectorXd>(parts.data(),
                                           static_cast<Eigen::Index>(parts.size()));
}

// --- shared numeric guards -------------------------------------------

namespace kops {

// Width of the Taylor branch around kappa = 0.
constexpr double kDefaultTaylorEps = 1e-7;
// atanh argument cap: |t * sqrt(-kappa)| <= 1 - 1e-12.
constexpr double kAtanhClamp = 1.0 - 1e-12;
// tan argument kept this far below the pole at pi / (2 sqrt(kappa)).
constexpr double kTanGuard = 1e-6;
// Safety factor for the open-ball domain, kappa < 0.
constexpr double kBallSafety = 1.0 - 1e-5;
// Norms below this are treated as exactly zero.
constexpr double kTinyNorm = 1e-15;
// Moebius denominators below this magnitude are degenerate.
constexpr double kDegenerateDen = 1e-15;

// Curvature-scaled tangent. Smooth in kappa: a cubic Taylor branch is
// used for |kappa| <= eps, matching both curved branches to O(eps^2).
template <class S>
S tan_kappa(const S& t, const S& kappa, double eps = kDefaultTaylorEps) {
  using std::sqrt;
  using std::tan;
  using std::tanh;
  const double k = scalar_value(kappa);
  if (k > eps) {
    // Keep the argument strictly below the pole of tan.
    const double limit = M_PI / (2.0 * std::sqrt(k)) - kTanGuard;
    S rk = sqrt(kappa);
    return tan(clamp_abs(t, limit) * rk) / rk;
  }
  if (k < -eps) {
    S rk = sqrt(-kappa);
    return tanh(t * rk) / rk;
  }
  return t + kappa * (t * t * t) * (1.0 / 3.0);
}

// Inverse of tan_kappa with the matching branch structure.
template <class S>
S atan_kappa(const S& t, const S& kappa, double eps = kDefaultTaylorEps) {
  using std::atan;
  using std::atanh;
  using std::sqrt;
  const double k = scalar_value(kappa);
  if (k > eps) {
    S rk = sqrt(kappa);
    return atan(t * rk) / rk;
  }
  if (k < -eps) {
    const double limit = kAtanhClamp / std::sqrt(-k);
    S rk = sqrt(-kappa);
    return atanh(clamp_abs(t, limit) * rk) / rk;
  }
  return t - kappa * (t * t * t) * (1.0 / 3.0);
}

// Conformal factor lambda_x = 2 / (1 + kappa ||x||^2).
template <class S, class V>
S conformal_factor(const V& x, const S& kappa) {
  S den = 1.0 + kappa * squared_norm(x);
  if (scalar_value(den) <= 0.0) {
    throw DomainError("conformal_factor: point outside curvature domain");
  }
  return 2.0 / den;
}

// Pulls a point with excessive norm back inside the open ball when
// kappa < 0. No-op for kappa >= 0. Non-finite coordinates are a domain
// error.
template <class S, class V>
V project_to_domain(const V& x, const S& kappa) {
  if (!vector_value(x).allFinite()) {
    throw DomainError("project_to_domain: non-finite coordinates");
  }
  const double k = scalar_value(kappa);
  if (k >= 0.0) return x;
  const double max_norm = kBallSafety / std::sqrt(-k);
  if (vector_value(x).norm() < max_norm) return x;
  using std::sqrt;
  S target = kBallSafety / sqrt(-kappa);
  return scale(target / norm(x), x);
}

// Moebius addition x (+) y. The result is re-projected into the open
// ball for kappa < 0 to absorb rounding at the boundary.
template <class S, class V>
V mobius_add(const V& x, const V& y, const S& kappa) {
  S kxy = kappa * dot(x, y);
  S kx2 = kappa * squared_norm(x);
  S ky2 = kappa * squared_norm(y);
  S den = 1.0 - 2.0 * kxy + kx2 * ky2;
  if (std::abs(scalar_value(den)) < kDegenerateDen) {
    throw NumericalError("mobius_add: degenerate denominator");
  }
  S inv = 1.0 / den;
  S cx = (1.0 - 2.0 * kxy - ky2) * inv;
  S cy = (1.0 + kx2) * inv;
  V out = scale(cx, x) + scale(cy, y);
  return project_to_domain(out, kappa);
}

// exp map at the origin: r = ||v||, out = tan_kappa(r) * v / r.
// The conformal factor at the origin is exactly 2.
template <class S, class V>
V exp_map_origin(const V& v, const S& kappa, double eps = kDefaultTaylorEps) {
  const double n = vector_value(v).norm();
  if (n < kTinyNorm) return v;  // exp_o is the identity to first order at o
  S vn = norm(v);
  S t = tan_kappa(vn, kappa, eps);
  return scale(t / vn, v);
}

// log map at the origin, inverse of exp_map_origin.
template <class S, class V>
V log_map_origin(const V& y, const S& kappa, double eps = kDefaultTaylorEps) {
  const double n = vector_value(y).norm();
  if (n < kTinyNorm) return y;
  S yn = norm(y);
  S t = atan_kappa(yn, kappa, eps);
  return scale(t / yn, y);
}

// exp map at x: x (+) tan_kappa(lambda_x ||v|| / 2) * v / ||v||.
template <class S, class V>
V exp_map(const V& x, const V& v, const S& kappa, double eps = kDefaultTaylorEps) {
  const double n = vector_value(v).norm();
  if (n < kTinyNorm) return x;
  S vn = norm(v);
  S half_lam_vn = vn / (1.0 + kappa * squared_norm(x));
  S t = tan_kappa(half_lam_vn, kappa, eps);
  return mobius_add(x, scale(t / vn, v), kappa);
}

// log map at x: (2 / lambda_x) atan_kappa(||u||) * u / ||u||  with
// u = (-x) (+) y. Returns the zero tangent when y coincides with x.
template <class S, class V>
V log_map(const V& x, const V& y, const S& kappa, double eps = kDefaultTaylorEps) {
  V nx = -x;
  V u = mobius_add(nx, y, kappa);
  const double n = vector_value(u).norm();
  if (n < kTinyNorm) return zero_vector_like(u);
  S un = norm(u);
  S half_inv_lam = 1.0 + kappa * squared_norm(x);  // = 2 / lambda_x
  S t = half_inv_lam * atan_kappa(un, kappa, eps);
  return scale(t / un, u);
}

// Geodesic distance d(x, y) = 2 atan_kappa(||(-x) (+) y||).
// Coinciding points give a hard zero, matching the log_map convention.
template <class S, class V>
S dist(const V& x, const V& y, const S& kappa, double eps = kDefaultTaylorEps) {
  V nx = -x;
  V u = mobius_add(nx, y, kappa);
  if (vector_value(u).norm() < kTinyNorm) return make_scalar_like(kappa, 0.0);
  return 2.0 * atan_kappa(norm(u), kappa, eps);
}

template <class S, class V>
S dist_to_origin(const V& x, const S& kappa, double eps = kDefaultTaylorEps) {
  return 2.0 * atan_kappa(norm(x), kappa, eps);
}

// Matrix action through the origin tangent space: exp_o(M log_o(y)).
template <class S, class V, class Mat>
V mobius_matvec(const Mat& m, const V& y, const S& kappa, double eps = kDefaultTaylorEps) {
  return exp_map_origin(matvec(m, log_map_origin(y, kappa, eps)), kappa, eps);
}

// Curvature-aware concatenation: exp_o([log_o(x); log_o(y)]). Both
// operands are read in the origin tangent space so the operation is
// symmetric in how it treats x and y.
template <class S, class V>
V kappa_concat(const V& x, const V& y, const S& kappa, double eps = kDefaultTaylorEps) {
  return exp_map_origin(concat(log_map_origin(x, kappa, eps), log_map_origin(y, kappa, eps)),
                        kappa, eps);
}

// Curvature-aware inner product: <log_o(x), log_o(y)>.
template <class S, class V>
S kappa_dot(const V& x, const V& y, const S& kappa, double eps = kDefaultTaylorEps) {
  return dot(log_map_origin(x, kappa, eps), log_map_origin(y, kappa, eps));
}

}  // namespace kops
}  // namespace mcrec
