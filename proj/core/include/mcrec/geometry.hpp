#pragma once

#include <Eigen/Dense>

#include "mcrec/kappa_ops.hpp"

// Strongly typed eager wrappers around the kappa-stereographic
// formulas. Points carry their curvature so mixed-space operands are
// rejected instead of silently producing garbage.

namespace mcrec {

struct Curvature {
  double kappa = 0.0;
  // Half-width of the Taylor branch used around kappa = 0.
  double taylor_eps = kops::kDefaultTaylorEps;

  Curvature() = default;
  explicit Curvature(double k, double eps = kops::kDefaultTaylorEps);

  bool same_space(const Curvature& o) const { return kappa == o.kappa; }
  // Radius of the open-ball domain; +inf for kappa >= 0.
  double domain_radius() const;
};

class ManifoldPoint {
 public:
  // Validates the domain: finite coordinates with 1 + kappa||x||^2 > 0.
  ManifoldPoint(Eigen::VectorXd coords, Curvature curv);
  static ManifoldPoint origin(int dim, Curvature curv);

  const Eigen::VectorXd& coords() const { return coords_; }
  const Curvature& curvature() const { return curv_; }
  int dim() const { return static_cast<int>(coords_.size()); }

 private:
  Eigen::VectorXd coords_;
  Curvature curv_;
};

// A tangent vector remembers its base point.
struct TangentVector {
  Eigen::VectorXd coords;
  ManifoldPoint base;
};

// Curvature-scaled tangent and its inverse. Non-finite input is a
// domain error.
double tan_kappa(double t, const Curvature& c);
double atan_kappa(double t, const Curvature& c);

double conformal_factor(const ManifoldPoint& x);

ManifoldPoint mobius_add(const ManifoldPoint& x, const ManifoldPoint& y);

// exp map at v.base; x must be the same point v is based at.
ManifoldPoint exp_map(const ManifoldPoint& x, const TangentVector& v);
ManifoldPoint exp_map_origin(const Eigen::VectorXd& v, const Curvature& c);

TangentVector log_map(const ManifoldPoint& x, const ManifoldPoint& y);
Eigen::VectorXd log_map_origin(const ManifoldPoint& y);

double dist(const ManifoldPoint& x, const ManifoldPoint& y);
double dist_to_origin(const ManifoldPoint& x);

ManifoldPoint mobius_matvec(const RMatrix& m, const ManifoldPoint& y);

// Output lives in the same-curvature space of dimension dim(x)+dim(y).
ManifoldPoint kappa_concat(const ManifoldPoint& x, const ManifoldPoint& y);
double kappa_dot(const ManifoldPoint& x, const ManifoldPoint& y);

// Clamps raw coordinates into the valid domain (rescales onto the
// safety radius for kappa < 0) and wraps them as a point.
ManifoldPoint project_to_domain(Eigen::VectorXd raw, const Curvature& c);

}  // namespace mcrec
