#include "mcrec/geometry.hpp"

#include <cmath>
#include <limits>

namespace mcrec {

namespace {
void check_pair(const ManifoldPoint& x, const ManifoldPoint& y, const char* op) {
  if (!x.curvature().same_space(y.curvature())) {
    throw ContractError(std::string(op) + ": operands from different-curvature spaces");
  }
  if (x.dim() != y.dim()) {
    throw ContractError(std::string(op) + ": dimension mismatch");
  }
}
}  // namespace

Curvature::Curvature(double k, double eps) : kappa(k), taylor_eps(eps) {
  if (!std::isfinite(k)) throw DomainError("Curvature: kappa must be finite");
  if (!(eps > 0.0)) throw DomainError("Curvature: taylor_eps must be positive");
}

double Curvature::domain_radius() const {
  if (kappa >= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(-kappa);
}

ManifoldPoint::ManifoldPoint(Eigen::VectorXd coords, Curvature curv)
    : coords_(std::move(coords)), curv_(curv) {
  if (!coords_.allFinite()) {
    throw DomainError("ManifoldPoint: non-finite coordinates");
  }
  if (1.0 + curv_.kappa * coords_.squaredNorm() <= 0.0) {
    throw DomainError("ManifoldPoint: coordinates outside curvature domain");
  }
}

ManifoldPoint ManifoldPoint::origin(int dim, Curvature curv) {
  return ManifoldPoint(Eigen::VectorXd::Zero(dim), curv);
}

double tan_kappa(double t, const Curvature& c) {
  if (!std::isfinite(t)) throw DomainError("tan_kappa: non-finite argument");
  return kops::tan_kappa(t, c.kappa, c.taylor_eps);
}

double atan_kappa(double t, const Curvature& c) {
  if (!std::isfinite(t)) throw DomainError("atan_kappa: non-finite argument");
  return kops::atan_kappa(t, c.kappa, c.taylor_eps);
}

double conformal_factor(const ManifoldPoint& x) {
  return kops::conformal_factor(x.coords(), x.curvature().kappa);
}

ManifoldPoint mobius_add(const ManifoldPoint& x, const ManifoldPoint& y) {
  check_pair(x, y, "mobius_add");
  Eigen::VectorXd out = kops::mobius_add(x.coords(), y.coords(), x.curvature().kappa);
  return ManifoldPoint(std::move(out), x.curvature());
}

ManifoldPoint exp_map(const ManifoldPoint& x, const TangentVector& v) {
  check_pair(x, v.base, "exp_map");
  if (v.base.coords() != x.coords()) {
    throw ContractError("exp_map: tangent vector not based at x");
  }
  if (v.coords.size() != x.dim()) {
    throw ContractError("exp_map: tangent dimension mismatch");
  }
  const Curvature& c = x.curvature();
  Eigen::VectorXd out = kops::exp_map(x.coords(), v.coords, c.kappa, c.taylor_eps);
  return project_to_domain(std::move(out), c);
}

ManifoldPoint exp_map_origin(const Eigen::VectorXd& v, const Curvature& c) {
  Eigen::VectorXd out = kops::exp_map_origin(v, c.kappa, c.taylor_eps);
  return project_to_domain(std::move(out), c);
}

TangentVector log_map(const ManifoldPoint& x, const ManifoldPoint& y) {
  check_pair(x, y, "log_map");
  const Curvature& c = x.curvature();
  Eigen::VectorXd out = kops::log_map(x.coords(), y.coords(), c.kappa, c.taylor_eps);
  return TangentVector{std::move(out), x};
}

Eigen::VectorXd log_map_origin(const ManifoldPoint& y) {
  const Curvature& c = y.curvature();
  return kops::log_map_origin(y.coords(), c.kappa, c.taylor_eps);
}

double dist(const ManifoldPoint& x, const ManifoldPoint& y) {
  check_pair(x, y, "dist");
  const Curvature& c = x.curvature();
  return kops::dist(x.coords(), y.coords(), c.kappa, c.taylor_eps);
}

double dist_to_origin(const ManifoldPoint& x) {
  const Curvature& c = x.curvature();
  return kops::dist_to_origin(x.coords(), c.kappa, c.taylor_eps);
}

ManifoldPoint mobius_matvec(const RMatrix& m, const ManifoldPoint& y) {
  if (m.cols() != y.dim()) throw ContractError("mobius_matvec: dimension mismatch");
  const Curvature& c = y.curvature();
  Eigen::VectorXd out = kops::mobius_matvec(m, y.coords(), c.kappa, c.taylor_eps);
  return project_to_domain(std::move(out), c);
}

ManifoldPoint kappa_concat(const ManifoldPoint& x, const ManifoldPoint& y) {
  if (!x.curvature().same_space(y.curvature())) {
    throw ContractError("kappa_concat: operands from different-curvature spaces");
  }
  const Curvature& c = x.curvature();
  Eigen::VectorXd out = kops::kappa_concat(x.coords(), y.coords(), c.kappa, c.taylor_eps);
  return project_to_domain(std::move(out), c);
}

double kappa_dot(const ManifoldPoint& x, const ManifoldPoint& y) {
  check_pair(x, y, "kappa_dot");
  const Curvature& c = x.curvature();
  return kops::kappa_dot(x.coords(), y.coords(), c.kappa, c.taylor_eps);
}

ManifoldPoint project_to_domain(Eigen::VectorXd raw, const Curvature& c) {
  Eigen::VectorXd out = kops::project_to_domain(raw, c.kappa);
  return ManifoldPoint(std::move(out), c);
}

}  // namespace mcrec
