#include <doctest.h>

#include <cmath>

#include <mcrec/geometry.hpp>
#include <mcrec/rng.hpp>

#include "support/generators.hpp"

using namespace mcrec;
using testsupport::kKappaGrid;
using testsupport::random_point;
using testsupport::random_tangent;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

ManifoldPoint pt(std::initializer_list<double> xs, double kappa) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return ManifoldPoint(std::move(v), Curvature(kappa));
}

}  // namespace

TEST_CASE("curvature-scaled tangent matches closed forms") {
  Curvature hyp(-1.0), sph(1.0), flat(0.0);
  CHECK(tan_kappa(0.5, hyp) == doctest::Approx(0.4621171572600097585).epsilon(1e-15));
  CHECK(atan_kappa(0.5, hyp) == doctest::Approx(0.5493061443340548457).epsilon(1e-15));
  CHECK(tan_kappa(0.5, sph) == doctest::Approx(std::tan(0.5)).epsilon(1e-15));
  CHECK(atan_kappa(0.5, sph) == doctest::Approx(std::atan(0.5)).epsilon(1e-15));
  CHECK(tan_kappa(0.5, flat) == 0.5);
  CHECK(atan_kappa(0.5, flat) == 0.5);
  // Rescaled curvature: tan_kappa(t, k) = tan(t sqrt(k)) / sqrt(k).
  Curvature half(0.5);
  CHECK(tan_kappa(0.6, half) == doctest::Approx(0.6387957042783594853).epsilon(1e-15));
  CHECK_THROWS_AS(tan_kappa(std::nan(""), hyp), DomainError);
  CHECK_THROWS_AS(atan_kappa(INFINITY, sph), DomainError);
}

TEST_CASE("taylor branch joins the curved branches smoothly") {
  const double eps = kops::kDefaultTaylorEps;
  for (double t : {0.3, 1.0, 2.0}) {
    const double below = kops::tan_kappa(t, eps * (1.0 - 1e-9));
    const double above = kops::tan_kappa(t, eps * (1.0 + 1e-9));
    CHECK(std::abs(below - above) < 1e-12);
    const double nbelow = kops::tan_kappa(t, -eps * (1.0 - 1e-9));
    const double nabove = kops::tan_kappa(t, -eps * (1.0 + 1e-9));
    CHECK(std::abs(nbelow - nabove) < 1e-12);
    CHECK(std::abs(kops::atan_kappa(t, eps * (1.0 - 1e-9)) -
                   kops::atan_kappa(t, eps * (1.0 + 1e-9))) < 1e-12);
  }
}

TEST_CASE("conformal factor") {
  auto x = pt({0.5, 0.0}, -1.0);
  CHECK(conformal_factor(x) == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
  CHECK(conformal_factor(ManifoldPoint::origin(3, Curvature(0.7))) == 2.0);
}

TEST_CASE("moebius addition reproduces fixed points") {
  // Collinear hyperbolic pair; the result is exactly rational.
  auto z = mobius_add(pt({0.5, 0.0}, -1.0), pt({0.5, 0.0}, -1.0));
  CHECK(z.coords()[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(z.coords()[1] == 0.0);

  auto h = mobius_add(pt({0.1, 0.2}, -1.0), pt({-0.3, 0.25}, -1.0));
  CHECK(h.coords()[0] == doctest::Approx(-0.15821501014198782961).epsilon(1e-14));
  CHECK(h.coords()[1] == doctest::Approx(0.45436105476673427992).epsilon(1e-14));

  auto s = mobius_add(pt({0.4, -0.1}, 1.0), pt({0.2, 0.3}, 1.0));
  CHECK(s.coords()[0] == doctest::Approx(0.58778874308643314174).epsilon(1e-14));
  CHECK(s.coords()[1] == doctest::Approx(0.29714781477063225247).epsilon(1e-14));
}

TEST_CASE("moebius addition rejects the antipodal degeneracy") {
  // kappa = 1, x = (0.5, 0), y = (2, 0): denominator is exactly zero.
  CHECK_THROWS_AS(mobius_add(pt({0.5, 0.0}, 1.0), pt({2.0, 0.0}, 1.0)), NumericalError);
}

TEST_CASE("exp and log maps reproduce fixed points") {
  auto e = exp_map_origin(vec2(0.3, 0.0), Curvature(-1.0));
  CHECK(e.coords()[0] == doctest::Approx(0.29131261245159090582).epsilon(1e-14));

  auto base = pt({0.2, 0.0}, -1.0);
  auto y = exp_map(base, TangentVector{vec2(0.3, 0.1), base});
  CHECK(y.coords()[0] == doctest::Approx(0.47474996676405237892).epsilon(1e-13));
  CHECK(y.coords()[1] == doctest::Approx(0.085829554431712310118).epsilon(1e-13));
  auto v = log_map(base, y);
  CHECK(v.coords[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(v.coords[1] == doctest::Approx(0.1).epsilon(1e-12));

  auto lv = log_map(pt({0.1, 0.2}, -1.0), pt({-0.3, 0.25}, -1.0));
  CHECK(lv.coords[0] == doctest::Approx(-0.41330754469311008389).epsilon(1e-13));
  CHECK(lv.coords[1] == doctest::Approx(0.015645711471032558381).epsilon(1e-13));
}

TEST_CASE("distances reproduce fixed points") {
  CHECK(dist_to_origin(pt({0.5, 0.0}, -1.0)) ==
        doctest::Approx(1.0986122886681096914).epsilon(1e-15));  // log(3)
  CHECK(dist_to_origin(pt({0.7, 0.0}, 1.0)) ==
        doctest::Approx(1.2214519287784172331).epsilon(1e-15));  // 2 atan(0.7)
  CHECK(dist(pt({0.1, 0.2}, -1.0), pt({-0.3, 0.25}, -1.0)) ==
        doctest::Approx(0.87074436214731411624).epsilon(1e-14));
  CHECK(dist(pt({0.4, -0.1}, 1.0), pt({0.2, 0.3}, 1.0)) ==
        doctest::Approx(0.79896189481352396468).epsilon(1e-14));
  // Flat space: twice the Euclidean distance.
  CHECK(dist(pt({0.1, 0.2}, 0.0), pt({-0.3, 0.25}, 0.0)) ==
        doctest::Approx(0.80622577482985496524).epsilon(1e-15));
}

TEST_CASE("matrix action, concatenation and inner product") {
  RMatrix twice = 2.0 * RMatrix::Identity(2, 2);
  auto m = mobius_matvec(twice, pt({0.4, 0.0}, -1.0));
  CHECK(m.coords()[0] == doctest::Approx(0.68965517241379310345).epsilon(1e-14));

  Eigen::VectorXd a(1), b(1);
  a << 0.2;
  b << 0.3;
  auto c = kappa_concat(ManifoldPoint(a, Curvature(-1.0)), ManifoldPoint(b, Curvature(-1.0)));
  REQUIRE(c.dim() == 2);
  CHECK(c.coords()[0] == doctest::Approx(0.19396102537394572492).epsilon(1e-14));
  CHECK(c.coords()[1] == doctest::Approx(0.29612777328577506355).epsilon(1e-14));

  CHECK(kappa_dot(pt({0.3, 0.0}, -1.0), pt({0.3, 0.0}, -1.0)) ==
        doctest::Approx(0.095802385386050931524).epsilon(1e-14));
}

TEST_CASE("projection pulls hyperbolic points onto the safety radius") {
  auto p = project_to_domain(vec2(1.0, 0.0), Curvature(-4.0));
  CHECK(p.coords().norm() == doctest::Approx(0.499995).epsilon(1e-15));
  // No-op inside the ball and everywhere for kappa >= 0.
  CHECK(project_to_domain(vec2(0.3, 0.1), Curvature(-1.0)).coords() == vec2(0.3, 0.1));
  CHECK(project_to_domain(vec2(5.0, 0.0), Curvature(1.0)).coords() == vec2(5.0, 0.0));
  CHECK_THROWS_AS(project_to_domain(vec2(std::nan(""), 0.0), Curvature(-1.0)), DomainError);
}

TEST_CASE("points and operands are validated") {
  CHECK_THROWS_AS(pt({std::nan(""), 0.0}, -1.0), DomainError);
  CHECK_THROWS_AS(pt({1.2, 0.0}, -1.0), DomainError);  // outside the unit ball
  CHECK_THROWS_AS(Curvature(std::nan("")), DomainError);
  CHECK_THROWS_AS(Curvature(-1.0, 0.0), DomainError);
  CHECK_THROWS_AS(mobius_add(pt({0.1, 0.0}, -1.0), pt({0.1, 0.0}, -0.5)), ContractError);
  CHECK_THROWS_AS(dist(pt({0.1, 0.0}, -1.0), pt({0.1, 0.0, 0.0}, -1.0)), ContractError);
  auto x = pt({0.1, 0.0}, -1.0);
  auto other = pt({0.2, 0.0}, -1.0);
  CHECK_THROWS_AS(exp_map(x, TangentVector{vec2(0.1, 0.0), other}), ContractError);
  RMatrix w = RMatrix::Identity(3, 3);
  CHECK_THROWS_AS(mobius_matvec(w, x), ContractError);
}

TEST_CASE("exp/log roundtrip at the origin across curvatures") {
  auto rng = make_rng(mix64(11, "geom-roundtrip"));
  for (double k : kKappaGrid) {
    for (int it = 0; it < 200; ++it) {
      const int dim = 2 + static_cast<int>(it % 7);
      Eigen::VectorXd v = random_tangent(rng, dim, k);
      Eigen::VectorXd back = kops::log_map_origin(kops::exp_map_origin(v, k), k);
      CAPTURE(k);
      CHECK((back - v).norm() <= 1e-9 * std::max(1.0, v.norm()));
    }
  }
}

TEST_CASE("exp/log roundtrip at generic base points") {
  auto rng = make_rng(mix64(12, "geom-roundtrip-base"));
  for (double k : kKappaGrid) {
    for (int it = 0; it < 200; ++it) {
      const int dim = 2 + static_cast<int>(it % 5);
      Eigen::VectorXd x = random_point(rng, dim, k, 0.6, 1.0);
      Eigen::VectorXd y = random_point(rng, dim, k, 0.6, 1.0);
      Eigen::VectorXd v = kops::log_map(x, y, k);
      Eigen::VectorXd y2 = kops::exp_map(x, v, k);
      CAPTURE(k);
      CHECK((y2 - y).norm() <= 1e-9 * std::max(1.0, y.norm()));
    }
  }
}

TEST_CASE("moebius identities") {
  auto rng = make_rng(mix64(13, "geom-mobius"));
  for (double k : kKappaGrid) {
    for (int it = 0; it < 200; ++it) {
      const int dim = 2 + static_cast<int>(it % 7);
      Eigen::VectorXd x = random_point(rng, dim, k);
      Eigen::VectorXd y = random_point(rng, dim, k);
      Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
      Eigen::VectorXd nx = -x;
      CAPTURE(k);
      CHECK((kops::mobius_add(zero, x, k) - x).norm() <= 1e-12);
      CHECK((kops::mobius_add(x, zero, k) - x).norm() <= 1e-12);
      CHECK(kops::mobius_add(nx, x, k).norm() <= 1e-12);
      // Left cancellation: (-x) + (x + y) recovers y.
      Eigen::VectorXd xy = kops::mobius_add(x, y, k);
      CHECK((kops::mobius_add(nx, xy, k) - y).norm() <= 1e-9);
    }
  }
}

TEST_CASE("distance axioms") {
  auto rng = make_rng(mix64(14, "geom-dist"));
  for (double k : kKappaGrid) {
    for (int it = 0; it < 200; ++it) {
      const int dim = 2 + static_cast<int>(it % 5);
      Eigen::VectorXd x = random_point(rng, dim, k);
      Eigen::VectorXd y = random_point(rng, dim, k);
      Eigen::VectorXd z = random_point(rng, dim, k);
      const double dxy = kops::dist(x, y, k);
      CAPTURE(k);
      CHECK(dxy >= 0.0);
      // Relative: near-flat curvatures allow distances in the thousands.
      CHECK(std::abs(dxy - kops::dist(y, x, k)) <= 1e-12 * std::max(1.0, dxy));
      CHECK(kops::dist(x, x, k) <= 1e-12);
      CHECK(dxy <= kops::dist(x, z, k) + kops::dist(z, y, k) + 1e-9);
      if (k == 0.0) {
        CHECK(std::abs(dxy - 2.0 * (x - y).norm()) <= 1e-12);
      }
    }
  }
}

TEST_CASE("operations vary continuously through kappa = 0") {
  auto rng = make_rng(mix64(15, "geom-continuity"));
  for (int it = 0; it < 200; ++it) {
    const int dim = 2 + static_cast<int>(it % 5);
    Eigen::VectorXd x = random_point(rng, dim, 0.0, 0.8, 1.5);
    Eigen::VectorXd y = random_point(rng, dim, 0.0, 0.8, 1.5);
    const double flat = kops::dist(x, y, 0.0);
    CHECK(std::abs(kops::dist(x, y, -1e-6) - flat) <= 1e-5);
    CHECK(std::abs(kops::dist(x, y, 1e-6) - flat) <= 1e-5);
    Eigen::VectorXd e0 = kops::exp_map_origin(x, 0.0);
    CHECK((kops::exp_map_origin(x, -1e-6) - e0).norm() <= 1e-5);
    CHECK((kops::exp_map_origin(x, 1e-6) - e0).norm() <= 1e-5);
  }
}

TEST_CASE("projection output always lies in the domain") {
  auto rng = make_rng(mix64(16, "geom-project"));
  std::uniform_real_distribution<double> big(0.0, 10.0);
  for (double k : {-2.0, -1.0, -0.25}) {
    const double radius = 1.0 / std::sqrt(-k);
    for (int it = 0; it < 200; ++it) {
      Eigen::VectorXd raw = big(rng) * testsupport::random_direction(rng, 3);
      auto p = project_to_domain(raw, Curvature(k));
      CHECK(p.coords().norm() < radius);
    }
  }
}
