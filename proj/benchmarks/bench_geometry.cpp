#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include <mcrec/kappa_ops.hpp>
#include <mcrec/rng.hpp>

// Eager formula layer on typical embedding widths. The kappa argument
// selects the branch: -1 hyperbolic, 0 flat (Taylor), 1 spherical.

namespace {

std::vector<Eigen::VectorXd> sample_points(int n, int dim, double kappa) {
  auto rng = mcrec::make_rng(mcrec::mix64(91, "bench"));
  std::normal_distribution<double> gauss(0.0, 0.2);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) v[j] = gauss(rng);
    out.push_back(mcrec::kops::project_to_domain(v, kappa));
  }
  return out;
}

void bm_mobius_add(benchmark::State& state) {
  const double kappa = static_cast<double>(state.range(0));
  auto pts = sample_points(64, 32, kappa);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& x = pts[i % pts.size()];
    const auto& y = pts[(i + 7) % pts.size()];
    benchmark::DoNotOptimize(mcrec::kops::mobius_add(x, y, kappa));
    ++i;
  }
}

void bm_exp_log_roundtrip(benchmark::State& state) {
  const double kappa = static_cast<double>(state.range(0));
  auto pts = sample_points(64, 32, kappa);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& x = pts[i % pts.size()];
    Eigen::VectorXd v = mcrec::kops::log_map_origin(x, kappa);
    benchmark::DoNotOptimize(mcrec::kops::exp_map_origin(v, kappa));
    ++i;
  }
}

void bm_dist(benchmark::State& state) {
  const double kappa = static_cast<double>(state.range(0));
  auto pts = sample_points(64, 32, kappa);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& x = pts[i % pts.size()];
    const auto& y = pts[(i + 13) % pts.size()];
    benchmark::DoNotOptimize(mcrec::kops::dist(x, y, kappa));
    ++i;
  }
}

void bm_mobius_matvec(benchmark::State& state) {
  const double kappa = static_cast<double>(state.range(0));
  auto pts = sample_points(64, 32, kappa);
  mcrec::RMatrix w = mcrec::RMatrix::Random(32, 32) * 0.1;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mcrec::kops::mobius_matvec(w, pts[i % pts.size()], kappa));
    ++i;
  }
}

}  // namespace

BENCHMARK(bm_mobius_add)->Arg(-1)->Arg(0)->Arg(1);
BENCHMARK(bm_exp_log_roundtrip)->Arg(-1)->Arg(0)->Arg(1);
BENCHMARK(bm_dist)->Arg(-1)->Arg(0)->Arg(1);
BENCHMARK(bm_mobius_matvec)->Arg(-1)->Arg(0)->Arg(1);
