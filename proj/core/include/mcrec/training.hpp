#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mcrec/propagation.hpp"

namespace mcrec {

struct TrainOptions {
  double lr = 1e-3;
  double lr_kappa = 1e-4;  // 0 freezes the curvatures
  int batch = 1024;
  int max_epochs = 500;
  int patience = 20;  // epochs without HR/NDCG improvement before stopping
  int workers = 1;
  std::uint64_t seed = 42;
  int eval_negatives = 100;
};

// Margin for the ranking loss. The geometry-aware rule grows with the
// positive pair's distance relative to both points' spread from the
// origin; the inverted rule shrinks with it.
template <class S>
S margin_term(MarginKind kind, double c, const S& d_ui, const S& d_uo, const S& d_io) {
  switch (kind) {
    case MarginKind::Constant:
      return make_scalar_like(d_ui, c);
    case MarginKind::GeometryAware: {
      if (scalar_value(d_uo) + scalar_value(d_io) < 1e-12) {
        // Both points at the origin: the ratio limit is taken as 0.
        return make_scalar_like(d_ui, 0.5 + c);
      }
      return sigmoid(d_ui / (d_uo + d_io)) + c;
    }
    case MarginKind::Hicf:
      return sigmoid(d_uo + d_io - d_ui) + c;
  }
  throw ContractError("margin_term: unknown margin rule");
}

// Validated eager spelling of the margin rules. Distances must be
// finite and non-negative.
double margin_value(MarginKind kind, double c, double d_ui, double d_uo, double d_io);

// Pairwise hinge: max(d(u,i)^2 - d(u,j)^2 + margin, 0).
double ranking_loss_value(double d_ui, double d_uj, double margin);

// Full per-sample loss: forwards the triple through the model and
// applies the margin ranking objective on the fused distances.
template <class Ctx>
typename Ctx::S sample_loss(ModelForward<Ctx>& fwd, const TrainTriple& t, MarginKind kind,
                            double c) {
  using S = typename Ctx::S;
  fwd.begin_user(t.user);
  auto up = fwd.user_point();
  auto ip = fwd.entity_point(t.pos);
  auto jp = fwd.entity_point(t.neg);
  S d_ui = fwd.pair_distance(up, ip);
  S d_uj = fwd.pair_distance(up, jp);
  S m = [&]() -> S {
    if (kind == MarginKind::Constant) return make_scalar_like(d_ui, c);
    S d_uo = fwd.origin_distance(up);
    S d_io = fwd.origin_distance(ip);
    return margin_term(kind, c, d_ui, d_uo, d_io);
  }();
  return hinge(d_ui * d_ui - d_uj * d_uj + m);
}

// One SGD step over a batch. Per-sample gradients come from individual
// tapes; each worker reduces its contiguous chunk in sample order and
// chunks combine in worker order, so results are bit-reproducible for
// a fixed (seed, workers). Returns the mean batch loss.
double sgd_step(ModelState& model, std::span<const TrainTriple> batch,
                const KnowledgeGraph& kg, const NeighborTable& nt, const TrainOptions& opt);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double hr10 = 0.0, hr20 = 0.0;
  double ndcg10 = 0.0, ndcg20 = 0.0;
  std::vector<double> kappas;
};

struct TrainResult {
  ModelState best;
  int best_epoch = 0;
  double best_hr20 = 0.0;
  double best_ndcg20 = 0.0;
  std::vector<EpochRecord> log;
};

// Epoch loop: reshuffled pair order and a freshly sampled receptive
// field per epoch, per-epoch evaluation on fixed candidate sets, early
// stopping once neither HR@20 nor NDCG@20 improved for `patience`
// epochs. The returned model is the best-scoring snapshot.
TrainResult train_model(ModelState model, const DataSplit& split, const KnowledgeGraph& kg,
                        const TrainOptions& opt, std::ostream* progress = nullptr);

// CSV: one row per epoch, prefixed by a config-hash comment line.
void write_metric_log(const std::string& path, const std::vector<EpochRecord>& log,
                      std::uint64_t config_hash);

}  // namespace mcrec
