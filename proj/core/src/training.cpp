#include "mcrec/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <ostream>

#include "mcrec/eval.hpp"
#include "mcrec/parallel.hpp"
#include "mcrec/rng.hpp"

namespace mcrec {

double margin_value(MarginKind kind, double c, double d_ui, double d_uo, double d_io) {
  for (double d : {d_ui, d_uo, d_io}) {
    if (!std::isfinite(d) || d < 0.0) {
      throw ContractError("margin_value: distances must be finite and non-negative");
    }
  }
  if (!(c >= 0.0)) throw ContractError("margin_value: offset c must be >= 0");
  return margin_term(kind, c, d_ui, d_uo, d_io);
}

double ranking_loss_value(double d_ui, double d_uj, double margin) {
  if (!std::isfinite(d_ui) || !std::isfinite(d_uj) || !std::isfinite(margin)) {
    throw ContractError("ranking_loss_value: non-finite input");
  }
  return hinge(d_ui * d_ui - d_uj * d_uj + margin);
}

double sgd_step(ModelState& model, std::span<const TrainTriple> batch,
                const KnowledgeGraph& kg, const NeighborTable& nt, const TrainOptions& opt) {
  const int n = static_cast<int>(batch.size());
  if (n == 0) return 0.0;
  const int workers = std::max(1, opt.workers);

  std::vector<GradientSet> grads;
  grads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) grads.push_back(GradientSet::zeros_like(model));
  std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));

  parallel_chunks(n, workers, [&](int w, int begin, int end) {
    try {
      Tape tape;
      for (int s = begin; s < end; ++s) {
        tape.clear();
        TapedCtx ctx(model, tape);
        ModelForward<TapedCtx> fwd(ctx, kg, nt);
        Var loss = sample_loss(fwd, batch[s], model.cfg.margin, model.cfg.margin_c);
        losses[s] = tape.scalar(loss);
        // An inactive hinge contributes exactly zero gradient.
        if (losses[s] > 0.0) {
          tape.backward(loss);
          tape.for_each_leaf_adjoint(
              [&](const LeafRef& ref, Eigen::Map<const Eigen::VectorXd> adj) {
                grads[w].accumulate(ref, adj);
              });
        }
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  GradientSet& total = grads[0];
  for (int w = 1; w < workers; ++w) total.add(grads[w]);
  if (!total.all_finite()) throw NumericalError("sgd_step: non-finite gradient");

  // Mean gradient over the batch, folded into the learning rates.
  apply_sgd(model, total, opt.lr / n, opt.lr_kappa / n);
  return std::accumulate(losses.begin(), losses.end(), 0.0) / n;
}

TrainResult train_model(ModelState model, const DataSplit& split, const KnowledgeGraph& kg,
                        const TrainOptions& opt, std::ostream* progress) {
  model.cfg.validate();
  if (opt.batch < 1) throw ContractError("train_model: batch must be positive");
  if (opt.max_epochs < 1) throw ContractError("train_model: max_epochs must be positive");
  if (opt.patience < 1) throw ContractError("train_model: patience must be positive");

  std::vector<std::pair<int, int>> pairs;
  for (int u = 0; u < split.user_count; ++u) {
    for (int v : split.train[u]) pairs.emplace_back(u, v);
  }
  if (pairs.empty()) throw ContractError("train_model: no training interactions");

  // Evaluation uses one fixed receptive field and fixed candidate
  // sets so metric movement reflects the parameters only.
  const NeighborTable eval_nt =
      build_neighbor_table(kg, model.cfg.sample_size, mix64(opt.seed, "eval-neigh"));
  const std::vector<int> ks = {10, 20};
  const std::uint64_t neg_stream = mix64(opt.seed, "neg");

  TrainResult res;
  res.best = model;
  double best_hr = -1.0, best_ndcg = -1.0;
  int stale = 0;

  std::vector<int> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TrainTriple> triples;
  triples.reserve(pairs.size());

  for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    const NeighborTable nt = build_neighbor_table(
        kg, model.cfg.sample_size, mix64(opt.seed, "neigh", static_cast<std::uint64_t>(epoch)));
    auto order_rng = make_rng(mix64(opt.seed, "order", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), order_rng);

    triples.clear();
    for (std::size_t idx = 0; idx < order.size(); ++idx) {
      const auto& [u, i] = pairs[static_cast<std::size_t>(order[idx])];
      auto neg_rng = make_rng(mix64(neg_stream, static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(idx)));
      auto j = sample_negative(split, u, neg_rng);
      if (j) triples.push_back({u, i, *j});
    }

    double loss_sum = 0.0;
    long loss_n = 0;
    for (std::size_t b = 0; b < triples.size(); b += static_cast<std::size_t>(opt.batch)) {
      const std::size_t e = std::min(triples.size(), b + static_cast<std::size_t>(opt.batch));
      const double mean = sgd_step(
          model, std::span<const TrainTriple>(triples.data() + b, e - b), kg, nt, opt);
      loss_sum += mean * static_cast<double>(e - b);
      loss_n += static_cast<long>(e - b);
    }

    EvalSummary ev = evaluate_model(model, split, kg, eval_nt, opt.seed, ks, opt.workers,
                                    opt.eval_negatives);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_n > 0 ? loss_sum / static_cast<double>(loss_n) : 0.0;
    rec.hr10 = ev.hr.at(10);
    rec.hr20 = ev.hr.at(20);
    rec.ndcg10 = ev.ndcg.at(10);
    rec.ndcg20 = ev.ndcg.at(20);
    for (const auto& s : model.sub) rec.kappas.push_back(s.kappa);
    res.log.push_back(rec);

    if (progress) {
      (*progress) << "epoch " << epoch << " loss " << rec.loss << " hr@10 " << rec.hr10
                  << " hr@20 " << rec.hr20 << " ndcg@20 " << rec.ndcg20 << " kappa";
      for (double k : rec.kappas) (*progress) << ' ' << k;
      (*progress) << '\n';
      progress->flush();
    }

    const bool improved = rec.hr20 > best_hr + 1e-12 || rec.ndcg20 > best_ndcg + 1e-12;
    if (improved) {
      best_hr = std::max(best_hr, rec.hr20);
      best_ndcg = std::max(best_ndcg, rec.ndcg20);
      res.best = model;
      res.best_epoch = epoch;
      res.best_hr20 = rec.hr20;
      res.best_ndcg20 = rec.ndcg20;
      stale = 0;
    } else if (++stale >= opt.patience) {
      break;
    }
  }
  return res;
}

void write_metric_log(const std::string& path, const std::vector<EpochRecord>& log,
                      std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open metric log for writing: " + path);
  char hash_line[64];
  std::snprintf(hash_line, sizeof(hash_line), "# config_hash=%016llx",
                static_cast<unsigned long long>(config_hash));
  out << hash_line << '\n';
  out << "epoch,loss,hr@10,hr@20,ndcg@10,ndcg@20";
  const std::size_t m = log.empty() ? 0 : log.front().kappas.size();
  for (std::size_t i = 1; i <= m; ++i) out << ",kappa_" << i;
  out << '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : log) {
    out << r.epoch << ',' << num(r.loss) << ',' << num(r.hr10) << ',' << num(r.hr20) << ','
        << num(r.ndcg10) << ',' << num(r.ndcg20);
    for (double k : r.kappas) out << ',' << num(k);
    out << '\n';
  }
  if (!out) throw IoError("failed writing metric log: " + path);
}

}  // namespace mcrec
