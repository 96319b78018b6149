#include "mcrec/eval.hpp"

#include <cmath>
#include <exception>

#include "mcrec/parallel.hpp"

namespace mcrec {

double hr_at_k(int rank, int k) {
  if (k <= 0) throw ContractError("hr_at_k: k must be positive");
  if (rank < 1) throw ContractError("hr_at_k: rank is 1-based");
  return rank <= k ? 1.0 : 0.0;
}

double ndcg_at_k(int rank, int k) {
  if (k <= 0) throw ContractError("ndcg_at_k: k must be positive");
  if (rank < 1) throw ContractError("ndcg_at_k: rank is 1-based");
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

int rank_of_first(const std::vector<double>& dists, const std::vector<int>& ids) {
  if (dists.empty() || dists.size() != ids.size()) {
    throw ContractError("rank_of_first: dists and ids must be non-empty and equal-sized");
  }
  const double d0 = dists[0];
  const int id0 = ids[0];
  int ahead = 0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (!std::isfinite(dists[i])) {
      throw NumericalError("rank_of_first: non-finite candidate distance");
    }
    if (i == 0) continue;
    if (dists[i] < d0 || (dists[i] == d0 && ids[i] < id0)) ++ahead;
  }
  return 1 + ahead;
}

EvalSummary evaluate_model(const ModelState& model, const DataSplit& split,
                           const KnowledgeGraph& kg, const NeighborTable& nt,
                           std::uint64_t seed, const std::vector<int>& ks, int workers,
                           int negatives) {
  std::vector<int> users;
  for (int u = 0; u < split.user_count; ++u) {
    if (!split.test[u].empty()) users.push_back(u);
  }
  if (users.empty()) throw ContractError("evaluate_model: no users with test positives");
  if (split.user_count > model.user_count || split.item_count > model.entity_count) {
    throw ContractError("evaluate_model: model tables smaller than the dataset");
  }

  const int n = static_cast<int>(users.size());
  std::vector<std::vector<double>> hr_vals(ks.size(), std::vector<double>(n)),
      ndcg_vals(ks.size(), std::vector<double>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(1, workers)));

  parallel_chunks(n, std::max(1, workers), [&](int w, int begin, int end) {
    try {
      EagerCtx ctx(model);
      ModelForward<EagerCtx> fwd(ctx, kg, nt);
      std::vector<double> dists;
      for (int slot = begin; slot < end; ++slot) {
        const int u = users[slot];
        TestCandidates cand = sample_test_candidates(split, u, seed, negatives);
        fwd.begin_user(u);
        auto up = fwd.user_point();
        dists.clear();
        dists.reserve(cand.items.size());
        for (int item : cand.items) {
          auto p = fwd.entity_point(item);
          dists.push_back(fwd.pair_distance(up, p));
        }
        const int rank = rank_of_first(dists, cand.items);
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
          hr_vals[ki][slot] = hr_at_k(rank, ks[ki]);
          ndcg_vals[ki][slot] = ndcg_at_k(rank, ks[ki]);
        }
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalSummary out;
  out.users = n;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    double hsum = 0.0, nsum = 0.0;
    for (int slot = 0; slot < n; ++slot) {
      hsum += hr_vals[ki][slot];
      nsum += ndcg_vals[ki][slot];
    }
    out.hr[ks[ki]] = hsum / n;
    out.ndcg[ks[ki]] = nsum / n;
  }
  return out;
}

}  // namespace mcrec
