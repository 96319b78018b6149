#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "mcrec/propagation.hpp"

namespace mcrec {

// Hit rate contribution of one user: 1 if the positive landed in the
// top k, else 0. rank is 1-based.
double hr_at_k(int rank, int k);

// 1 / log2(rank + 1) if rank <= k, else 0. With a single relevant item
// the ideal DCG is 1, so this is already normalized.
double ndcg_at_k(int rank, int k);

// Rank of candidate 0 among all candidates by ascending distance; ties
// broken by ascending item id. Non-finite distances are a numerical
// error.
int rank_of_first(const std::vector<double>& dists, const std::vector<int>& ids);

struct EvalSummary {
  std::map<int, double> hr;    // k -> mean over users
  std::map<int, double> ndcg;
  int users = 0;
};

// Leave-one-out evaluation over every user with a test positive: one
// positive against `negatives` unobserved items, candidate sets fixed
// by (seed, user). Deterministic for a fixed seed regardless of the
// worker count.
EvalSummary evaluate_model(const ModelState& model, const DataSplit& split,
                           const KnowledgeGraph& kg, const NeighborTable& nt,
                           std::uint64_t seed, const std::vector<int>& ks, int workers,
                           int negatives = 100);

}  // namespace mcrec
