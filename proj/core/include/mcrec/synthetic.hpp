#pragma once

#include <cstdint>
#include <string>

namespace mcrec {

// Clustered synthetic dataset: users prefer items of their own
// cluster, and the knowledge graph links every item to its cluster's
// hub entity (plus round-robin noise edges), so cluster structure is
// recoverable both from interactions and from the graph.
struct SyntheticSpec {
  int users = 200;
  int items = 300;
  int clusters = 10;
  // Non-item entities: one hub per cluster, the rest are noise
  // targets. Total entities = items + attribute_entities.
  int attribute_entities = 200;
  int positives_per_user = 30;
  double in_cluster_prob = 0.85;
  int noise_edges_per_item = 2;
  std::uint64_t seed = 7;
};

struct SyntheticPaths {
  std::string interactions;
  std::string kg;
};

// Writes interactions.tsv and kg.tsv under dir (created if needed).
// Deterministic: identical spec -> byte-identical files.
SyntheticPaths write_synthetic_dataset(const std::string& dir, const SyntheticSpec& spec);

}  // namespace mcrec
