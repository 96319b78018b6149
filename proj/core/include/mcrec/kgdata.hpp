#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mcrec/errors.hpp"

namespace mcrec {

// User-item interactions after thresholding and densification. Ids are
// dense: users in [0, user_count), items in [0, item_count), both in
// first-appearance order over kept rows. Users with no positive are
// dropped.
struct Interactions {
  int user_count = 0;
  int item_count = 0;
  std::vector<std::vector<int>> positives;  // per user, sorted, unique
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;
  long pair_count = 0;
};

struct InteractionFormat {
  // Empty separator = deduce from the file name: "::" for .dat files
  // (MovieLens style), tab otherwise. The token "tab" means "\t".
  std::string separator;
  // A row is positive iff its rating >= threshold. Rows without a
  // rating field count as rating 1.
  double rating_threshold = 0.0;
};

// Columns: user, item, [rating, [timestamp]]. A first line whose
// rating field is not numeric is treated as a header and skipped;
// malformed lines elsewhere raise ParseError with the line number.
Interactions load_interactions(const std::string& path, const InteractionFormat& fmt = {});

// Knowledge graph over entities. Ids [0, item_count) are reserved for
// interaction items (an item token equals its entity token); remaining
// entities follow in first-appearance order. For every stored triple
// (h, r, t) the adjacency also holds the inverse edge (t, r + base, h).
// Relation id 2 * base is a reserved self-loop used for isolated
// entities.
struct KnowledgeGraph {
  int entity_count = 0;
  int base_relation_count = 0;
  std::vector<std::array<int, 3>> triples;  // original direction only
  std::vector<std::vector<std::pair<int, int>>> adj;  // entity -> (relation, neighbor)
  std::vector<std::string> entity_tokens;
  std::vector<std::string> relation_tokens;  // base, then inverses, then self-loop

  int relation_count() const { return 2 * base_relation_count + 1; }
  int self_loop_relation() const { return 2 * base_relation_count; }
};

// Tab-separated head, relation, tail triples; all three are string
// tokens remapped to dense ids.
KnowledgeGraph load_kg(const std::string& path, const std::vector<std::string>& item_tokens);

// Per-user Bernoulli(train_ratio) assignment of each positive pair.
struct DataSplit {
  int user_count = 0;
  int item_count = 0;
  std::vector<std::vector<int>> train;  // per user, sorted
  std::vector<std::vector<int>> test;
  std::vector<int> train_empty_users;  // kept, but flagged
};

DataSplit split_interactions(const Interactions& data, double train_ratio, std::uint64_t seed);

// Fixed-size receptive field: `size` (relation, neighbor) pairs per
// entity. Degree >= size draws distinct neighbors; smaller degrees
// cover every neighbor at least once and fill the rest with
// replacement; isolated entities get self-loops.
std::vector<std::pair<int, int>> sample_neighbors(const KnowledgeGraph& kg, int entity,
                                                  int size, std::uint64_t seed);

struct NeighborTable {
  int size = 0;
  std::vector<std::int32_t> rel;  // entity-major, entity_count * size
  std::vector<std::int32_t> ent;

  const std::int32_t* rel_row(int e) const { return rel.data() + static_cast<std::size_t>(e) * size; }
  const std::int32_t* ent_row(int e) const { return ent.data() + static_cast<std::size_t>(e) * size; }
};

NeighborTable build_neighbor_table(const KnowledgeGraph& kg, int size, std::uint64_t seed);

struct TrainTriple {
  int user;
  int pos;
  int neg;
};

// Negative item for (user, pos): uniform over items without a train
// positive for this user. Returns nullopt when no such item exists.
std::optional<int> sample_negative(const DataSplit& split, int user, std::mt19937_64& rng);

// Draws a uniform train pair and a matching negative.
std::optional<TrainTriple> sample_train_triple(const DataSplit& split, std::uint64_t seed);

// Leave-one-out candidates: items[0] is a test positive of the user,
// followed by `negatives` items with no observed interaction (train or
// test). Falls back to replacement when fewer distinct items exist.
struct TestCandidates {
  int user = -1;
  std::vector<int> items;
  bool with_replacement = false;
};

TestCandidates sample_test_candidates(const DataSplit& split, int user, std::uint64_t seed,
                                      int negatives = 100);

}  // namespace mcrec
