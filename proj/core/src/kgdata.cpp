#include "mcrec/kgdata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "mcrec/rng.hpp"

namespace mcrec {

namespace {

std::vector<std::string> split_fields(const std::string& line, const std::string& sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end && !s.empty();
}

std::string resolve_separator(const std::string& path, const std::string& configured) {
  if (configured == "tab") return "\t";
  if (!configured.empty()) return configured;
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".dat") == 0) return "::";
  return "\t";
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool sorted_contains(const std::vector<int>& v, int x) {
  return std::binary_search(v.begin(), v.end(), x);
}

}  // namespace

Interactions load_interactions(const std::string& path, const InteractionFormat& fmt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open interactions file: " + path);
  const std::string sep = resolve_separator(path, fmt.separator);

  std::unordered_map<std::string, int> user_ids, item_ids;
  std::vector<std::string> user_tokens, item_tokens;
  // raw positives per user id, in file order, may repeat
  std::vector<std::vector<int>> raw;

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line, sep);
    if (fields.size() < 2 || fields.size() > 4) {
      if (line_no == 1) continue;  // tolerate a header
      throw ParseError(path, line_no, "expected 2 to 4 fields, got " +
                                          std::to_string(fields.size()));
    }
    double rating = 1.0;
    if (fields.size() >= 3 && !parse_double(fields[2], rating)) {
      if (line_no == 1) continue;  // header line such as "user item rating"
      throw ParseError(path, line_no, "rating is not numeric: '" + fields[2] + "'");
    }
    if (rating < fmt.rating_threshold) continue;

    auto [uit, unew] = user_ids.try_emplace(fields[0], static_cast<int>(user_tokens.size()));
    if (unew) {
      user_tokens.push_back(fields[0]);
      raw.emplace_back();
    }
    auto [iit, inew] = item_ids.try_emplace(fields[1], static_cast<int>(item_tokens.size()));
    if (inew) item_tokens.push_back(fields[1]);
    raw[uit->second].push_back(iit->second);
  }

  // Every surviving row is a positive, so no user or item needs
  // dropping; dedupe and sort.
  Interactions out;
  out.user_count = static_cast<int>(user_tokens.size());
  out.item_count = static_cast<int>(item_tokens.size());
  out.user_tokens = std::move(user_tokens);
  out.item_tokens = std::move(item_tokens);
  out.positives.resize(out.user_count);
  for (int u = 0; u < out.user_count; ++u) {
    auto& v = raw[u];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    out.pair_count += static_cast<long>(v.size());
    out.positives[u] = std::move(v);
  }
  return out;
}

KnowledgeGraph load_kg(const std::string& path, const std::vector<std::string>& item_tokens) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open knowledge graph file: " + path);

  KnowledgeGraph kg;
  std::unordered_map<std::string, int> entity_ids, relation_ids;
  kg.entity_tokens = item_tokens;
  for (int i = 0; i < static_cast<int>(item_tokens.size()); ++i) {
    entity_ids.emplace(item_tokens[i], i);
  }

  auto entity_id = [&](const std::string& tok) {
    auto [it, fresh] = entity_ids.try_emplace(tok, static_cast<int>(kg.entity_tokens.size()));
    if (fresh) kg.entity_tokens.push_back(tok);
    return it->second;
  };
  std::vector<std::string> base_relations;
  auto relation_id = [&](const std::string& tok) {
    auto [it, fresh] = relation_ids.try_emplace(tok, static_cast<int>(base_relations.size()));
    if (fresh) base_relations.push_back(tok);
    return it->second;
  };

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line, "\t");
    if (fields.size() != 3) {
      throw ParseError(path, line_no,
                       "expected head\\trelation\\ttail, got " + std::to_string(fields.size()) +
                           " fields");
    }
    kg.triples.push_back({entity_id(fields[0]), relation_id(fields[1]), entity_id(fields[2])});
  }

  kg.entity_count = static_cast<int>(kg.entity_tokens.size());
  kg.base_relation_count = static_cast<int>(base_relations.size());
  kg.relation_tokens = std::move(base_relations);
  for (int r = 0; r < kg.base_relation_count; ++r) {
    kg.relation_tokens.push_back(kg.relation_tokens[r] + "^-1");
  }
  kg.relation_tokens.push_back("<self>");

  kg.adj.resize(kg.entity_count);
  for (const auto& [h, r, t] : kg.triples) {
    kg.adj[h].emplace_back(r, t);
    kg.adj[t].emplace_back(r + kg.base_relation_count, h);
  }
  return kg;
}

DataSplit split_interactions(const Interactions& data, double train_ratio, std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw ContractError("split_interactions: train_ratio must lie in (0, 1)");
  }
  DataSplit out;
  out.user_count = data.user_count;
  out.item_count = data.item_count;
  out.train.resize(data.user_count);
  out.test.resize(data.user_count);
  auto rng = make_rng(mix64(seed, "split"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int u = 0; u < data.user_count; ++u) {
    for (int v : data.positives[u]) {
      (unit(rng) < train_ratio ? out.train[u] : out.test[u]).push_back(v);
    }
    if (out.train[u].empty()) out.train_empty_users.push_back(u);
  }
  return out;
}

std::vector<std::pair<int, int>> sample_neighbors(const KnowledgeGraph& kg, int entity,
                                                  int size, std::uint64_t seed) {
  if (entity < 0 || entity >= kg.entity_count) {
    throw ContractError("sample_neighbors: entity id out of range");
  }
  if (size <= 0) throw ContractError("sample_neighbors: size must be positive");

  const auto& edges = kg.adj[entity];
  const int degree = static_cast<int>(edges.size());
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(size));
  auto rng = make_rng(mix64(seed, static_cast<std::uint64_t>(entity)));

  if (degree == 0) {
    out.assign(static_cast<std::size_t>(size), {kg.self_loop_relation(), entity});
    return out;
  }
  if (degree >= size) {
    // Partial Fisher-Yates: `size` distinct edges.
    std::vector<int> idx(edges.size());
    for (int i = 0; i < degree; ++i) idx[i] = i;
    for (int i = 0; i < size; ++i) {
      std::uniform_int_distribution<int> pick(i, degree - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(edges[idx[i]]);
    }
    return out;
  }
  // Cover every edge once, fill the remainder with replacement, then
  // shuffle so position carries no information.
  for (const auto& e : edges) out.push_back(e);
  std::uniform_int_distribution<int> pick(0, degree - 1);
  for (int i = degree; i < size; ++i) out.push_back(edges[pick(rng)]);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

NeighborTable build_neighbor_table(const KnowledgeGraph& kg, int size, std::uint64_t seed) {
  NeighborTable table;
  table.size = size;
  table.rel.resize(static_cast<std::size_t>(kg.entity_count) * size);
  table.ent.resize(static_cast<std::size_t>(kg.entity_count) * size);
  for (int e = 0; e < kg.entity_count; ++e) {
    auto row = sample_neighbors(kg, e, size, seed);
    for (int i = 0; i < size; ++i) {
      table.rel[static_cast<std::size_t>(e) * size + i] = row[i].first;
      table.ent[static_cast<std::size_t>(e) * size + i] = row[i].second;
    }
  }
  return table;
}

std::optional<int> sample_negative(const DataSplit& split, int user, std::mt19937_64& rng) {
  const auto& pos = split.train[user];
  const int n_items = split.item_count;
  if (static_cast<int>(pos.size()) >= n_items) return std::nullopt;
  std::uniform_int_distribution<int> pick(0, n_items - 1);
  // Rejection terminates fast while positives are sparse; fall back to
  // a deterministic scan for pathological users.
  for (int attempt = 0; attempt < 64; ++attempt) {
    int cand = pick(rng);
    if (!sorted_contains(pos, cand)) return cand;
  }
  std::vector<int> eligible;
  eligible.reserve(static_cast<std::size_t>(n_items - pos.size()));
  for (int v = 0; v < n_items; ++v) {
    if (!sorted_contains(pos, v)) eligible.push_back(v);
  }
  std::uniform_int_distribution<std::size_t> pick2(0, eligible.size() - 1);
  return eligible[pick2(rng)];
}

std::optional<TrainTriple> sample_train_triple(const DataSplit& split, std::uint64_t seed) {
  std::vector<int> users;
  for (int u = 0; u < split.user_count; ++u) {
    if (!split.train[u].empty()) users.push_back(u);
  }
  if (users.empty()) return std::nullopt;
  auto rng = make_rng(mix64(seed, "triple"));
  std::uniform_int_distribution<std::size_t> pick_u(0, users.size() - 1);
  const int u = users[pick_u(rng)];
  const auto& pos = split.train[u];
  std::uniform_int_distribution<std::size_t> pick_i(0, pos.size() - 1);
  const int i = pos[pick_i(rng)];
  auto j = sample_negative(split, u, rng);
  if (!j) return std::nullopt;
  return TrainTriple{u, i, *j};
}

TestCandidates sample_test_candidates(const DataSplit& split, int user, std::uint64_t seed,
                                      int negatives) {
  if (user < 0 || user >= split.user_count) {
    throw ContractError("sample_test_candidates: user id out of range");
  }
  const auto& test_pos = split.test[user];
  if (test_pos.empty()) {
    throw ContractError("sample_test_candidates: user has no test positives");
  }
  TestCandidates out;
  out.user = user;
  auto rng = make_rng(mix64(seed, "eval", static_cast<std::uint64_t>(user)));

  std::uniform_int_distribution<std::size_t> pick_pos(0, test_pos.size() - 1);
  out.items.push_back(test_pos[pick_pos(rng)]);

  const auto& train_pos = split.train[user];
  auto observed = [&](int v) {
    return sorted_contains(train_pos, v) || sorted_contains(test_pos, v);
  };
  const long eligible =
      static_cast<long>(split.item_count) - static_cast<long>(train_pos.size()) -
      static_cast<long>(test_pos.size());
  std::uniform_int_distribution<int> pick(0, split.item_count - 1);
  if (eligible >= negatives) {
    std::unordered_set<int> taken;
    while (static_cast<int>(taken.size()) < negatives) {
      int cand = pick(rng);
      if (observed(cand) || taken.count(cand)) continue;
      taken.insert(cand);
      out.items.push_back(cand);
    }
  } else {
    out.with_replacement = true;
    std::vector<int> pool;
    for (int v = 0; v < split.item_count; ++v) {
      if (!observed(v)) pool.push_back(v);
    }
    if (pool.empty()) {
      throw ContractError("sample_test_candidates: no negative items exist");
    }
    std::uniform_int_distribution<std::size_t> pickp(0, pool.size() - 1);
    for (int i = 0; i < negatives; ++i) out.items.push_back(pool[pickp(rng)]);
  }
  return out;
}

}  // namespace mcrec
