#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "mcrec/kgdata.hpp"
#include "mcrec/model.hpp"

// Receptive-field propagation over the knowledge graph, written once
// and instantiated either eagerly (evaluation) or on an autodiff tape
// (training). A context supplies parameter access; the eager context
// reads the state directly, the taped context creates cached leaves.

namespace mcrec {

struct EagerCtx {
  using S = double;
  using V = Eigen::VectorXd;

  const ModelState& model;

  explicit EagerCtx(const ModelState& m) : model(m) {}

  S kappa(int m) const { return model.sub[m].kappa; }
  V user_row(int m, int u) const { return model.sub[m].user_emb.row(u); }
  V entity_row(int m, int e) const { return model.sub[m].entity_emb.row(e); }
  V relation_row(int m, int r) const { return model.sub[m].relation_emb.row(r); }
  const RMatrix& layer_w(int m, int k) const { return model.sub[m].layer_w[k]; }
  V layer_b(int m, int k) const { return model.sub[m].layer_b[k]; }
  const RMatrix& fusion_proj(int m) const { return model.sub[m].fusion_proj; }
  const RMatrix& attention_w() const { return model.attention_w; }
  S constant(double c) const { return c; }
};

// Leaf handles are cached so one tape never holds two copies of the
// same parameter; the backward pass then accumulates naturally.
struct TapedCtx {
  using S = Var;
  using V = Var;

  const ModelState& model;
  Tape& tape;

  TapedCtx(const ModelState& m, Tape& t)
      : model(m),
        tape(t),
        kappa_(m.sub.size()),
        user_(m.sub.size()),
        entity_(m.sub.size()),
        relation_(m.sub.size()),
        layer_w_(m.sub.size()),
        layer_b_(m.sub.size()),
        proj_(m.sub.size()) {}

  S kappa(int m) {
    if (!kappa_[m]) {
      kappa_[m] = tape.leaf_scalar(model.sub[m].kappa,
                                   {static_cast<std::int16_t>(m), ParamBlock::Kappa, 0});
    }
    return *kappa_[m];
  }
  V user_row(int m, int u) {
    return row_leaf(user_[m], model.sub[m].user_emb, m, ParamBlock::UserEmb, u);
  }
  V entity_row(int m, int e) {
    return row_leaf(entity_[m], model.sub[m].entity_emb, m, ParamBlock::EntityEmb, e);
  }
  V relation_row(int m, int r) {
    return row_leaf(relation_[m], model.sub[m].relation_emb, m, ParamBlock::RelationEmb, r);
  }
  Var layer_w(int m, int k) {
    return mat_leaf(layer_w_[m], model.sub[m].layer_w, m, ParamBlock::LayerW, k);
  }
  V layer_b(int m, int k) {
    if (layer_b_[m].size() <= static_cast<std::size_t>(k)) {
      layer_b_[m].resize(model.sub[m].layer_b.size());
    }
    if (!layer_b_[m][k]) {
      layer_b_[m][k] = tape.leaf(model.sub[m].layer_b[k],
                                 {static_cast<std::int16_t>(m), ParamBlock::LayerB, k});
    }
    return *layer_b_[m][k];
  }
  Var fusion_proj(int m) {
    if (!proj_[m]) {
      const auto& p = model.sub[m].fusion_proj;
      proj_[m] = tape.leaf_matrix(p.data(), static_cast<int>(p.rows()),
                                  static_cast<int>(p.cols()),
                                  {static_cast<std::int16_t>(m), ParamBlock::FusionProj, 0});
    }
    return *proj_[m];
  }
  Var attention_w() {
    if (!attn_) {
      const auto& w = model.attention_w;
      attn_ = tape.leaf_matrix(w.data(), static_cast<int>(w.rows()), static_cast<int>(w.cols()),
                               {-1, ParamBlock::AttentionW, 0});
    }
    return *attn_;
  }
  S constant(double c) { return tape.constant_scalar(c); }

 private:
  Var row_leaf(std::unordered_map<int, Var>& cache, const RMatrix& table, int m,
               ParamBlock block, int r) {
    auto it = cache.find(r);
    if (it != cache.end()) return it->second;
    Var v = tape.leaf(table.row(r), {static_cast<std::int16_t>(m), block, r});
    cache.emplace(r, v);
    return v;
  }
  Var mat_leaf(std::vector<std::optional<Var>>& cache, const std::vector<RMatrix>& mats, int m,
               ParamBlock block, int k) {
    if (cache.size() <= static_cast<std::size_t>(k)) cache.resize(mats.size());
    if (!cache[k]) {
      const auto& w = mats[k];
      cache[k] = tape.leaf_matrix(w.data(), static_cast<int>(w.rows()),
                                  static_cast<int>(w.cols()),
                                  {static_cast<std::int16_t>(m), block, k});
    }
    return *cache[k];
  }

  std::vector<std::optional<Var>> kappa_;
  std::vector<std::unordered_map<int, Var>> user_, entity_, relation_;
  std::vector<std::vector<std::optional<Var>>> layer_w_, layer_b_;
  std::vector<std::optional<Var>> proj_;
  std::optional<Var> attn_;
};

// Multi-space representation of one node: per-subspace point plus the
// softmax weights assigned to each subspace.
template <class Ctx>
struct FusedPoint {
  std::vector<typename Ctx::V> emb;
  typename Ctx::V weights;
};

template <class Ctx>
class ModelForward {
 public:
  using S = typename Ctx::S;
  using V = typename Ctx::V;

  ModelForward(Ctx& ctx, const KnowledgeGraph& kg, const NeighborTable& nt)
      : ctx_(ctx),
        kg_(kg),
        nt_(nt),
        cfg_(ctx.model.cfg),
        lift0_(cfg_.manifolds),
        rel_lift_(cfg_.manifolds),
        rel_logit_(cfg_.manifolds),
        bias_lift_(cfg_.manifolds) {}

  // Resets user-dependent caches; entity and relation lifts persist.
  void begin_user(int u) {
    if (u < 0 || u >= ctx_.model.user_count) {
      throw ContractError("begin_user: user id out of range");
    }
    user_ = u;
    user_emb_.clear();
    for (auto& m : rel_logit_) m.clear();
    for (int m = 0; m < cfg_.manifolds; ++m) {
      S k = ctx_.kappa(m);
      V lifted = kops::exp_map_origin(ctx_.user_row(m, u), k, cfg_.taylor_eps);
      user_emb_.push_back(kops::project_to_domain(lifted, k));
    }
  }

  int current_user() const { return user_; }

  // Lifted user embedding; propagation keeps the user at layer 0.
  const V& user_embedding(int m) const { return user_emb_[m]; }

  // Propagated entity representation for the current user: K rounds of
  // attention-weighted neighborhood aggregation over the sampled
  // receptive field, then the layer-combine chain.
  V propagated_entity(int m, int v);

  FusedPoint<Ctx> user_point() { return fuse(user_emb_); }

  FusedPoint<Ctx> entity_point(int v) {
    std::vector<V> emb;
    emb.reserve(static_cast<std::size_t>(cfg_.manifolds));
    for (int m = 0; m < cfg_.manifolds; ++m) emb.push_back(propagated_entity(m, v));
    return fuse(emb);
  }

  // Sum over subspaces of (w_a + w_b) * d_m(a, b).
  S pair_distance(const FusedPoint<Ctx>& a, const FusedPoint<Ctx>& b) {
    std::vector<S> d;
    d.reserve(a.emb.size());
    for (int m = 0; m < static_cast<int>(a.emb.size()); ++m) {
      d.push_back(kops::dist(a.emb[m], b.emb[m], ctx_.kappa(m), cfg_.taylor_eps));
    }
    return dot(a.weights + b.weights, stack(d));
  }

  // Sum over subspaces of w_a * d_m(a, origin).
  S origin_distance(const FusedPoint<Ctx>& a) {
    std::vector<S> d;
    d.reserve(a.emb.size());
    for (int m = 0; m < static_cast<int>(a.emb.size()); ++m) {
      d.push_back(kops::dist_to_origin(a.emb[m], ctx_.kappa(m), cfg_.taylor_eps));
    }
    return dot(a.weights, stack(d));
  }

  // Cross-space update (skipped for single-space models) followed by
  // subspace attention. Public so the fusion step is testable on bare
  // per-subspace embeddings.
  FusedPoint<Ctx> fuse(std::vector<V> emb) {
    return fuse_point(emb, cfg_.manifolds >= 2);
  }
  FusedPoint<Ctx> fuse_point(std::vector<V> emb, bool update);

 private:
  V lift_entity(int m, int e) {
    auto it = lift0_[m].find(e);
    if (it != lift0_[m].end()) return it->second;
    S k = ctx_.kappa(m);
    V lifted = kops::project_to_domain(
        kops::exp_map_origin(ctx_.entity_row(m, e), k, cfg_.taylor_eps), k);
    lift0_[m].emplace(e, lifted);
    return lifted;
  }

  V lift_relation(int m, int r) {
    auto it = rel_lift_[m].find(r);
    if (it != rel_lift_[m].end()) return it->second;
    S k = ctx_.kappa(m);
    V lifted = kops::project_to_domain(
        kops::exp_map_origin(ctx_.relation_row(m, r), k, cfg_.taylor_eps), k);
    rel_lift_[m].emplace(r, lifted);
    return lifted;
  }

  // Relational attention score of the current user for relation r:
  // the curvature inner product of e_u and e_r.
  S relation_logit(int m, int r) {
    auto it = rel_logit_[m].find(r);
    if (it != rel_logit_[m].end()) return it->second;
    S s = kops::kappa_dot(user_emb_[m], lift_relation(m, r), ctx_.kappa(m), cfg_.taylor_eps);
    rel_logit_[m].emplace(r, s);
    return s;
  }

  V lift_bias(int m, int k) {
    if (bias_lift_[m].size() <= static_cast<std::size_t>(k)) {
      bias_lift_[m].resize(static_cast<std::size_t>(cfg_.depth));
    }
    if (!bias_lift_[m][k]) {
      S kap = ctx_.kappa(m);
      bias_lift_[m][k] = kops::project_to_domain(
          kops::exp_map_origin(ctx_.layer_b(m, k), kap, cfg_.taylor_eps), kap);
    }
    return *bias_lift_[m][k];
  }

  // Softmax-weighted tangent-space mean of the sampled neighborhood.
  V neighbor_mix(int m, int w, const std::unordered_map<int, V>& prev,
                 std::unordered_map<int, V>& tangent_cache);

  V aggregate_layer(int m, int k, const V& self, const V& nbr);

  Ctx& ctx_;
  const KnowledgeGraph& kg_;
  const NeighborTable& nt_;
  const ModelConfig& cfg_;
  int user_ = -1;
  std::vector<V> user_emb_;
  std::vector<std::unordered_map<int, V>> lift0_;
  std::vector<std::unordered_map<int, V>> rel_lift_;
  std::vector<std::unordered_map<int, S>> rel_logit_;
  std::vector<std::vector<std::optional<V>>> bias_lift_;
};

template <class Ctx>
typename Ctx::V ModelForward<Ctx>::neighbor_mix(int m, int w,
                                                const std::unordered_map<int, V>& prev,
                                                std::unordered_map<int, V>& tangent_cache) {
  const S k = ctx_.kappa(m);
  const std::int32_t* rels = nt_.rel_row(w);
  const std::int32_t* ents = nt_.ent_row(w);
  std::vector<S> logits;
  logits.reserve(static_cast<std::size_t>(nt_.size));
  for (int i = 0; i < nt_.size; ++i) logits.push_back(relation_logit(m, rels[i]));
  V weights = softmax(stack(logits));

  std::optional<V> acc;
  for (int i = 0; i < nt_.size; ++i) {
    auto it = tangent_cache.find(ents[i]);
    if (it == tangent_cache.end()) {
      it = tangent_cache
               .emplace(ents[i], kops::log_map_origin(prev.at(ents[i]), k, cfg_.taylor_eps))
               .first;
    }
    V term = scale(component(weights, i), it->second);
    acc = acc ? V(*acc + term) : term;
  }
  return kops::project_to_domain(kops::exp_map_origin(*acc, k, cfg_.taylor_eps), k);
}

template <class Ctx>
typename Ctx::V ModelForward<Ctx>::aggregate_layer(int m, int k, const V& self, const V& nbr) {
  const S kap = ctx_.kappa(m);
  const double eps = cfg_.taylor_eps;
  V z = [&] {
    switch (cfg_.aggregator) {
      case AggregatorKind::Gcn: return kops::mobius_add(self, nbr, kap);
      case AggregatorKind::GraphSage: return kops::kappa_concat(self, nbr, kap, eps);
      case AggregatorKind::Neighbor: return nbr;
    }
    throw ContractError("aggregate_layer: unknown aggregator");
  }();
  V lin = kops::mobius_matvec(ctx_.layer_w(m, k), z, kap, eps);
  V shifted = kops::mobius_add(lin, lift_bias(m, k), kap);
  // Nonlinearity acts in the origin tangent space.
  V act = leaky_relu(kops::log_map_origin(shifted, kap, eps), cfg_.leaky_slope);
  return kops::project_to_domain(kops::exp_map_origin(act, kap, eps), kap);
}

template <class Ctx>
typename Ctx::V ModelForward<Ctx>::propagated_entity(int m, int v) {
  if (user_ < 0) throw ContractError("propagated_entity before begin_user");
  if (v < 0 || v >= kg_.entity_count) {
    throw ContractError("propagated_entity: entity id out of range");
  }
  const S kap = ctx_.kappa(m);
  const int depth = cfg_.depth;

  // Hop h holds the entities whose layer-(depth - h) representation is
  // still needed. Built breadth-first from the sampled table.
  std::vector<std::vector<int>> hops(static_cast<std::size_t>(depth) + 1);
  hops[0] = {v};
  for (int h = 1; h <= depth; ++h) {
    auto& level = hops[h];
    for (int w : hops[h - 1]) {
      const std::int32_t* ents = nt_.ent_row(w);
      for (int i = 0; i < nt_.size; ++i) level.push_back(ents[i]);
    }
    std::sort(level.begin(), level.end());
    level.erase(std::unique(level.begin(), level.end()), level.end());
  }

  std::unordered_map<int, V> prev;
  for (const auto& level : hops) {
    for (int w : level) {
      if (!prev.count(w)) prev.emplace(w, lift_entity(m, w));
    }
  }

  V combined = prev.at(v);  // layer-0 term of the combine chain
  for (int k = 0; k < depth; ++k) {
    std::unordered_map<int, V> next;
    std::unordered_map<int, V> tangents;
    for (int h = 0; h <= depth - 1 - k; ++h) {
      for (int w : hops[h]) {
        if (next.count(w)) continue;
        V nbr = neighbor_mix(m, w, prev, tangents);
        next.emplace(w, aggregate_layer(m, k, prev.at(w), nbr));
      }
    }
    combined = kops::mobius_add(combined, next.at(v), kap);
    prev = std::move(next);
  }
  return combined;
}

template <class Ctx>
FusedPoint<Ctx> ModelForward<Ctx>::fuse_point(std::vector<V> emb, bool update) {
  const int M = static_cast<int>(emb.size());
  const double eps = cfg_.taylor_eps;
  std::vector<V> tang;
  tang.reserve(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    tang.push_back(kops::log_map_origin(emb[m], ctx_.kappa(m), eps));
  }
  if (update) {
    // Cross-space mean in the shared tangent space, concatenated with
    // each subspace view and projected back to d dimensions.
    V sum = tang[0];
    for (int m = 1; m < M; ++m) sum = sum + tang[m];
    V mean = scale(ctx_.constant(1.0 / M), sum);
    for (int m = 0; m < M; ++m) {
      S k = ctx_.kappa(m);
      V proj = matvec(ctx_.fusion_proj(m), concat(tang[m], mean));
      emb[m] = kops::project_to_domain(kops::exp_map_origin(proj, k, eps), k);
      tang[m] = kops::log_map_origin(emb[m], k, eps);
    }
  }
  V cat = tang[0];
  for (int m = 1; m < M; ++m) cat = concat(cat, tang[m]);
  FusedPoint<Ctx> out;
  out.emb = std::move(emb);
  out.weights = softmax(matvec(ctx_.attention_w(), cat));
  return out;
}

}  // namespace mcrec
