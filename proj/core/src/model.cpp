#include "mcrec/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mcrec/rng.hpp"

namespace mcrec {

const char* to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::Gcn: return "gcn";
    case AggregatorKind::GraphSage: return "graphsage";
    case AggregatorKind::Neighbor: return "neighbor";
  }
  return "?";
}

const char* to_string(MarginKind k) {
  switch (k) {
    case MarginKind::Constant: return "constant";
    case MarginKind::GeometryAware: return "geometry";
    case MarginKind::Hicf: return "hicf";
  }
  return "?";
}

AggregatorKind parse_aggregator(const std::string& s) {
  if (s == "gcn") return AggregatorKind::Gcn;
  if (s == "graphsage") return AggregatorKind::GraphSage;
  if (s == "neighbor") return AggregatorKind::Neighbor;
  throw ParseError("unknown aggregator '" + s + "' (gcn|graphsage|neighbor)");
}

MarginKind parse_margin(const std::string& s) {
  if (s == "constant") return MarginKind::Constant;
  if (s == "geometry") return MarginKind::GeometryAware;
  if (s == "hicf") return MarginKind::Hicf;
  throw ParseError("unknown margin rule '" + s + "' (constant|geometry|hicf)");
}

void ModelConfig::validate() const {
  if (dim < 2 || dim > 512) throw ContractError("dim must lie in [2, 512]");
  if (manifolds < 1 || manifolds > 8) throw ContractError("manifolds must lie in [1, 8]");
  if (depth < 1 || depth > 3) throw ContractError("depth must lie in [1, 3]");
  if (sample_size < 1 || sample_size > 64) throw ContractError("sample_size must lie in [1, 64]");
  if (!(margin_c >= 0.0)) throw ContractError("margin_c must be >= 0");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
    throw ContractError("leaky_slope must lie in (0, 1)");
  }
  if (!(taylor_eps > 0.0)) throw ContractError("taylor_eps must be positive");
  if (!(init_std > 0.0)) throw ContractError("init_std must be positive");
  if (!kappa_init.empty() && static_cast<int>(kappa_init.size()) != manifolds) {
    throw ContractError("kappa_init must list one value per subspace");
  }
}

std::vector<double> ModelConfig::initial_kappas() const {
  if (!kappa_init.empty()) return kappa_init;
  std::vector<double> out(static_cast<std::size_t>(manifolds));
  if (manifolds == 1) {
    out[0] = -1.0;
    return out;
  }
  for (int m = 0; m < manifolds; ++m) {
    out[m] = -1.0 + 2.0 * m / (manifolds - 1);
  }
  return out;
}

namespace {

RMatrix normal_matrix(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  RMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

RMatrix xavier_matrix(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  RMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

}  // namespace

ModelState ModelState::init(const ModelConfig& cfg, int users, int entities, int relations,
                            std::uint64_t seed) {
  cfg.validate();
  if (users < 1 || entities < 1 || relations < 1) {
    throw ContractError("ModelState::init: counts must be positive");
  }
  ModelState model;
  model.cfg = cfg;
  model.user_count = users;
  model.entity_count = entities;
  model.relation_count = relations;

  const auto kappas = cfg.initial_kappas();
  for (int m = 0; m < cfg.manifolds; ++m) {
    auto rng = make_rng(mix64(seed, "subspace", static_cast<std::uint64_t>(m)));
    SubspaceParams p;
    p.user_emb = normal_matrix(users, cfg.dim, cfg.init_std, rng);
    p.entity_emb = normal_matrix(entities, cfg.dim, cfg.init_std, rng);
    p.relation_emb = normal_matrix(relations, cfg.dim, cfg.init_std, rng);
    for (int k = 0; k < cfg.depth; ++k) {
      p.layer_w.push_back(xavier_matrix(cfg.dim, cfg.layer_in_dim(), rng));
      p.layer_b.push_back(Eigen::VectorXd::Zero(cfg.dim));
    }
    p.fusion_proj = xavier_matrix(cfg.dim, 2 * cfg.dim, rng);
    p.kappa = kappas[static_cast<std::size_t>(m)];
    model.sub.push_back(std::move(p));
  }
  auto rng = make_rng(mix64(seed, "attention"));
  model.attention_w = xavier_matrix(cfg.manifolds, cfg.manifolds * cfg.dim, rng);
  return model;
}

GradientSet GradientSet::zeros_like(const ModelState& model) {
  GradientSet g;
  for (const auto& p : model.sub) {
    SubspaceGrads s;
    s.user_emb = RMatrix::Zero(p.user_emb.rows(), p.user_emb.cols());
    s.entity_emb = RMatrix::Zero(p.entity_emb.rows(), p.entity_emb.cols());
    s.relation_emb = RMatrix::Zero(p.relation_emb.rows(), p.relation_emb.cols());
    for (const auto& w : p.layer_w) s.layer_w.push_back(RMatrix::Zero(w.rows(), w.cols()));
    for (const auto& b : p.layer_b) s.layer_b.push_back(Eigen::VectorXd::Zero(b.size()));
    s.fusion_proj = RMatrix::Zero(p.fusion_proj.rows(), p.fusion_proj.cols());
    s.kappa = 0.0;
    g.sub.push_back(std::move(s));
  }
  g.attention_w = RMatrix::Zero(model.attention_w.rows(), model.attention_w.cols());
  return g;
}

void GradientSet::set_zero() {
  for (auto& s : sub) {
    s.user_emb.setZero();
    s.entity_emb.setZero();
    s.relation_emb.setZero();
    for (auto& w : s.layer_w) w.setZero();
    for (auto& b : s.layer_b) b.setZero();
    s.fusion_proj.setZero();
    s.kappa = 0.0;
  }
  attention_w.setZero();
}

void GradientSet::add(const GradientSet& other) {
  for (std::size_t m = 0; m < sub.size(); ++m) {
    sub[m].user_emb += other.sub[m].user_emb;
    sub[m].entity_emb += other.sub[m].entity_emb;
    sub[m].relation_emb += other.sub[m].relation_emb;
    for (std::size_t k = 0; k < sub[m].layer_w.size(); ++k) {
      sub[m].layer_w[k] += other.sub[m].layer_w[k];
      sub[m].layer_b[k] += other.sub[m].layer_b[k];
    }
    sub[m].fusion_proj += other.sub[m].fusion_proj;
    sub[m].kappa += other.sub[m].kappa;
  }
  attention_w += other.attention_w;
}

void GradientSet::accumulate(const LeafRef& ref, Eigen::Map<const Eigen::VectorXd> adj) {
  auto add_row = [&](RMatrix& table) {
    table.row(ref.index) += adj.transpose();
  };
  auto add_mat = [&](RMatrix& mat) {
    // Leaves store matrices row-major, matching RMatrix layout.
    Eigen::Map<RMatrix const> m(adj.data(), mat.rows(), mat.cols());
    mat += m;
  };
  switch (ref.block) {
    case ParamBlock::UserEmb: add_row(sub[ref.subspace].user_emb); break;
    case ParamBlock::EntityEmb: add_row(sub[ref.subspace].entity_emb); break;
    case ParamBlock::RelationEmb: add_row(sub[ref.subspace].relation_emb); break;
    case ParamBlock::LayerW: add_mat(sub[ref.subspace].layer_w[ref.index]); break;
    case ParamBlock::LayerB: sub[ref.subspace].layer_b[ref.index] += adj; break;
    case ParamBlock::FusionProj: add_mat(sub[ref.subspace].fusion_proj); break;
    case ParamBlock::AttentionW: add_mat(attention_w); break;
    case ParamBlock::Kappa: sub[ref.subspace].kappa += adj[0]; break;
    case ParamBlock::None: break;
  }
}

bool GradientSet::all_finite() const {
  for (const auto& s : sub) {
    if (!s.user_emb.allFinite() || !s.entity_emb.allFinite() || !s.relation_emb.allFinite() ||
        !s.fusion_proj.allFinite() || !std::isfinite(s.kappa)) {
      return false;
    }
    for (const auto& w : s.layer_w) {
      if (!w.allFinite()) return false;
    }
    for (const auto& b : s.layer_b) {
      if (!b.allFinite()) return false;
    }
  }
  return attention_w.allFinite();
}

void apply_sgd(ModelState& model, const GradientSet& grad, double lr, double lr_kappa) {
  for (std::size_t m = 0; m < model.sub.size(); ++m) {
    auto& p = model.sub[m];
    const auto& g = grad.sub[m];
    p.user_emb -= lr * g.user_emb;
    p.entity_emb -= lr * g.entity_emb;
    p.relation_emb -= lr * g.relation_emb;
    for (std::size_t k = 0; k < p.layer_w.size(); ++k) {
      p.layer_w[k] -= lr * g.layer_w[k];
      p.layer_b[k] -= lr * g.layer_b[k];
    }
    p.fusion_proj -= lr * g.fusion_proj;
    p.kappa -= lr_kappa * g.kappa;
  }
  model.attention_w -= lr * grad.attention_w;
}

namespace {

constexpr char kMagic[8] = {'M', 'C', 'R', 'E', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

template <class T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
  return v;
}

void write_block(std::ofstream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_block(std::ifstream& in, double* data, std::size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelState& model,
                     std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(model.cfg.dim));
  write_pod(out, static_cast<std::uint32_t>(model.cfg.manifolds));
  write_pod(out, static_cast<std::uint32_t>(model.cfg.depth));
  write_pod(out, static_cast<std::uint32_t>(model.cfg.sample_size));
  write_pod(out, static_cast<std::uint32_t>(model.cfg.aggregator));
  write_pod(out, static_cast<std::uint32_t>(model.cfg.margin));
  write_pod(out, model.cfg.margin_c);
  write_pod(out, model.cfg.leaky_slope);
  write_pod(out, model.cfg.taylor_eps);
  write_pod(out, model.cfg.init_std);
  write_pod(out, static_cast<std::uint64_t>(model.user_count));
  write_pod(out, static_cast<std::uint64_t>(model.entity_count));
  write_pod(out, static_cast<std::uint64_t>(model.relation_count));
  write_pod(out, config_hash);
  for (const auto& p : model.sub) {
    write_block(out, p.user_emb.data(), static_cast<std::size_t>(p.user_emb.size()));
    write_block(out, p.entity_emb.data(), static_cast<std::size_t>(p.entity_emb.size()));
    write_block(out, p.relation_emb.data(), static_cast<std::size_t>(p.relation_emb.size()));
    for (const auto& w : p.layer_w) {
      write_block(out, w.data(), static_cast<std::size_t>(w.size()));
    }
    for (const auto& b : p.layer_b) {
      write_block(out, b.data(), static_cast<std::size_t>(b.size()));
    }
    write_block(out, p.fusion_proj.data(), static_cast<std::size_t>(p.fusion_proj.size()));
  }
  write_block(out, model.attention_w.data(), static_cast<std::size_t>(model.attention_w.size()));
  for (const auto& p : model.sub) write_pod(out, p.kappa);
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("bad checkpoint magic: " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.dim = static_cast<int>(read_pod<std::uint32_t>(in, "dim"));
  cfg.manifolds = static_cast<int>(read_pod<std::uint32_t>(in, "manifolds"));
  cfg.depth = static_cast<int>(read_pod<std::uint32_t>(in, "depth"));
  cfg.sample_size = static_cast<int>(read_pod<std::uint32_t>(in, "sample_size"));
  const auto agg = read_pod<std::uint32_t>(in, "aggregator");
  const auto marg = read_pod<std::uint32_t>(in, "margin");
  if (agg > 2) throw CheckpointError("bad aggregator id in checkpoint");
  if (marg > 2) throw CheckpointError("bad margin id in checkpoint");
  cfg.aggregator = static_cast<AggregatorKind>(agg);
  cfg.margin = static_cast<MarginKind>(marg);
  cfg.margin_c = read_pod<double>(in, "margin_c");
  cfg.leaky_slope = read_pod<double>(in, "leaky_slope");
  cfg.taylor_eps = read_pod<double>(in, "taylor_eps");
  cfg.init_std = read_pod<double>(in, "init_std");
  const auto users = read_pod<std::uint64_t>(in, "user_count");
  const auto entities = read_pod<std::uint64_t>(in, "entity_count");
  const auto relations = read_pod<std::uint64_t>(in, "relation_count");
  const auto config_hash = read_pod<std::uint64_t>(in, "config_hash");
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw CheckpointError(std::string("invalid hyperparameters in checkpoint: ") + e.what());
  }

  LoadedCheckpoint out;
  out.config_hash = config_hash;
  ModelState& model = out.model;
  model.cfg = cfg;
  model.user_count = static_cast<int>(users);
  model.entity_count = static_cast<int>(entities);
  model.relation_count = static_cast<int>(relations);
  for (int m = 0; m < cfg.manifolds; ++m) {
    SubspaceParams p;
    p.user_emb.resize(model.user_count, cfg.dim);
    p.entity_emb.resize(model.entity_count, cfg.dim);
    p.relation_emb.resize(model.relation_count, cfg.dim);
    read_block(in, p.user_emb.data(), static_cast<std::size_t>(p.user_emb.size()), "user_emb");
    read_block(in, p.entity_emb.data(), static_cast<std::size_t>(p.entity_emb.size()),
               "entity_emb");
    read_block(in, p.relation_emb.data(), static_cast<std::size_t>(p.relation_emb.size()),
               "relation_emb");
    for (int k = 0; k < cfg.depth; ++k) {
      RMatrix w(cfg.dim, cfg.layer_in_dim());
      read_block(in, w.data(), static_cast<std::size_t>(w.size()), "layer_w");
      p.layer_w.push_back(std::move(w));
    }
    for (int k = 0; k < cfg.depth; ++k) {
      Eigen::VectorXd b(cfg.dim);
      read_block(in, b.data(), static_cast<std::size_t>(b.size()), "layer_b");
      p.layer_b.push_back(std::move(b));
    }
    p.fusion_proj.resize(cfg.dim, 2 * cfg.dim);
    read_block(in, p.fusion_proj.data(), static_cast<std::size_t>(p.fusion_proj.size()),
               "fusion_proj");
    model.sub.push_back(std::move(p));
  }
  model.attention_w.resize(cfg.manifolds, cfg.manifolds * cfg.dim);
  read_block(in, model.attention_w.data(), static_cast<std::size_t>(model.attention_w.size()),
             "attention_w");
  for (int m = 0; m < cfg.manifolds; ++m) {
    model.sub[static_cast<std::size_t>(m)].kappa = read_pod<double>(in, "kappa");
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw CheckpointError("trailing bytes after checkpoint payload: " + path);
  }
  return out;
}

}  // namespace mcrec
