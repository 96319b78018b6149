#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mcrec/kappa_ops.hpp"
#include "mcrec/tape.hpp"

namespace mcrec {

enum class AggregatorKind : std::uint8_t { Gcn = 0, GraphSage = 1, Neighbor = 2 };
enum class MarginKind : std::uint8_t { Constant = 0, GeometryAware = 1, Hicf = 2 };

const char* to_string(AggregatorKind k);
const char* to_string(MarginKind k);
AggregatorKind parse_aggregator(const std::string& s);
MarginKind parse_margin(const std::string& s);

struct ModelConfig {
  int dim = 32;
  int manifolds = 3;
  int depth = 2;        // propagation rounds
  int sample_size = 8;  // receptive field per entity
  AggregatorKind aggregator = AggregatorKind::Gcn;
  MarginKind margin = MarginKind::GeometryAware;
  double margin_c = 0.1;
  double leaky_slope = 0.2;
  double taylor_eps = kops::kDefaultTaylorEps;
  double init_std = 0.1;
  std::vector<double> kappa_init;  // empty = default spread

  void validate() const;
  // Default: one hyperbolic space for M = 1, an even spread over
  // [-1, 1] otherwise.
  std::vector<double> initial_kappas() const;
  // Aggregator input width: 2d for the concatenating aggregator.
  int layer_in_dim() const {
    return aggregator == AggregatorKind::GraphSage ? 2 * dim : dim;
  }
};

// One constant-curvature subspace: Euclidean parameter tables (rows
// are tangent vectors at the origin, lifted on use) plus its
// learnable curvature.
struct SubspaceParams {
  RMatrix user_emb;      // users x d
  RMatrix entity_emb;    // entities x d
  RMatrix relation_emb;  // relations x d
  std::vector<RMatrix> layer_w;          // depth matrices, d x layer_in_dim
  std::vector<Eigen::VectorXd> layer_b;  // depth vectors, d
  RMatrix fusion_proj;   // d x 2d
  double kappa = -1.0;
};

struct ModelState {
  ModelConfig cfg;
  int user_count = 0;
  int entity_count = 0;
  int relation_count = 0;
  std::vector<SubspaceParams> sub;
  RMatrix attention_w;  // M x (M * d), shared by users and entities

  static ModelState init(const ModelConfig& cfg, int users, int entities, int relations,
                         std::uint64_t seed);
};

// Dense gradient accumulator mirroring ModelState.
struct SubspaceGrads {
  RMatrix user_emb, entity_emb, relation_emb;
  std::vector<RMatrix> layer_w;
  std::vector<Eigen::VectorXd> layer_b;
  RMatrix fusion_proj;
  double kappa = 0.0;
};

struct GradientSet {
  std::vector<SubspaceGrads> sub;
  RMatrix attention_w;

  static GradientSet zeros_like(const ModelState& model);
  void set_zero();
  void add(const GradientSet& other);
  // Scatters one tape leaf adjoint into the matching block.
  void accumulate(const LeafRef& ref, Eigen::Map<const Eigen::VectorXd> adj);
  bool all_finite() const;
};

// Applies one SGD step: params -= lr * grad, kappa -= lr_kappa * grad.
void apply_sgd(ModelState& model, const GradientSet& grad, double lr, double lr_kappa);

// Binary checkpoint (little-endian doubles). Layout: magic, version,
// sizes and hyperparameters, per-subspace parameter blocks, the shared
// attention matrix, then the curvature values.
void save_checkpoint(const std::string& path, const ModelState& model,
                     std::uint64_t config_hash);
struct LoadedCheckpoint {
  ModelState model;
  std::uint64_t config_hash = 0;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace mcrec
