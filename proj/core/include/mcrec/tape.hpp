#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcrec/errors.hpp"

namespace mcrec {

// Identifies which model parameter a tape leaf was created from, so
// backward results can be scattered into a gradient accumulator.
enum class ParamBlock : std::uint8_t {
  None = 0,
  UserEmb,
  EntityEmb,
  RelationEmb,
  LayerW,
  LayerB,
  FusionProj,
  AttentionW,
  Kappa,
};

struct LeafRef {
  std::int16_t subspace = -1;  // -1 for blocks shared across subspaces
  ParamBlock block = ParamBlock::None;
  std::int32_t index = 0;  // row id for embeddings, layer id for W/b
};

class Tape;

// Handle to a node on a tape. Size-1 nodes act as scalars.
struct Var {
  Tape* tape = nullptr;
  std::int32_t id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Op : std::uint8_t {
  Leaf,
  Const,
  Add,
  Sub,
  Neg,
  Mul,        // scalar * scalar
  Div,        // scalar / scalar
  Scale,      // scalar * vector
  Dot,
  SqNorm,
  Norm,
  MatVec,     // row-major matrix leaf times vector
  Concat,
  Index,      // single component -> scalar
  LeakyRelu,  // aux = negative slope
  Softmax,
  Sigmoid,
  Tan,
  Tanh,
  Atan,
  Atanh,
  Sqrt,
  ClampAbs,   // clamp to [-aux, aux]
  Hinge,      // max(x, 0)
};

const char* op_name(Op op);

// Arena-based record/replay reverse-mode tape. Values are computed
// eagerly while recording; backward() runs one reverse sweep. clear()
// keeps allocated capacity so a tape can be reused across samples.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void clear() {
    nodes_.clear();
    vals_.clear();
    adj_.clear();
    leaves_.clear();
    has_adjoints_ = false;
  }

  std::int32_t node_count() const { return static_cast<std::int32_t>(nodes_.size()); }

  Var leaf(const Eigen::Ref<const Eigen::VectorXd>& v, LeafRef ref = {});
  Var leaf_scalar(double v, LeafRef ref = {});
  // data points to rows*cols doubles laid out row by row.
  Var leaf_matrix(const double* data, int rows, int cols, LeafRef ref = {});
  Var constant_scalar(double c);
  Var constant(const Eigen::Ref<const Eigen::VectorXd>& v);
  Var zeros(int n);

  int size_of(Var v) const { return nodes_[v.id].n; }
  double scalar(Var v) const;
  Eigen::Map<const Eigen::VectorXd> values(Var v) const;

  // Seeds d(seed)/d(seed) = 1 and sweeps the tape in reverse. The seed
  // must be a scalar node. Throws NumericalError if any adjoint goes
  // non-finite, naming the offending node.
  void backward(Var seed);
  bool has_adjoints() const { return has_adjoints_; }
  Eigen::Map<const Eigen::VectorXd> adjoint(Var v) const;

  // Visits (ref, adjoint) for every leaf recorded with a ParamBlock.
  void for_each_leaf_adjoint(
      const std::function<void(const LeafRef&, Eigen::Map<const Eigen::VectorXd>)>& fn) const;

  // --- record methods (free-function wrappers below are the public
  // spelling; these stay public so the wrappers can reach them) ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var neg(Var a);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var s, Var v);
  Var dot(Var a, Var b);
  Var squared_norm(Var a);
  Var norm(Var a);
  Var matvec(Var w, Var x);
  Var concat(Var a, Var b);
  Var component(Var a, int i);
  Var leaky_relu(Var a, double slope);
  Var softmax(Var a);
  Var sigmoid(Var a);
  Var tan_(Var a);
  Var tanh_(Var a);
  Var atan_(Var a);
  Var atanh_(Var a);
  Var sqrt_(Var a);
  Var clamp_abs(Var a, double limit);
  Var hinge(Var a);

 private:
  struct Node {
    Op op;
    std::int32_t a = -1, b = -1;
    std::int32_t off = 0, n = 0;
    double aux = 0.0;
    std::int32_t iaux = 0;
  };

  Var push(Op op, int n, Var a = {}, Var b = {}, double aux = 0.0, int iaux = 0);
  double* val_ptr(std::int32_t id) { return vals_.data() + nodes_[id].off; }
  const double* val_ptr(std::int32_t id) const { return vals_.data() + nodes_[id].off; }

  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> adj_;
  std::vector<std::pair<std::int32_t, LeafRef>> leaves_;
  bool has_adjoints_ = false;
};

// Free-function spellings so templated formulas can be written once
// for (double, VectorXd) and (Var, Var). Unqualified calls resolve
// here through ADL.
inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator-(Var a) { return a.tape->neg(a); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }

inline Var operator+(Var a, double c) { return a.tape->add(a, a.tape->constant_scalar(c)); }
inline Var operator+(double c, Var a) { return a.tape->add(a.tape->constant_scalar(c), a); }
inline Var operator-(Var a, double c) { return a.tape->sub(a, a.tape->constant_scalar(c)); }
inline Var operator-(double c, Var a) { return a.tape->sub(a.tape->constant_scalar(c), a); }
inline Var operator*(Var a, double c) { return a.tape->mul(a, a.tape->constant_scalar(c)); }
inline Var operator*(double c, Var a) { return a.tape->mul(a.tape->constant_scalar(c), a); }
inline Var operator/(Var a, double c) { return a.tape->div(a, a.tape->constant_scalar(c)); }
inline Var operator/(double c, Var a) { return a.tape->div(a.tape->constant_scalar(c), a); }

inline Var scale(Var s, Var v) { return s.tape->scale(s, v); }
inline Var dot(Var a, Var b) { return a.tape->dot(a, b); }
inline Var squared_norm(Var a) { return a.tape->squared_norm(a); }
inline Var norm(Var a) { return a.tape->norm(a); }
inline Var matvec(Var w, Var x) { return w.tape->matvec(w, x); }
inline Var concat(Var a, Var b) { return a.tape->concat(a, b); }
inline Var component(Var a, int i) { return a.tape->component(a, i); }
inline Var leaky_relu(Var a, double slope) { return a.tape->leaky_relu(a, slope); }
inline Var softmax(Var a) { return a.tape->softmax(a); }
inline Var sigmoid(Var a) { return a.tape->sigmoid(a); }
inline Var tan(Var a) { return a.tape->tan_(a); }
inline Var tanh(Var a) { return a.tape->tanh_(a); }
inline Var atan(Var a) { return a.tape->atan_(a); }
inline Var atanh(Var a) { return a.tape->atanh_(a); }
inline Var sqrt(Var a) { return a.tape->sqrt_(a); }
inline Var clamp_abs(Var a, double limit) { return a.tape->clamp_abs(a, limit); }
inline Var hinge(Var a) { return a.tape->hinge(a); }

inline double scalar_value(const Var& v) { return v.tape->scalar(v); }
inline Eigen::Map<const Eigen::VectorXd> vector_value(const Var& v) { return v.tape->values(v); }
inline Var zero_vector_like(const Var& v) { return v.tape->zeros(v.tape->size_of(v)); }
inline Var make_scalar_like(const Var& exemplar, double c) {
  return exemplar.tape->constant_scalar(c);
}

// Stacks scalar nodes into one vector node.
inline Var stack(const std::vector<Var>& parts) {
  Var acc = parts.at(0);
  for (std::size_t i = 1; i < parts.size(); ++i) acc = concat(acc, parts[i]);
  return acc;
}

// Finite-difference check of a scalar function recorded on a tape.
// `build` must create leaves consuming exactly x.size() slots, in
// order, and return the scalar output node.
struct GradCheckResult {
  double max_rel_err = 0.0;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

template <class BuildFn>
GradCheckResult grad_check(BuildFn&& build, std::vector<double> x, double step = 1e-6) {
  Tape tape;
  Var out = build(tape, x);
  tape.backward(out);
  std::vector<double> analytic;
  analytic.reserve(x.size());
  tape.for_each_leaf_adjoint([&](const LeafRef&, Eigen::Map<const Eigen::VectorXd> adj) {
    for (int i = 0; i < adj.size(); ++i) analytic.push_back(adj[i]);
  });
  if (analytic.size() != x.size()) {
    throw ContractError("grad_check: leaves cover " + std::to_string(analytic.size()) +
                        " slots, expected " + std::to_string(x.size()));
  }

  auto value_at = [&](const std::vector<double>& p) {
    Tape t;
    Var o = build(t, p);
    return t.scalar(o);
  };

  GradCheckResult res;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> lo = x, hi = x;
    lo[i] -= step;
    hi[i] += step;
    const double numeric = (value_at(hi) - value_at(lo)) / (2.0 * step);
    const double denom = std::max(std::abs(analytic[i]), std::abs(numeric));
    const double err = denom > 1e-5 ? std::abs(analytic[i] - numeric) / denom
                                    : std::abs(analytic[i] - numeric);
    if (err > res.max_rel_err) {
      res.max_rel_err = err;
      res.worst_index = static_cast<int>(i);
      res.analytic = analytic[i];
      res.numeric = numeric;
    }
  }
  return res;
}

}  // namespace mcrec
