#include "mcrec/tape.hpp"

#include "mcrec/strictord.hpp"

#include <algorithm>
#include <cmath>

namespace mcrec {

namespace {
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;
using CMapRowMat =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MapRowMat =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void require(bool ok, const char* msg) {
  if (!ok) throw ContractError(msg);
}
}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Const: return "const";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Neg: return "neg";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Scale: return "scale";
    case Op::Dot: return "dot";
    case Op::SqNorm: return "squared_norm";
    case Op::Norm: return "norm";
    case Op::MatVec: return "matvec";
    case Op::Concat: return "concat";
    case Op::Index: return "index";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Softmax: return "softmax";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tan: return "tan";
    case Op::Tanh: return "tanh";
    case Op::Atan: return "atan";
    case Op::Atanh: return "atanh";
    case Op::Sqrt: return "sqrt";
    case Op::ClampAbs: return "clamp_abs";
    case Op::Hinge: return "hinge";
  }
  return "?";
}

Var Tape::push(Op op, int n, Var a, Var b, double aux, int iaux) {
  Node node;
  node.op = op;
  node.a = a.id;
  node.b = b.id;
  node.off = static_cast<std::int32_t>(vals_.size());
  node.n = n;
  node.aux = aux;
  node.iaux = iaux;
  nodes_.push_back(node);
  vals_.resize(vals_.size() + static_cast<std::size_t>(n));
  has_adjoints_ = false;
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(const Eigen::Ref<const Eigen::VectorXd>& v, LeafRef ref) {
  Var out = push(Op::Leaf, static_cast<int>(v.size()));
  MapVec(val_ptr(out.id), v.size()) = v;
  if (ref.block != ParamBlock::None) leaves_.emplace_back(out.id, ref);
  return out;
}

Var Tape::leaf_scalar(double v, LeafRef ref) {
  Var out = push(Op::Leaf, 1);
  *val_ptr(out.id) = v;
  if (ref.block != ParamBlock::None) leaves_.emplace_back(out.id, ref);
  return out;
}

Var Tape::leaf_matrix(const double* data, int rows, int cols, LeafRef ref) {
  Var out = push(Op::Leaf, rows * cols, {}, {}, 0.0, cols);
  std::copy(data, data + static_cast<std::size_t>(rows) * cols, val_ptr(out.id));
  if (ref.block != ParamBlock::None) leaves_.emplace_back(out.id, ref);
  return out;
}

Var Tape::constant_scalar(double c) {
  Var out = push(Op::Const, 1);
  *val_ptr(out.id) = c;
  return out;
}

Var Tape::constant(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Var out = push(Op::Const, static_cast<int>(v.size()));
  MapVec(val_ptr(out.id), v.size()) = v;
  return out;
}

Var Tape::zeros(int n) {
  Var out = push(Op::Const, n);
  MapVec(val_ptr(out.id), n).setZero();
  return out;
}

double Tape::scalar(Var v) const {
  require(nodes_[v.id].n == 1, "scalar() on non-scalar node");
  return *val_ptr(v.id);
}

Eigen::Map<const Eigen::VectorXd> Tape::values(Var v) const {
  const Node& node = nodes_[v.id];
  return CMapVec(val_ptr(v.id), node.n);
}

Eigen::Map<const Eigen::VectorXd> Tape::adjoint(Var v) const {
  require(has_adjoints_, "adjoint() before backward()");
  const Node& node = nodes_[v.id];
  return CMapVec(adj_.data() + node.off, node.n);
}

Var Tape::add(Var a, Var b) {
  require(nodes_[a.id].n == nodes_[b.id].n, "add: size mismatch");
  Var out = push(Op::Add, nodes_[a.id].n, a, b);
  MapVec(val_ptr(out.id), nodes_[out.id].n) =
      values(a) + CMapVec(val_ptr(b.id), nodes_[b.id].n);
  return out;
}

Var Tape::sub(Var a, Var b) {
  require(nodes_[a.id].n == nodes_[b.id].n, "sub: size mismatch");
  Var out = push(Op::Sub, nodes_[a.id].n, a, b);
  MapVec(val_ptr(out.id), nodes_[out.id].n) =
      values(a) - CMapVec(val_ptr(b.id), nodes_[b.id].n);
  return out;
}

Var Tape::neg(Var a) {
  Var out = push(Op::Neg, nodes_[a.id].n, a);
  MapVec(val_ptr(out.id), nodes_[out.id].n) = -values(a);
  return out;
}

Var Tape::mul(Var a, Var b) {
  require(nodes_[a.id].n == 1 && nodes_[b.id].n == 1, "mul: scalars only");
  Var out = push(Op::Mul, 1, a, b);
  *val_ptr(out.id) = *val_ptr(a.id) * *val_ptr(b.id);
  return out;
}

Var Tape::div(Var a, Var b) {
  require(nodes_[a.id].n == 1 && nodes_[b.id].n == 1, "div: scalars only");
  Var out = push(Op::Div, 1, a, b);
  *val_ptr(out.id) = *val_ptr(a.id) / *val_ptr(b.id);
  return out;
}

Var Tape::scale(Var s, Var v) {
  require(nodes_[s.id].n == 1, "scale: first arg must be scalar");
  Var out = push(Op::Scale, nodes_[v.id].n, s, v);
  MapVec(val_ptr(out.id), nodes_[out.id].n) = *val_ptr(s.id) * values(v);
  return out;
}

Var Tape::dot(Var a, Var b) {
  require(nodes_[a.id].n == nodes_[b.id].n, "dot: size mismatch");
  Var out = push(Op::Dot, 1, a, b);
  *val_ptr(out.id) = strictord::dot(val_ptr(a.id), val_ptr(b.id), nodes_[a.id].n);
  return out;
}

Var Tape::squared_norm(Var a) {
  Var out = push(Op::SqNorm, 1, a);
  *val_ptr(out.id) = strictord::dot(val_ptr(a.id), val_ptr(a.id), nodes_[a.id].n);
  return out;
}

Var Tape::norm(Var a) {
  Var out = push(Op::Norm, 1, a);
  *val_ptr(out.id) = std::sqrt(strictord::dot(val_ptr(a.id), val_ptr(a.id), nodes_[a.id].n));
  return out;
}

Var Tape::matvec(Var w, Var x) {
  const int cols = nodes_[x.id].n;
  require(cols > 0 && nodes_[w.id].n % cols == 0, "matvec: size mismatch");
  require(nodes_[w.id].iaux == cols, "matvec: matrix recorded with different column count");
  const int rows = nodes_[w.id].n / cols;
  Var out = push(Op::MatVec, rows, w, x, 0.0, cols);
  strictord::matvec(val_ptr(w.id), val_ptr(x.id), val_ptr(out.id), rows, cols);
  return out;
}

Var Tape::concat(Var a, Var b) {
  const int na = nodes_[a.id].n, nb = nodes_[b.id].n;
  Var out = push(Op::Concat, na + nb, a, b);
  MapVec(val_ptr(out.id), na) = values(a);
  MapVec(val_ptr(out.id) + na, nb) = values(b);
  return out;
}

Var Tape::component(Var a, int i) {
  require(i >= 0 && i < nodes_[a.id].n, "component: index out of range");
  Var out = push(Op::Index, 1, a, {}, 0.0, i);
  *val_ptr(out.id) = val_ptr(a.id)[i];
  return out;
}

Var Tape::leaky_relu(Var a, double slope) {
  const int n = nodes_[a.id].n;
  Var out = push(Op::LeakyRelu, n, a, {}, slope);
  const double* in = val_ptr(a.id);
  double* o = val_ptr(out.id);
  for (int i = 0; i < n; ++i) o[i] = in[i] > 0.0 ? in[i] : slope * in[i];
  return out;
}

Var Tape::softmax(Var a) {
  const int n = nodes_[a.id].n;
  Var out = push(Op::Softmax, n, a);
  CMapVec in(val_ptr(a.id), n);
  MapVec o(val_ptr(out.id), n);
  const double m = in.maxCoeff();
  o = (in.array() - m).exp();
  o /= strictord::sum(o.data(), n);
  return out;
}

Var Tape::sigmoid(Var a) {
  require(nodes_[a.id].n == 1, "sigmoid: scalar only");
  Var out = push(Op::Sigmoid, 1, a);
  *val_ptr(out.id) = 1.0 / (1.0 + std::exp(-*val_ptr(a.id)));
  return out;
}

Var Tape::tan_(Var a) {
  require(nodes_[a.id].n == 1, "tan: scalar only");
  Var out = push(Op::Tan, 1, a);
  *val_ptr(out.id) = std::tan(*val_ptr(a.id));
  return out;
}

Var Tape::tanh_(Var a) {
  require(nodes_[a.id].n == 1, "tanh: scalar only");
  Var out = push(Op::Tanh, 1, a);
  *val_ptr(out.id) = std::tanh(*val_ptr(a.id));
  return out;
}

Var Tape::atan_(Var a) {
  require(nodes_[a.id].n == 1, "atan: scalar only");
  Var out = push(Op::Atan, 1, a);
  *val_ptr(out.id) = std::atan(*val_ptr(a.id));
  return out;
}

Var Tape::atanh_(Var a) {
  require(nodes_[a.id].n == 1, "atanh: scalar only");
  Var out = push(Op::Atanh, 1, a);
  *val_ptr(out.id) = std::atanh(*val_ptr(a.id));
  return out;
}

Var Tape::sqrt_(Var a) {
  require(nodes_[a.id].n == 1, "sqrt: scalar only");
  Var out = push(Op::Sqrt, 1, a);
  *val_ptr(out.id) = std::sqrt(*val_ptr(a.id));
  return out;
}

Var Tape::clamp_abs(Var a, double limit) {
  require(nodes_[a.id].n == 1, "clamp_abs: scalar only");
  Var out = push(Op::ClampAbs, 1, a, {}, limit);
  *val_ptr(out.id) = std::clamp(*val_ptr(a.id), -limit, limit);
  return out;
}

Var Tape::hinge(Var a) {
  require(nodes_[a.id].n == 1, "hinge: scalar only");
  Var out = push(Op::Hinge, 1, a);
  *val_ptr(out.id) = std::max(*val_ptr(a.id), 0.0);
  return out;
}

void Tape::backward(Var seed) {
  require(seed.valid() && seed.tape == this, "backward: seed from another tape");
  require(nodes_[seed.id].n == 1, "backward: seed must be scalar");
  adj_.assign(vals_.size(), 0.0);
  adj_[nodes_[seed.id].off] = 1.0;
  has_adjoints_ = true;

  for (std::int32_t i = seed.id; i >= 0; --i) {
    const Node& node = nodes_[i];
    CMapVec g(adj_.data() + node.off, node.n);
    if (!g.allFinite()) {
      throw NumericalError("non-finite adjoint at node " + std::to_string(i) + " (" +
                           op_name(node.op) + ")");
    }
    if (node.op == Op::Leaf || node.op == Op::Const) continue;

    const std::int32_t a = node.a, b = node.b;
    double* adj_a = a >= 0 ? adj_.data() + nodes_[a].off : nullptr;
    double* adj_b = b >= 0 ? adj_.data() + nodes_[b].off : nullptr;
    const double* out = val_ptr(i);

    switch (node.op) {
      case Op::Add: {
        MapVec(adj_a, node.n) += g;
        MapVec(adj_b, node.n) += g;
        break;
      }
      case Op::Sub: {
        MapVec(adj_a, node.n) += g;
        MapVec(adj_b, node.n) -= g;
        break;
      }
      case Op::Neg: {
        MapVec(adj_a, node.n) -= g;
        break;
      }
      case Op::Mul: {
        adj_a[0] += g[0] * *val_ptr(b);
        adj_b[0] += g[0] * *val_ptr(a);
        break;
      }
      case Op::Div: {
        const double vb = *val_ptr(b);
        adj_a[0] += g[0] / vb;
        adj_b[0] -= g[0] * out[0] / vb;
        break;
      }
      case Op::Scale: {
        const int n = node.n;
        CMapVec v(val_ptr(b), n);
        adj_a[0] += g.dot(v);
        MapVec(adj_b, n) += *val_ptr(a) * g;
        break;
      }
      case Op::Dot: {
        const int n = nodes_[a].n;
        MapVec(adj_a, n) += g[0] * CMapVec(val_ptr(b), n);
        MapVec(adj_b, n) += g[0] * CMapVec(val_ptr(a), n);
        break;
      }
      case Op::SqNorm: {
        const int n = nodes_[a].n;
        MapVec(adj_a, n) += 2.0 * g[0] * CMapVec(val_ptr(a), n);
        break;
      }
      case Op::Norm: {
        // Subgradient 0 at the origin.
        const int n = nodes_[a].n;
        if (out[0] > 1e-300) {
          MapVec(adj_a, n) += (g[0] / out[0]) * CMapVec(val_ptr(a), n);
        }
        break;
      }
      case Op::MatVec: {
        const int cols = node.iaux;
        const int rows = node.n;
        CMapVec x(val_ptr(b), cols);
        MapRowMat(adj_a, rows, cols).noalias() += g * x.transpose();
        MapVec(adj_b, cols).noalias() += CMapRowMat(val_ptr(a), rows, cols).transpose() * g;
        break;
      }
      case Op::Concat: {
        const int na = nodes_[a].n, nb = nodes_[b].n;
        MapVec(adj_a, na) += g.head(na);
        MapVec(adj_b, nb) += g.tail(nb);
        break;
      }
      case Op::Index: {
        adj_a[node.iaux] += g[0];
        break;
      }
      case Op::LeakyRelu: {
        const double* in = val_ptr(a);
        for (int k = 0; k < node.n; ++k) {
          adj_a[k] += g[k] * (in[k] > 0.0 ? 1.0 : node.aux);
        }
        break;
      }
      case Op::Softmax: {
        CMapVec y(out, node.n);
        const double t = g.dot(y);
        MapVec(adj_a, node.n).array() += y.array() * (g.array() - t);
        break;
      }
      case Op::Sigmoid: {
        adj_a[0] += g[0] * out[0] * (1.0 - out[0]);
        break;
      }
      case Op::Tan: {
        adj_a[0] += g[0] * (1.0 + out[0] * out[0]);
        break;
      }
      case Op::Tanh: {
        adj_a[0] += g[0] * (1.0 - out[0] * out[0]);
        break;
      }
      case Op::Atan: {
        const double x = *val_ptr(a);
        adj_a[0] += g[0] / (1.0 + x * x);
        break;
      }
      case Op::Atanh: {
        const double x = *val_ptr(a);
        adj_a[0] += g[0] / (1.0 - x * x);
        break;
      }
      case Op::Sqrt: {
        adj_a[0] += g[0] / (2.0 * out[0]);
        break;
      }
      case Op::ClampAbs: {
        // Subgradient 0 on the clamped branch.
        const double x = *val_ptr(a);
        if (std::abs(x) < node.aux) adj_a[0] += g[0];
        break;
      }
      case Op::Hinge: {
        const double x = *val_ptr(a);
        if (x > 0.0) adj_a[0] += g[0];
        break;
      }
      case Op::Leaf:
      case Op::Const:
        break;
    }
  }
}

void Tape::for_each_leaf_adjoint(
    const std::function<void(const LeafRef&, Eigen::Map<const Eigen::VectorXd>)>& fn) const {
  require(has_adjoints_, "for_each_leaf_adjoint before backward()");
  for (const auto& [id, ref] : leaves_) {
    const Node& node = nodes_[id];
    fn(ref, CMapVec(adj_.data() + node.off, node.n));
  }
}

}  // namespace mcrec
