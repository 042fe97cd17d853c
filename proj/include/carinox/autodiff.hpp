#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "carinox/errors.hpp"
#include "carinox/linalg.hpp"

namespace carinox::ad {

using carinox::Mat;
using carinox::Vec;

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class Op : std::uint8_t {
  kLeaf,
  kConstant,
  kAffine,
  kAdd,
  kSub,
  kScale,
  kMul,
  kTanh,
  kSigmoid,
  kSquare,
  kExp,
  kLog,
  kSum,
  kMean,
  kLogSumExp,
  kL2Norm,
  kDot,
  kCosine,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConstant: return "constant";
    case Op::kAffine: return "affine";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kScale: return "scale";
    case Op::kMul: return "mul";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kSquare: return "square";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kLogSumExp: return "logsumexp";
    case Op::kL2Norm: return "l2_norm";
    case Op::kDot: return "dot";
    case Op::kCosine: return "cosine";
  }
  return "?";
}

// Overflow-safe logistic.
inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {
inline double logsumexp_value(const Vec& x) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}
}  // namespace detail

// Record-and-replay reverse-mode differentiation over dense vectors.
//
// Every record call validates its operands, computes the forward value
// eagerly, and appends one node. Operand ids always precede the node that
// uses them, so backward() is a single reverse sweep. backward() never
// mutates the tape; calling it repeatedly, in any order, gives identical
// results.
class Tape {
 public:
  struct Node {
    Op op;
    NodeId a = kNoNode;
    NodeId b = kNoNode;
    Vec value;
    std::shared_ptr<const Mat> weight;  // kAffine only
    Vec bias;                           // kAffine only
    double factor = 0.0;                // kScale only
  };

  std::size_t size() const { return nodes_.size(); }

  const Vec& value(NodeId id) const {
    check_id(id, "value");
    return nodes_[id].value;
  }

  Op op(NodeId id) const {
    check_id(id, "op");
    return nodes_[id].op;
  }

  NodeId leaf(Vec v) {
    check_nonempty(v, "leaf");
    return push({Op::kLeaf, kNoNode, kNoNode, std::move(v), nullptr, {}, 0.0});
  }

  NodeId constant(Vec v) {
    check_nonempty(v, "constant");
    return push(
        {Op::kConstant, kNoNode, kNoNode, std::move(v), nullptr, {}, 0.0});
  }

  NodeId constant(double v) { return constant(Vec{v}); }

  // y = W x + b. The matrix is shared, not copied, so callers may reuse one
  // weight across many tapes.
  NodeId affine(std::shared_ptr<const Mat> w, Vec b, NodeId x) {
    if (!w) throw contract_error("affine: null weight matrix");
    const Vec& xv = operand(x, "affine");
    if (w->cols != xv.size())
      throw contract_error("affine: weight has " + std::to_string(w->cols) +
                           " columns, input has " + std::to_string(xv.size()));
    if (!b.empty() && b.size() != w->rows)
      throw contract_error("affine: bias size mismatch");
    if (w->rows == 0) throw contract_error("affine: weight has zero rows");
    Vec y = matvec(*w, xv);
    if (!b.empty()) axpy(1.0, b, y);
    return push(
        {Op::kAffine, x, kNoNode, std::move(y), std::move(w), std::move(b),
         0.0});
  }

  NodeId add(NodeId a, NodeId b) { return binary_same(Op::kAdd, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary_same(Op::kSub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary_same(Op::kMul, a, b); }

  NodeId scale(double c, NodeId x) {
    const Vec& xv = operand(x, "scale");
    if (!std::isfinite(c)) throw contract_error("scale: non-finite factor");
    Vec y(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = c * xv[i];
    return push({Op::kScale, x, kNoNode, std::move(y), nullptr, {}, c});
  }

  NodeId tanh(NodeId x) {
    return unary(Op::kTanh, x, [](double v) { return std::tanh(v); });
  }

  NodeId sigmoid(NodeId x) {
    return unary(Op::kSigmoid, x, [](double v) { return stable_sigmoid(v); });
  }

  NodeId square(NodeId x) {
    return unary(Op::kSquare, x, [](double v) { return v * v; });
  }

  NodeId exp(NodeId x) {
    return unary(Op::kExp, x, [](double v) { return std::exp(v); });
  }

  // Componentwise natural log; the whole operand must be strictly positive.
  NodeId log(NodeId x) {
    const Vec& xv = operand(x, "log");
    for (double v : xv)
      if (v <= 0.0)
        throw singularity_error("log: non-positive input " +
                                std::to_string(v));
    return unary(Op::kLog, x, [](double v) { return std::log(v); });
  }

  NodeId sum(NodeId x) {
    const Vec& xv = operand(x, "sum");
    double acc = 0.0;
    for (double v : xv) acc += v;
    return push({Op::kSum, x, kNoNode, Vec{acc}, nullptr, {}, 0.0});
  }

  NodeId mean(NodeId x) {
    const Vec& xv = operand(x, "mean");
    double acc = 0.0;
    for (double v : xv) acc += v;
    return push({Op::kMean, x, kNoNode, Vec{acc / double(xv.size())}, nullptr,
                 {}, 0.0});
  }

  NodeId logsumexp(NodeId x) {
    const Vec& xv = operand(x, "logsumexp");
    return push({Op::kLogSumExp, x, kNoNode, Vec{detail::logsumexp_value(xv)},
                 nullptr, {}, 0.0});
  }

  // Euclidean norm. Defined at the origin but not differentiable there;
  // backward() through the origin raises singularity_error.
  NodeId l2_norm(NodeId x) {
    const Vec& xv = operand(x, "l2_norm");
    return push(
        {Op::kL2Norm, x, kNoNode, Vec{norm2(xv)}, nullptr, {}, 0.0});
  }

  NodeId dot(NodeId a, NodeId b) {
    const Vec& av = operand(a, "dot");
    const Vec& bv = operand(b, "dot");
    if (av.size() != bv.size()) throw contract_error("dot: size mismatch");
    return push(
        {Op::kDot, a, b, Vec{carinox::dot(av, bv)}, nullptr, {}, 0.0});
  }

  // Cosine similarity; both operands must have nonzero norm.
  NodeId cosine(NodeId a, NodeId b) {
    const Vec& av = operand(a, "cosine");
    const Vec& bv = operand(b, "cosine");
    if (av.size() != bv.size()) throw contract_error("cosine: size mismatch");
    const double na = norm2(av);
    const double nb = norm2(bv);
    if (na == 0.0 || nb == 0.0)
      throw singularity_error("cosine: zero-norm operand");
    return push({Op::kCosine, a, b, Vec{carinox::dot(av, bv) / (na * nb)},
                 nullptr, {}, 0.0});
  }

  // Gradient of a scalar output with respect to one leaf. Pure: the tape is
  // unchanged and repeat calls agree bit for bit.
  Vec backward(NodeId output, NodeId wrt) const {
    check_id(output, "backward");
    check_id(wrt, "backward");
    const Node& out = nodes_[output];
    if (out.value.size() != 1)
      throw contract_error("backward: output must be scalar, has size " +
                           std::to_string(out.value.size()));
    if (nodes_[wrt].op != Op::kLeaf)
      throw contract_error("backward: gradients are taken w.r.t. leaves");

    std::vector<Vec> adj(output + 1);
    adj[output] = Vec{1.0};
    auto grad_of = [this, &adj](NodeId id) -> Vec& {
      Vec& g = adj[id];
      if (g.empty()) g.assign(nodes_[id].value.size(), 0.0);
      return g;
    };
    for (NodeId id = output + 1; id-- > 0;) {
      const Vec& g = adj[id];
      if (g.empty()) continue;
      const Node& n = nodes_[id];
      switch (n.op) {
        case Op::kLeaf:
        case Op::kConstant:
          break;
        case Op::kAffine:
          matvec_transpose_accumulate(*n.weight, g, grad_of(n.a));
          break;
        case Op::kAdd:
          axpy(1.0, g, grad_of(n.a));
          axpy(1.0, g, grad_of(n.b));
          break;
        case Op::kSub:
          axpy(1.0, g, grad_of(n.a));
          axpy(-1.0, g, grad_of(n.b));
          break;
        case Op::kScale:
          axpy(n.factor, g, grad_of(n.a));
          break;
        case Op::kMul: {
          const Vec& av = nodes_[n.a].value;
          const Vec& bv = nodes_[n.b].value;
          Vec& ga = grad_of(n.a);
          Vec& gb = grad_of(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += bv[i] * g[i];
            gb[i] += av[i] * g[i];
          }
          break;
        }
        case Op::kTanh: {
          Vec& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += (1.0 - n.value[i] * n.value[i]) * g[i];
          break;
        }
        case Op::kSigmoid: {
          Vec& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += n.value[i] * (1.0 - n.value[i]) * g[i];
          break;
        }
        case Op::kSquare: {
          const Vec& av = nodes_[n.a].value;
          Vec& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += 2.0 * av[i] * g[i];
          break;
        }
        case Op::kExp: {
          Vec& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += n.value[i] * g[i];
          break;
        }
        case Op::kLog: {
          const Vec& av = nodes_[n.a].value;
          Vec& ga = grad_of(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
          break;
        }
        case Op::kSum: {
          Vec& ga = grad_of(n.a);
          for (double& v : ga) v += g[0];
          break;
        }
        case Op::kMean: {
          Vec& ga = grad_of(n.a);
          const double s = g[0] / double(ga.size());
          for (double& v : ga) v += s;
          break;
        }
        case Op::kLogSumExp: {
          const Vec& av = nodes_[n.a].value;
          Vec& ga = grad_of(n.a);
          for (std::size_t i = 0; i < av.size(); ++i)
            ga[i] += std::exp(av[i] - n.value[0]) * g[0];
          break;
        }
        case Op::kL2Norm: {
          if (n.value[0] == 0.0)
            throw singularity_error("backward: l2_norm at the origin");
          const Vec& av = nodes_[n.a].value;
          Vec& ga = grad_of(n.a);
          const double s = g[0] / n.value[0];
          for (std::size_t i = 0; i < av.size(); ++i) ga[i] += s * av[i];
          break;
        }
        case Op::kDot: {
          const Vec& av = nodes_[n.a].value;
          const Vec& bv = nodes_[n.b].value;
          axpy(g[0], bv, grad_of(n.a));
          axpy(g[0], av, grad_of(n.b));
          break;
        }
        case Op::kCosine: {
          const Vec& av = nodes_[n.a].value;
          const Vec& bv = nodes_[n.b].value;
          const double na = norm2(av);
          const double nb = norm2(bv);
          const double c = n.value[0];
          Vec& ga = grad_of(n.a);
          Vec& gb = grad_of(n.b);
          for (std::size_t i = 0; i < av.size(); ++i) {
            ga[i] += g[0] * (bv[i] / (na * nb) - c * av[i] / (na * na));
            gb[i] += g[0] * (av[i] / (na * nb) - c * bv[i] / (nb * nb));
          }
          break;
        }
      }
    }
    if (adj[wrt].empty()) return Vec(nodes_[wrt].value.size(), 0.0);
    return std::move(adj[wrt]);
  }

 private:
  std::vector<Node> nodes_;

  void check_id(NodeId id, const char* who) const {
    if (id >= nodes_.size())
      throw contract_error(std::string(who) + ": unknown node id " +
                           std::to_string(id));
  }

  static void check_nonempty(const Vec& v, const char* who) {
    if (v.empty()) throw contract_error(std::string(who) + ": empty value");
  }

  const Vec& operand(NodeId id, const char* who) const {
    check_id(id, who);
    return nodes_[id].value;
  }

  NodeId push(Node n) {
    if (!all_finite(n.value))
      throw numeric_error(std::string("non-finite value from ") +
                          op_name(n.op));
    if (nodes_.size() >= kNoNode)
      throw contract_error("tape is full");
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  template <typename F>
  NodeId unary(Op op, NodeId x, F&& f) {
    const Vec& xv = operand(x, op_name(op));
    Vec y(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
    return push({op, x, kNoNode, std::move(y), nullptr, {}, 0.0});
  }

  NodeId binary_same(Op op, NodeId a, NodeId b) {
    const Vec& av = operand(a, op_name(op));
    const Vec& bv = operand(b, op_name(op));
    if (av.size() != bv.size())
      throw contract_error(std::string(op_name(op)) + ": size mismatch " +
                           std::to_string(av.size()) + " vs " +
                           std::to_string(bv.size()));
    Vec y(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
      switch (op) {
        case Op::kAdd: y[i] = av[i] + bv[i]; break;
        case Op::kSub: y[i] = av[i] - bv[i]; break;
        case Op::kMul: y[i] = av[i] * bv[i]; break;
        default: throw contract_error("binary_same: bad op");
      }
    }
    return push({op, a, b, std::move(y), nullptr, {}, 0.0});
  }
};

// Central-difference gradient of a scalar function; the reference every
// recorded gradient is audited against.
inline Vec finite_diff_gradient(const std::function<double(const Vec&)>& f,
                                const Vec& x, double h) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw contract_error("finite_diff_gradient: step must be positive");
  if (x.empty()) throw contract_error("finite_diff_gradient: empty point");
  Vec g(x.size());
  Vec p = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    p[i] = xi + h;
    const double fp = f(p);
    p[i] = xi - h;
    const double fm = f(p);
    p[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw numeric_error("finite_diff_gradient: non-finite evaluation");
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace carinox::ad
