#pragma once

// Dense tensors and a reverse-mode differentiation tape covering the
// primitives the attention model composes: affine maps, gates, sums,
// cosine similarity, softmax and KL divergence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ham/errors.hpp"

namespace ham {

/// Row-major dense array of doubles. Rank 0 is a scalar, rank 1 a vector,
/// rank 2 a matrix.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (count(shape_) != values_.size()) {
      throw DimensionError("tensor shape " + shape_string() + " holds " +
                           std::to_string(count(shape_)) + " values, got " +
                           std::to_string(values_.size()));
    }
  }

  static Tensor zeros(std::vector<std::size_t> shape) {
    const auto n = count(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }
  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor vector(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({n}, std::move(values));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t rows() const noexcept { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> mutable_values() noexcept { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols(), cols());
  }

  std::string shape_string() const { return format_shape(shape_); }

  bool operator==(const Tensor&) const = default;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

  static std::string format_shape(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

// Norms below this are treated as zero by cosine similarity.
inline constexpr double kCosineNormGuard = 1e-8;
// Tolerance used when checking that a vector is a probability distribution.
inline constexpr double kDistributionTolerance = 1e-9;

namespace kernels {

inline void require_same_size(std::span<const double> a, std::span<const double> b,
                              const char* op, const char* lhs, const char* rhs) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": " + lhs + " has " +
                         std::to_string(a.size()) + " entries but " + rhs + " has " +
                         std::to_string(b.size()));
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// y = W x (+ y's existing contents are overwritten).
inline void matvec(std::span<const double> w, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
    y[r] = s;
  }
}

inline std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("softmax: empty input");
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "cosine", "a", "b");
  const double na = norm(a);
  const double nb = norm(b);
  if (na < kCosineNormGuard || nb < kCosineNormGuard) return 0.0;
  return dot(a, b) / (na * nb);
}

inline void require_distribution(std::span<const double> p, const char* what) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw DomainError(std::string("kl_divergence: ") + what + " has a negative entry");
    s += v;
  }
  if (std::abs(s - 1.0) > kDistributionTolerance) {
    throw DomainError(std::string("kl_divergence: ") + what + " sums to " +
                      std::to_string(s) + ", not 1");
  }
}

/// KL(p || q) with target p first; 0 log 0 is taken as 0.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require_same_size(p, q, "kl_divergence", "p", "p_hat");
  require_distribution(p, "p");
  require_distribution(q, "p_hat");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) {
      throw DomainError("kl_divergence: p_hat[" + std::to_string(i) +
                        "] is zero where p is positive");
    }
    s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

}  // namespace kernels

/// W x + b for a matrix W [m x n], x [n], b [m].
inline Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
  if (w.rank() != 2 || x.rank() != 1 || b.rank() != 1 || w.cols() != x.size() ||
      w.rows() != b.size()) {
    throw DimensionError("affine: W " + w.shape_string() + ", x " + x.shape_string() +
                         ", b " + b.shape_string() + " do not conform");
  }
  std::vector<double> y(w.rows());
  kernels::matvec(w.values(), w.rows(), w.cols(), x.values(), y);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return Tensor::vector(std::move(y));
}

inline Tensor softmax(const Tensor& scores) {
  return Tensor::vector(kernels::softmax(scores.values()));
}

inline double cosine(const Tensor& a, const Tensor& b) {
  return kernels::cosine(a.values(), b.values());
}

inline double kl_divergence(const Tensor& p, const Tensor& p_hat) {
  return kernels::kl_divergence(p.values(), p_hat.values());
}

/// Handle to a node on a Tape.
struct Var {
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kNone;

  bool valid() const noexcept { return id != kNone; }
  bool operator==(const Var&) const = default;
};

/// Gradient per named parameter; parameters off every path to the loss map
/// to zero tensors.
using Gradients = std::map<std::string, Tensor>;

/// Records a forward computation and replays it backward. A tape is owned by
/// one forward/backward pass. Parameter nodes reference caller tensors, which
/// must outlive the tape.
class Tape {
 public:
  Var constant(Tensor t) {
    Node n{Op::constant};
    n.shape = t.shape();
    n.value.assign(t.values().begin(), t.values().end());
    return push(std::move(n));
  }

  Var constant(std::vector<double> v) { return constant(Tensor::vector(std::move(v))); }

  /// Registers a named parameter; registering a name twice returns the
  /// original node.
  Var param(const std::string& name, const Tensor& t) {
    if (auto it = params_.find(name); it != params_.end()) {
      if (nodes_[it->second.id].source != &t) {
        throw DomainError("param: name '" + name + "' already bound to another tensor");
      }
      return it->second;
    }
    Node n{Op::parameter};
    n.shape = t.shape();
    n.source = &t;
    n.name = name;
    Var v = push(std::move(n));
    params_.emplace(name, v);
    param_order_.push_back(v);
    return v;
  }
  // The tape keeps a pointer to the tensor; temporaries would dangle.
  Var param(const std::string& name, Tensor&& t) = delete;

  Var matvec(Var w, Var x) {
    const auto& ws = shape(w);
    if (ws.size() != 2 || shape(x).size() != 1 || ws[1] != shape(x)[0]) {
      throw DimensionError("matvec: W " + Tensor::format_shape(ws) + " and x " +
                           Tensor::format_shape(shape(x)) + " do not conform");
    }
    Node n{Op::matvec};
    n.shape = {ws[0]};
    n.value.resize(ws[0]);
    kernels::matvec(value(w), ws[0], ws[1], value(x), n.value);
    n.a = w.id;
    n.b = x.id;
    return push(std::move(n));
  }

  Var affine(Var w, Var x, Var b) {
    const auto& ws = shape(w);
    if (ws.size() != 2 || shape(x).size() != 1 || shape(b).size() != 1 ||
        ws[1] != shape(x)[0] || ws[0] != shape(b)[0]) {
      throw DimensionError("affine: W " + Tensor::format_shape(ws) + ", x " +
                           Tensor::format_shape(shape(x)) + ", b " +
                           Tensor::format_shape(shape(b)) + " do not conform");
    }
    Node n{Op::affine};
    n.shape = {ws[0]};
    n.value.resize(ws[0]);
    kernels::matvec(value(w), ws[0], ws[1], value(x), n.value);
    auto bv = value(b);
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += bv[i];
    n.a = w.id;
    n.b = x.id;
    n.c = b.id;
    return push(std::move(n));
  }

  Var add(Var a, Var b) {
    same_shape(a, b, "add");
    Node n{Op::add};
    n.shape = shape(a);
    auto av = value(a), bv = value(b);
    n.value.resize(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] + bv[i];
    n.a = a.id;
    n.b = b.id;
    return push(std::move(n));
  }

  /// Left-to-right sum of equally shaped nodes.
  Var add_n(std::span<const Var> xs) {
    if (xs.empty()) throw DomainError("add_n: no operands");
    Node n{Op::add_n};
    n.shape = shape(xs[0]);
    n.value.assign(value(xs[0]).begin(), value(xs[0]).end());
    n.inputs.push_back(xs[0].id);
    for (std::size_t k = 1; k < xs.size(); ++k) {
      same_shape(xs[0], xs[k], "add_n");
      auto v = value(xs[k]);
      for (std::size_t i = 0; i < v.size(); ++i) n.value[i] += v[i];
      n.inputs.push_back(xs[k].id);
    }
    return push(std::move(n));
  }

  /// Elementwise product.
  Var mul(Var a, Var b) {
    same_shape(a, b, "mul");
    Node n{Op::mul};
    n.shape = shape(a);
    auto av = value(a), bv = value(b);
    n.value.resize(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] * bv[i];
    n.a = a.id;
    n.b = b.id;
    return push(std::move(n));
  }

  Var scale(Var a, double factor) {
    Node n{Op::scale};
    n.shape = shape(a);
    auto av = value(a);
    n.value.resize(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = av[i] * factor;
    n.a = a.id;
    n.scalar = factor;
    return push(std::move(n));
  }

  Var sigmoid(Var a) {
    Node n{Op::sigmoid};
    n.shape = shape(a);
    auto av = value(a);
    n.value.resize(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = kernels::sigmoid(av[i]);
    n.a = a.id;
    return push(std::move(n));
  }

  Var tanh(Var a) {
    Node n{Op::tanh};
    n.shape = shape(a);
    auto av = value(a);
    n.value.resize(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = std::tanh(av[i]);
    n.a = a.id;
    return push(std::move(n));
  }

  /// Row r of a matrix node, as a vector.
  Var row(Var table, std::size_t r) {
    const auto& ts = shape(table);
    if (ts.size() != 2) throw DimensionError("row: operand is not a matrix");
    if (r >= ts[0]) {
      throw RangeError("row: index " + std::to_string(r) + " out of " +
                       std::to_string(ts[0]) + " rows");
    }
    Node n{Op::row};
    n.shape = {ts[1]};
    auto tv = value(table).subspan(r * ts[1], ts[1]);
    n.value.assign(tv.begin(), tv.end());
    n.a = table.id;
    n.index = r;
    return push(std::move(n));
  }

  /// Cosine similarity; 0 with zero gradient when either norm is below
  /// kCosineNormGuard.
  Var cosine(Var a, Var b) {
    if (shape(a).size() != 1 || shape(a) != shape(b)) {
      throw DimensionError("cosine: a " + Tensor::format_shape(shape(a)) + " and b " +
                           Tensor::format_shape(shape(b)) + " differ");
    }
    Node n{Op::cosine};
    n.value = {kernels::cosine(value(a), value(b))};
    n.a = a.id;
    n.b = b.id;
    return push(std::move(n));
  }

  Var softmax(Var a) {
    if (shape(a).size() != 1) throw DimensionError("softmax: operand is not a vector");
    Node n{Op::softmax};
    n.shape = shape(a);
    n.value = kernels::softmax(value(a));
    n.a = a.id;
    return push(std::move(n));
  }

  /// KL(p || p_hat) for a fixed target p.
  Var kl_divergence(std::span<const double> p, Var p_hat) {
    Node n{Op::kl};
    n.value = {kernels::kl_divergence(p, value(p_hat))};
    n.aux.assign(p.begin(), p.end());
    n.a = p_hat.id;
    return push(std::move(n));
  }

  /// Packs scalar nodes into a vector.
  Var stack(std::span<const Var> scalars) {
    if (scalars.empty()) throw DomainError("stack: no operands");
    Node n{Op::stack};
    n.shape = {scalars.size()};
    for (Var s : scalars) {
      if (value(s).size() != 1) throw DimensionError("stack: operand is not a scalar");
      n.value.push_back(value(s)[0]);
      n.inputs.push_back(s.id);
    }
    return push(std::move(n));
  }

  /// sum_t weights[t] * vectors[t].
  Var weighted_sum(Var weights, std::span<const Var> vectors) {
    if (vectors.empty()) throw DomainError("weighted_sum: no vectors");
    if (shape(weights).size() != 1 || shape(weights)[0] != vectors.size()) {
      throw DimensionError("weighted_sum: " + std::to_string(vectors.size()) +
                           " vectors but weights " + Tensor::format_shape(shape(weights)));
    }
    Node n{Op::weighted_sum};
    n.shape = shape(vectors[0]);
    n.value.assign(n.shape.empty() ? 1 : n.shape[0], 0.0);
    auto w = value(weights);
    n.a = weights.id;
    for (std::size_t t = 0; t < vectors.size(); ++t) {
      same_shape(vectors[0], vectors[t], "weighted_sum");
      auto v = value(vectors[t]);
      for (std::size_t i = 0; i < v.size(); ++i) n.value[i] += w[t] * v[i];
      n.inputs.push_back(vectors[t].id);
    }
    return push(std::move(n));
  }

  /// Sum of all elements, as a scalar.
  Var sum(Var a) {
    Node n{Op::sum};
    auto av = value(a);
    n.value = {std::accumulate(av.begin(), av.end(), 0.0)};
    n.a = a.id;
    return push(std::move(n));
  }

  std::span<const double> value(Var v) const {
    const Node& n = node(v);
    if (n.source) return n.source->values();
    return n.value;
  }

  const std::vector<std::size_t>& shape(Var v) const { return node(v).shape; }

  Tensor tensor(Var v) const {
    auto vals = value(v);
    return Tensor(shape(v), std::vector<double>(vals.begin(), vals.end()));
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse pass from a scalar loss. Returns gradients for every registered
  /// parameter, zero-filled where the loss does not depend on it.
  Gradients backward(Var loss) {
    if (value(loss).size() != 1) {
      throw DomainError("backward: loss has shape " + Tensor::format_shape(shape(loss)) +
                        ", expected a scalar");
    }
    grads_.assign(nodes_.size(), {});
    grads_[loss.id] = {1.0};
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      if (grads_[id].empty()) continue;
      propagate(static_cast<std::uint32_t>(id));
    }
    Gradients out;
    for (Var p : param_order_) {
      const Node& n = nodes_[p.id];
      if (grads_[p.id].empty()) {
        out.emplace(n.name, Tensor::zeros(n.shape));
      } else {
        out.emplace(n.name, Tensor(n.shape, grads_[p.id]));
      }
    }
    return out;
  }

  /// Gradient of the last backward() loss with respect to any node (empty if
  /// the node did not receive one).
  std::span<const double> grad(Var v) const {
    if (v.id >= grads_.size()) return {};
    return grads_[v.id];
  }

 private:
  enum class Op : std::uint8_t {
    constant,
    parameter,
    matvec,
    affine,
    add,
    add_n,
    mul,
    scale,
    sigmoid,
    tanh,
    row,
    cosine,
    softmax,
    kl,
    stack,
    weighted_sum,
    sum,
  };

  struct Node {
    explicit Node(Op o) : op(o) {}
    Op op;
    std::vector<std::size_t> shape;
    std::vector<double> value;
    const Tensor* source = nullptr;
    std::uint32_t a = Var::kNone;
    std::uint32_t b = Var::kNone;
    std::uint32_t c = Var::kNone;
    std::vector<std::uint32_t> inputs;
    double scalar = 0.0;
    std::size_t index = 0;
    std::vector<double> aux;
    std::string name;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw DomainError("tape: invalid variable");
    return nodes_[v.id];
  }

  void same_shape(Var a, Var b, const char* op) const {
    if (shape(a) != shape(b)) {
      throw DimensionError(std::string(op) + ": operands " + Tensor::format_shape(shape(a)) +
                           " and " + Tensor::format_shape(shape(b)) + " differ");
    }
  }

  std::vector<double>& grad_slot(std::uint32_t id) {
    auto& g = grads_[id];
    if (g.empty()) {
      const Node& n = nodes_[id];
      g.assign(n.source ? n.source->size() : n.value.size(), 0.0);
    }
    return g;
  }

  std::span<const double> value_of(std::uint32_t id) const { return value(Var{id}); }

  void propagate(std::uint32_t id) {
    const Node& n = nodes_[id];
    // Inputs always precede their consumer, so grad_slot() never touches g.
    const std::vector<double>& g = grads_[id];
    switch (n.op) {
      case Op::constant:
      case Op::parameter:
        break;
      case Op::matvec:
      case Op::affine: {
        const auto& ws = nodes_[n.a].shape;
        const std::size_t rows = ws[0], cols = ws[1];
        auto w = value_of(n.a);
        auto x = value_of(n.b);
        if (needs_grad(n.a)) {
          auto& gw = grad_slot(n.a);
          for (std::size_t r = 0; r < rows; ++r) {
            if (g[r] == 0.0) continue;
            double* row = gw.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) row[c] += g[r] * x[c];
          }
        }
        if (needs_grad(n.b)) {
          auto& gx = grad_slot(n.b);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* wr = w.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) gx[c] += g[r] * wr[c];
          }
        }
        if (n.op == Op::affine && needs_grad(n.c)) {
          auto& gb = grad_slot(n.c);
          for (std::size_t r = 0; r < rows; ++r) gb[r] += g[r];
        }
        break;
      }
      case Op::add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::add_n:
        for (auto in : n.inputs) accumulate(in, g);
        break;
      case Op::mul: {
        auto av = value_of(n.a);
        auto bv = value_of(n.b);
        if (needs_grad(n.a)) {
          auto& ga = grad_slot(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (needs_grad(n.b)) {
          auto& gb = grad_slot(n.b);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::scale: {
        auto& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
        break;
      }
      case Op::sigmoid: {
        auto& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          ga[i] += g[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::tanh: {
        auto& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          ga[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::row: {
        if (!needs_grad(n.a)) break;
        auto& gt = grad_slot(n.a);
        const std::size_t cols = n.shape[0];
        for (std::size_t i = 0; i < cols; ++i) gt[n.index * cols + i] += g[i];
        break;
      }
      case Op::cosine: {
        auto av = value_of(n.a);
        auto bv = value_of(n.b);
        const double na = kernels::norm(av);
        const double nb = kernels::norm(bv);
        if (na < kCosineNormGuard || nb < kCosineNormGuard) break;
        const double cs = n.value[0];
        const double inv = 1.0 / (na * nb);
        if (needs_grad(n.a)) {
          auto& ga = grad_slot(n.a);
          for (std::size_t i = 0; i < av.size(); ++i)
            ga[i] += g[0] * (bv[i] * inv - cs * av[i] / (na * na));
        }
        if (needs_grad(n.b)) {
          auto& gb = grad_slot(n.b);
          for (std::size_t i = 0; i < bv.size(); ++i)
            gb[i] += g[0] * (av[i] * inv - cs * bv[i] / (nb * nb));
        }
        break;
      }
      case Op::softmax: {
        const double gy = kernels::dot(g, n.value);
        auto& ga = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.value[i] * (g[i] - gy);
        break;
      }
      case Op::kl: {
        auto q = value_of(n.a);
        auto& gq = grad_slot(n.a);
        for (std::size_t i = 0; i < q.size(); ++i) {
          if (n.aux[i] != 0.0) gq[i] -= g[0] * n.aux[i] / q[i];
        }
        break;
      }
      case Op::stack:
        for (std::size_t t = 0; t < n.inputs.size(); ++t) {
          auto& gs = grad_slot(n.inputs[t]);
          gs[0] += g[t];
        }
        break;
      case Op::weighted_sum: {
        auto w = value_of(n.a);
        std::vector<double>* gw = needs_grad(n.a) ? &grad_slot(n.a) : nullptr;
        for (std::size_t t = 0; t < n.inputs.size(); ++t) {
          auto v = value_of(n.inputs[t]);
          if (gw) (*gw)[t] += kernels::dot(g, v);
          if (needs_grad(n.inputs[t])) {
            auto& gv = grad_slot(n.inputs[t]);
            for (std::size_t i = 0; i < g.size(); ++i) gv[i] += w[t] * g[i];
          }
        }
        break;
      }
      case Op::sum: {
        auto& ga = grad_slot(n.a);
        for (auto& v : ga) v += g[0];
        break;
      }
    }
  }

  // Constants never need gradients; skipping them saves work.
  bool needs_grad(std::uint32_t id) const { return nodes_[id].op != Op::constant; }

  void accumulate(std::uint32_t id, const std::vector<double>& g) {
    if (!needs_grad(id)) return;
    auto& dst = grad_slot(id);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::unordered_map<std::string, Var> params_;
  std::vector<Var> param_order_;
};

inline Gradients backward(Tape& tape, Var loss) { return tape.backward(loss); }

}  // namespace ham
