#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "morphome/rng.hpp"

namespace morphome::nn {

// Rows are positions (tokens), columns are features.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN or Inf anywhere makes the (vectorized) sum non-finite; only then is
// the exact element-wise test needed, to rule out overflow of the sum itself.
template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return std::isfinite(m.sum()) || m.allFinite();
}

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter(std::string n, Matrix<Scalar> v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix<Scalar>::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(); }
};

template <typename Scalar>
class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Graph<Scalar>* graph, int id) : graph_(graph), id_(id) {}

  const Matrix<Scalar>& value() const { return graph_->value(id_); }
  const Matrix<Scalar>& grad() const { return graph_->grad(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Graph<Scalar>& graph() const { return *graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph<Scalar>* graph_ = nullptr;
  int id_ = -1;
};

// Tape of operations for reverse-mode differentiation. Every op checks its
// output for NaN/Inf and throws NumericalError naming the op. With
// recording disabled (inference) no backward closures are kept.
template <typename Scalar>
class Graph {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Graph&, int self)>;

  explicit Graph(bool recording = true) : recording_(recording) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }

  Var<Scalar> constant(Mat value) { return push(std::move(value), "constant", nullptr); }

  // Refers to the parameter's storage without copying; the parameter must
  // not change while the graph is in use.
  Var<Scalar> param(Parameter<Scalar>& p) {
    Parameter<Scalar>* target = &p;
    Backward back;
    if (recording_) back = [target](Graph& g, int self) { target->grad += g.grad(self); };
    nodes_.push_back(Node{Mat(), &p.value, Mat(), std::move(back)});
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  Var<Scalar> push(Mat value, std::string_view op, Backward backward) {
    if (!all_finite(value)) throw NumericalError("non-finite value produced by " + std::string(op));
    nodes_.push_back(Node{std::move(value), nullptr, Mat(), recording_ ? std::move(backward) : Backward()});
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Mat& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ref ? *n.ref : n.value;
  }
  const Mat& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Mat& slot = nodes_[static_cast<std::size_t>(id)].grad;
    if (slot.size() == 0) slot = g;
    else slot += g;
  }

  // Seeds d(loss)/d(loss) = 1 and runs the tape backwards. Parameter
  // gradients accumulate into Parameter::grad.
  void backward(Var<Scalar> loss) {
    if (!recording_) throw std::logic_error("backward on a non-recording graph");
    if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward needs a 1x1 loss");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[static_cast<std::size_t>(loss.id())].grad = Mat::Ones(1, 1);
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.size() == 0 || !n.backward) continue;
      if (!all_finite(n.grad)) throw NumericalError("non-finite gradient during backward");
      n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* ref;
    Mat grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool recording_;
};

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  detail::require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  int ia = a.id(), ib = b.id();
  return a.graph().push(a.value() * b.value(), "matmul", [ia, ib](Graph<Scalar>& g, int self) {
    g.accumulate(ia, g.grad(self) * g.value(ib).transpose());
    g.accumulate(ib, g.value(ia).transpose() * g.grad(self));
  });
}

// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(Var<Scalar> a, Var<Scalar> b) {
  detail::require(a.cols() == b.cols(), "matmul_nt: feature dimensions differ");
  int ia = a.id(), ib = b.id();
  return a.graph().push(a.value() * b.value().transpose(), "matmul_nt", [ia, ib](Graph<Scalar>& g, int self) {
    g.accumulate(ia, g.grad(self) * g.value(ib));
    g.accumulate(ib, g.grad(self).transpose() * g.value(ia));
  });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shapes differ");
  int ia = a.id(), ib = b.id();
  return a.graph().push(a.value() + b.value(), "add", [ia, ib](Graph<Scalar>& g, int self) {
    g.accumulate(ia, g.grad(self));
    g.accumulate(ib, g.grad(self));
  });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  return add(a, b);
}

// x (n x m) plus a 1 x m row broadcast over rows.
template <typename Scalar>
Var<Scalar> add_bias(Var<Scalar> x, Var<Scalar> bias) {
  detail::require(bias.rows() == 1 && bias.cols() == x.cols(), "add_bias: bias must be 1 x cols");
  int ix = x.id(), ib = bias.id();
  Matrix<Scalar> out = x.value().rowwise() + bias.value().row(0);
  return x.graph().push(std::move(out), "add_bias", [ix, ib](Graph<Scalar>& g, int self) {
    g.accumulate(ix, g.grad(self));
    g.accumulate(ib, g.grad(self).colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> x, Scalar s) {
  int ix = x.id();
  return x.graph().push(x.value() * s, "scale", [ix, s](Graph<Scalar>& g, int self) { g.accumulate(ix, g.grad(self) * s); });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x) {
  int ix = x.id();
  return x.graph().push(x.value().cwiseMax(Scalar(0)), "relu", [ix](Graph<Scalar>& g, int self) {
    g.accumulate(ix, (g.value(ix).array() > Scalar(0)).select(g.grad(self).array(), Scalar(0)).matrix());
  });
}

// Exact (erf) GELU.
template <typename Scalar>
Var<Scalar> gelu(Var<Scalar> x) {
  int ix = x.id();
  const Scalar inv_sqrt2 = Scalar(0.70710678118654752440);
  Matrix<Scalar> out = x.value().unaryExpr([inv_sqrt2](Scalar v) { return Scalar(0.5) * v * (Scalar(1) + std::erf(v * inv_sqrt2)); });
  return x.graph().push(std::move(out), "gelu", [ix, inv_sqrt2](Graph<Scalar>& g, int self) {
    const Scalar inv_sqrt2pi = Scalar(0.39894228040143267794);
    Matrix<Scalar> d = g.value(ix).unaryExpr([&](Scalar v) {
      return Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(Scalar(-0.5) * v * v);
    });
    g.accumulate(ix, g.grad(self).cwiseProduct(d));
  });
}

// Row-wise layer normalization with learned gain and bias (both 1 x m).
template <typename Scalar>
Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gain, Var<Scalar> bias, Scalar eps = Scalar(1e-5)) {
  detail::require(gain.cols() == x.cols() && bias.cols() == x.cols() && gain.rows() == 1 && bias.rows() == 1,
                  "layer_norm: gain/bias must be 1 x cols");
  const auto& xv = x.value();
  const Eigen::Index n = xv.rows(), m = xv.cols();
  auto normalized = std::make_shared<Matrix<Scalar>>(n, m);
  auto inv_std = std::make_shared<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    Scalar mean = xv.row(r).mean();
    Scalar var = (xv.row(r).array() - mean).square().mean();
    Scalar is = Scalar(1) / std::sqrt(var + eps);
    (*inv_std)(r) = is;
    normalized->row(r) = (xv.row(r).array() - mean) * is;
  }
  Matrix<Scalar> out = (normalized->array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  int ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.graph().push(std::move(out), "layer_norm", [ix, ig, ib, normalized, inv_std](Graph<Scalar>& g, int self) {
    const auto& gy = g.grad(self);
    const auto& xhat = *normalized;
    g.accumulate(ig, gy.cwiseProduct(xhat).colwise().sum());
    g.accumulate(ib, gy.colwise().sum());
    Matrix<Scalar> dxhat = gy.array().rowwise() * g.value(ig).row(0).array();
    const Scalar m = static_cast<Scalar>(xhat.cols());
    Matrix<Scalar> dx(xhat.rows(), xhat.cols());
    for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
      Scalar mean_d = dxhat.row(r).sum() / m;
      Scalar mean_dx = dxhat.row(r).dot(xhat.row(r)) / m;
      dx.row(r) = (*inv_std)(r) * (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
    }
    g.accumulate(ix, dx);
  });
}

template <typename Scalar>
Matrix<Scalar> softmax_rows_value(const Matrix<Scalar>& x) {
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Scalar mx = x.row(r).maxCoeff();
    // Masked (-inf) entries are set to exactly zero; vectorized exp may not.
    y.row(r) = (x.row(r).array() == -std::numeric_limits<Scalar>::infinity()).select(Scalar(0), (x.row(r).array() - mx).exp());
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

template <typename Scalar>
Var<Scalar> softmax_rows(Var<Scalar> x) {
  int ix = x.id();
  return x.graph().push(softmax_rows_value<Scalar>(x.value()), "softmax", [ix](Graph<Scalar>& g, int self) {
    const auto& y = g.value(self);
    const auto& gy = g.grad(self);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dots = gy.cwiseProduct(y).rowwise().sum();
    g.accumulate(ix, y.cwiseProduct(gy.colwise() - dots));
  });
}

// Rows of `table` selected by ids; gradients scatter-add back.
template <typename Scalar>
Var<Scalar> embedding(Var<Scalar> table, const std::vector<int>& ids) {
  const auto& t = table.value();
  Matrix<Scalar> out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) throw std::out_of_range("embedding: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  int it = table.id();
  auto rows = std::make_shared<std::vector<int>>(ids);
  return table.graph().push(std::move(out), "embedding", [it, rows](Graph<Scalar>& g, int self) {
    Matrix<Scalar> dt = Matrix<Scalar>::Zero(g.value(it).rows(), g.value(it).cols());
    const auto& gy = g.grad(self);
    for (std::size_t i = 0; i < rows->size(); ++i) dt.row((*rows)[i]) += gy.row(static_cast<Eigen::Index>(i));
    g.accumulate(it, dt);
  });
}

// Inverted dropout; identity when p == 0.
template <typename Scalar>
Var<Scalar> dropout(Var<Scalar> x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  auto mask = std::make_shared<Matrix<Scalar>>(x.rows(), x.cols());
  const Scalar keep = Scalar(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask->size(); ++i) mask->data()[i] = rng.uniform() < p ? Scalar(0) : keep;
  int ix = x.id();
  return x.graph().push(x.value().cwiseProduct(*mask), "dropout",
                        [ix, mask](Graph<Scalar>& g, int self) { g.accumulate(ix, g.grad(self).cwiseProduct(*mask)); });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x) {
  int ix = x.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  return x.graph().push(std::move(out), "sum", [ix](Graph<Scalar>& g, int self) {
    g.accumulate(ix, Matrix<Scalar>::Constant(g.value(ix).rows(), g.value(ix).cols(), g.grad(self)(0, 0)));
  });
}

// sum(x .* weights) for a constant weight matrix; used to probe gradients.
template <typename Scalar>
Var<Scalar> weighted_sum(Var<Scalar> x, const Matrix<Scalar>& weights) {
  detail::require(weights.rows() == x.rows() && weights.cols() == x.cols(), "weighted_sum: shapes differ");
  int ix = x.id();
  auto w = std::make_shared<Matrix<Scalar>>(weights);
  Matrix<Scalar> out(1, 1);
  out(0, 0) = x.value().cwiseProduct(weights).sum();
  return x.graph().push(std::move(out), "weighted_sum",
                        [ix, w](Graph<Scalar>& g, int self) { g.accumulate(ix, *w * g.grad(self)(0, 0)); });
}

// One packed sequence pair inside a batch: query rows [q_begin, q_begin+q_len)
// attend to key rows [k_begin, k_begin+k_len).
struct AttentionSegment {
  Eigen::Index q_begin = 0;
  Eigen::Index q_len = 0;
  Eigen::Index k_begin = 0;
  Eigen::Index k_len = 0;
};

struct AttentionLayout {
  std::vector<AttentionSegment> segments;
  std::vector<unsigned char> key_valid;  // per key row; empty means all valid
  bool causal = false;                   // query i sees keys 0..i of its segment
  int heads = 1;
};

// Multi-head scaled dot-product attention over already-projected q, k, v
// (rows x model_dim, heads split along columns). If `capture` is given it
// receives the attention probabilities, one matrix per (segment, head).
template <typename Scalar>
Var<Scalar> attention(Var<Scalar> q, Var<Scalar> k, Var<Scalar> v, const AttentionLayout& layout,
                      std::vector<Matrix<Scalar>>* capture = nullptr) {
  const Eigen::Index dim = q.cols();
  detail::require(k.cols() == dim && v.cols() == dim && k.rows() == v.rows(), "attention: q/k/v shapes differ");
  detail::require(layout.heads > 0 && dim % layout.heads == 0, "attention: model dim not divisible by heads");
  detail::require(layout.key_valid.empty() || static_cast<Eigen::Index>(layout.key_valid.size()) == k.rows(),
                  "attention: key mask size differs from key rows");
  const Eigen::Index head_dim = dim / layout.heads;
  const Scalar scale_factor = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
  const Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();

  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();
  Matrix<Scalar> out = Matrix<Scalar>::Zero(qv.rows(), dim);
  auto probs = std::make_shared<std::vector<Matrix<Scalar>>>();
  probs->reserve(layout.segments.size() * static_cast<std::size_t>(layout.heads));

  for (const auto& seg : layout.segments) {
    detail::require(seg.q_begin + seg.q_len <= qv.rows() && seg.k_begin + seg.k_len <= kv.rows(),
                    "attention: segment out of range");
    detail::require(!layout.causal || seg.q_len == seg.k_len, "attention: causal segments must be square");
    for (int h = 0; h < layout.heads; ++h) {
      const Eigen::Index c = h * head_dim;
      Matrix<Scalar> scores = qv.block(seg.q_begin, c, seg.q_len, head_dim) *
                              kv.block(seg.k_begin, c, seg.k_len, head_dim).transpose() * scale_factor;
      for (Eigen::Index i = 0; i < seg.q_len; ++i) {
        for (Eigen::Index j = 0; j < seg.k_len; ++j) {
          bool masked = (!layout.key_valid.empty() && !layout.key_valid[static_cast<std::size_t>(seg.k_begin + j)]) ||
                        (layout.causal && j > i);
          if (masked) scores(i, j) = neg_inf;
        }
        if (scores.row(i).maxCoeff() == neg_inf) throw NumericalError("attention: query row has no visible key");
      }
      Matrix<Scalar> p = softmax_rows_value<Scalar>(scores);
      out.block(seg.q_begin, c, seg.q_len, head_dim).noalias() = p * vv.block(seg.k_begin, c, seg.k_len, head_dim);
      probs->push_back(std::move(p));
    }
  }
  if (capture) *capture = *probs;

  int iq = q.id(), ik = k.id(), iv = v.id();
  auto segments = std::make_shared<std::vector<AttentionSegment>>(layout.segments);
  const int heads = layout.heads;
  return q.graph().push(std::move(out), "attention",
                        [iq, ik, iv, probs, segments, heads, head_dim, scale_factor](Graph<Scalar>& g, int self) {
                          const auto& gy = g.grad(self);
                          const auto& qv = g.value(iq);
                          const auto& kv = g.value(ik);
                          const auto& vv = g.value(iv);
                          Matrix<Scalar> dq = Matrix<Scalar>::Zero(qv.rows(), qv.cols());
                          Matrix<Scalar> dk = Matrix<Scalar>::Zero(kv.rows(), kv.cols());
                          Matrix<Scalar> dv = Matrix<Scalar>::Zero(vv.rows(), vv.cols());
                          std::size_t idx = 0;
                          for (const auto& seg : *segments) {
                            for (int h = 0; h < heads; ++h, ++idx) {
                              const Eigen::Index c = h * head_dim;
                              const auto& p = (*probs)[idx];
                              auto go = gy.block(seg.q_begin, c, seg.q_len, head_dim);
                              dv.block(seg.k_begin, c, seg.k_len, head_dim).noalias() += p.transpose() * go;
                              Matrix<Scalar> dp = go * vv.block(seg.k_begin, c, seg.k_len, head_dim).transpose();
                              Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dots = dp.cwiseProduct(p).rowwise().sum();
                              Matrix<Scalar> ds = p.cwiseProduct(dp.colwise() - dots) * scale_factor;
                              dq.block(seg.q_begin, c, seg.q_len, head_dim).noalias() +=
                                  ds * kv.block(seg.k_begin, c, seg.k_len, head_dim);
                              dk.block(seg.k_begin, c, seg.k_len, head_dim).noalias() +=
                                  ds.transpose() * qv.block(seg.q_begin, c, seg.q_len, head_dim);
                            }
                          }
                          g.accumulate(iq, dq);
                          g.accumulate(ik, dk);
                          g.accumulate(iv, dv);
                        });
}

}  // namespace morphome::nn
