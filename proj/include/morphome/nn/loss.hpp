#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "morphome/nn/graph.hpp"

namespace morphome::nn {

// Row-wise log-softmax, numerically stable.
template <typename Scalar>
Matrix<Scalar> log_softmax_rows(const Matrix<Scalar>& x) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Scalar mx = x.row(r).maxCoeff();
    Scalar lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return out;
}

// (1 - eps) * NLL(target) + eps * mean over vocabulary of NLL(v), averaged over
// rows whose target is not pad_id. With no counted rows the loss is 0.
template <typename Scalar>
Var<Scalar> label_smoothed_nll(Var<Scalar> logits, const std::vector<int>& targets, double smoothing, int pad_id) {
  if (smoothing < 0.0 || smoothing >= 1.0) throw std::invalid_argument("label smoothing must be in [0, 1)");
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) throw ShapeError("label_smoothed_nll: one target per row");
  const Eigen::Index vocab = logits.cols();
  for (int t : targets)
    if (t != pad_id && (t < 0 || t >= vocab)) throw std::out_of_range("label_smoothed_nll: target id out of vocabulary");

  auto logp = std::make_shared<Matrix<Scalar>>(log_softmax_rows<Scalar>(logits.value()));
  const Scalar eps = static_cast<Scalar>(smoothing);
  Scalar total = 0;
  int counted = 0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] == pad_id) continue;
    const auto row = static_cast<Eigen::Index>(r);
    total += -(Scalar(1) - eps) * (*logp)(row, targets[r]) - eps * logp->row(row).mean();
    ++counted;
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = counted ? total / static_cast<Scalar>(counted) : Scalar(0);

  int il = logits.id();
  auto tg = std::make_shared<std::vector<int>>(targets);
  return logits.graph().push(std::move(out), "label_smoothed_nll", [il, tg, logp, eps, pad_id, counted, vocab](Graph<Scalar>& g, int self) {
    if (!counted) return;
    const Scalar upstream = g.grad(self)(0, 0) / static_cast<Scalar>(counted);
    Matrix<Scalar> d = Matrix<Scalar>::Zero(logp->rows(), vocab);
    for (std::size_t r = 0; r < tg->size(); ++r) {
      if ((*tg)[r] == pad_id) continue;
      const auto row = static_cast<Eigen::Index>(r);
      d.row(row) = logp->row(row).array().exp() - eps / static_cast<Scalar>(vocab);
      d(row, (*tg)[r]) -= Scalar(1) - eps;
    }
    g.accumulate(il, d * upstream);
  });
}

}  // namespace morphome::nn
