#include "morphome/nn/op_checks.hpp"

#include "morphome/nn/loss.hpp"

namespace morphome::nn {

Matrix<double> random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * stddev;
  return m;
}

namespace {

using P = Parameter<double>;
using V = Var<double>;
using G = Graph<double>;

// Keeps every entry at least `margin` away from zero (relu kink).
Matrix<double> away_from_zero(Matrix<double> m, double margin = 0.05) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double& x = m.data()[i];
    if (std::abs(x) < margin) x = x < 0 ? -margin : margin;
  }
  return m;
}

}  // namespace

std::vector<OpCheck> check_all_ops(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<OpCheck> out;
  auto run = [&](const std::string& name, std::vector<P*> params, const std::function<V(G&)>& build) {
    out.push_back({name, gradient_check(params, build)});
  };

  {
    P a("a", random_matrix(rng, 3, 4)), b("b", random_matrix(rng, 4, 2));
    auto w = random_matrix(rng, 3, 2);
    run("matmul", {&a, &b}, [&](G& g) { return weighted_sum(matmul(g.param(a), g.param(b)), w); });
  }
  {
    P a("a", random_matrix(rng, 3, 4)), b("b", random_matrix(rng, 5, 4));
    auto w = random_matrix(rng, 3, 5);
    run("matmul_nt", {&a, &b}, [&](G& g) { return weighted_sum(matmul_nt(g.param(a), g.param(b)), w); });
  }
  {
    P a("a", random_matrix(rng, 2, 3)), b("b", random_matrix(rng, 2, 3)), bias("bias", random_matrix(rng, 1, 3));
    auto w = random_matrix(rng, 2, 3);
    run("add/add_bias/scale", {&a, &b, &bias}, [&](G& g) {
      return weighted_sum(scale(add_bias(g.param(a) + g.param(b), g.param(bias)), 0.7), w);
    });
  }
  {
    P x("x", away_from_zero(random_matrix(rng, 3, 4)));
    auto w = random_matrix(rng, 3, 4);
    run("relu", {&x}, [&](G& g) { return weighted_sum(relu(g.param(x)), w); });
  }
  {
    P x("x", random_matrix(rng, 3, 4, 1.5));
    auto w = random_matrix(rng, 3, 4);
    run("gelu", {&x}, [&](G& g) { return weighted_sum(gelu(g.param(x)), w); });
  }
  {
    P x("x", random_matrix(rng, 3, 5)), gain("gain", random_matrix(rng, 1, 5)), bias("bias", random_matrix(rng, 1, 5));
    auto w = random_matrix(rng, 3, 5);
    run("layer_norm", {&x, &gain, &bias},
        [&](G& g) { return weighted_sum(layer_norm(g.param(x), g.param(gain), g.param(bias)), w); });
  }
  {
    P x("x", random_matrix(rng, 3, 4));
    auto w = random_matrix(rng, 3, 4);
    run("softmax", {&x}, [&](G& g) { return weighted_sum(softmax_rows(g.param(x)), w); });
  }
  {
    P table("table", random_matrix(rng, 6, 3));
    std::vector<int> ids = {4, 0, 4, 2, 5};
    auto w = random_matrix(rng, 5, 3);
    run("embedding", {&table}, [&](G& g) { return weighted_sum(embedding(g.param(table), ids), w); });
  }
  {
    P x("x", random_matrix(rng, 4, 5));
    auto w = random_matrix(rng, 4, 5);
    run("dropout", {&x}, [&](G& g) {
      Rng mask_rng(11);
      return weighted_sum(dropout(g.param(x), 0.3, mask_rng), w);
    });
  }
  {
    P x("x", random_matrix(rng, 2, 3));
    run("sum", {&x}, [&](G& g) { return sum(g.param(x)); });
  }
  {
    // Two packed segments, two heads, a padded key, cross attention.
    P q("q", random_matrix(rng, 5, 4)), k("k", random_matrix(rng, 6, 4)), v("v", random_matrix(rng, 6, 4));
    AttentionLayout layout;
    layout.heads = 2;
    layout.segments = {{0, 2, 0, 4}, {2, 3, 4, 2}};
    layout.key_valid = {1, 1, 0, 1, 1, 1};
    auto w = random_matrix(rng, 5, 4);
    run("attention", {&q, &k, &v},
        [&](G& g) { return weighted_sum(attention(g.param(q), g.param(k), g.param(v), layout), w); });
  }
  {
    P x("x", random_matrix(rng, 5, 4));
    AttentionLayout layout;
    layout.heads = 2;
    layout.causal = true;
    layout.segments = {{0, 3, 0, 3}, {3, 2, 3, 2}};
    auto w = random_matrix(rng, 5, 4);
    run("attention_causal_self", {&x}, [&](G& g) {
      V h = g.param(x);
      return weighted_sum(attention(h, h, h, layout), w);
    });
  }
  {
    P logits("logits", random_matrix(rng, 4, 5));
    std::vector<int> targets = {3, 0, 1, 4};  // row 1 is pad
    run("label_smoothed_nll", {&logits}, [&](G& g) { return label_smoothed_nll(g.param(logits), targets, 0.1, 0); });
  }
  {
    // Small composite: embedding -> linear -> gelu -> layer_norm -> loss.
    P emb("emb", random_matrix(rng, 5, 4, 0.5)), w1("w1", random_matrix(rng, 4, 4, 0.5)), b1("b1", random_matrix(rng, 1, 4)),
        gain("gain", random_matrix(rng, 1, 4)), out_w("out_w", random_matrix(rng, 4, 5, 0.5));
    std::vector<int> ids = {1, 3, 2}, targets = {2, 4, 1};
    run("composite", {&emb, &w1, &b1, &gain, &out_w}, [&](G& g) {
      V zeros = g.constant(Matrix<double>::Zero(1, 4));
      V h = gelu(add_bias(matmul(embedding(g.param(emb), ids), g.param(w1)), g.param(b1)));
      h = layer_norm(h, g.param(gain), zeros);
      return label_smoothed_nll(matmul(h, g.param(out_w)), targets, 0.1, 0);
    });
  }
  return out;
}

}  // namespace morphome::nn
