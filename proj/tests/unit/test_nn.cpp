#include <doctest.h>

#include <cmath>

#include "morphome/nn/graph.hpp"
#include "morphome/nn/loss.hpp"
#include "morphome/nn/op_checks.hpp"
#include "morphome/nn/optim.hpp"

using namespace morphome;
using namespace morphome::nn;

TEST_CASE("gradient of sum is all ones") {
  Parameter<double> x("x", Matrix<double>::Random(3, 2));
  Graph<double> g;
  g.backward(sum(g.param(x)));
  CHECK(x.grad.isApprox(Matrix<double>::Ones(3, 2)));
}

TEST_CASE("finite-difference check over every op") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& c : check_all_ops(seed)) {
      CAPTURE(c.op);
      CAPTURE(c.result.worst_parameter);
      CHECK(c.result.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(5);
  Graph<double> g(false);
  auto y = softmax_rows(g.constant(random_matrix(rng, 7, 9, 4.0)));
  for (Eigen::Index r = 0; r < 7; ++r) CHECK(std::abs(y.value().row(r).sum() - 1.0) < 1e-6);
  Graph<float> gf(false);
  auto yf = softmax_rows(gf.constant(Matrix<float>::Constant(2, 3, 50.f)));
  CHECK(std::abs(yf.value().row(0).sum() - 1.f) < 1e-6f);
}

TEST_CASE("non-finite values and shape mismatches raise") {
  Graph<double> g;
  Matrix<double> bad = Matrix<double>::Zero(1, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(g.constant(bad), NumericalError);
  auto a = g.constant(Matrix<double>::Zero(2, 3));
  auto b = g.constant(Matrix<double>::Zero(2, 3));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(g.backward(a), ShapeError);
  AttentionLayout all_masked;
  all_masked.segments = {{0, 2, 0, 2}};
  all_masked.key_valid = {0, 0};
  CHECK_THROWS_AS(attention(b, b, b, all_masked), NumericalError);
}

TEST_CASE("label-smoothed NLL") {
  SUBCASE("uniform logits give ln V for any smoothing") {
    for (double eps : {0.0, 0.1, 0.5}) {
      Graph<double> g;
      auto loss = label_smoothed_nll(g.constant(Matrix<double>::Constant(3, 7, 0.3)), {1, 6, 2}, eps, 0);
      CHECK(std::abs(loss.value()(0, 0) - std::log(7.0)) < 1e-12);
    }
  }
  SUBCASE("smoothing 0 is plain cross-entropy") {
    Matrix<double> logits(1, 3);
    logits << 1.0, 2.0, 0.5;
    Graph<double> g;
    auto loss = label_smoothed_nll(g.constant(logits), {1}, 0.0, -1);
    double ce = -(2.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5)));
    CHECK(loss.value()(0, 0) == doctest::Approx(ce).epsilon(1e-12));
  }
  SUBCASE("hand-computed three-class example") {
    // logits (2, 1, 0), target 0, eps 0.1:
    //   Z = e^2 + e + 1 = 11.107337927389695
    //   -log p = (ln Z - 2, ln Z - 1, ln Z) = (0.40760596, 1.40760596, 2.40760596)
    //   loss = 0.9 * 0.40760596 + 0.1 * mean(...) = 0.36684537 + 0.14076060 = 0.50760596
    Matrix<double> logits(1, 3);
    logits << 2.0, 1.0, 0.0;
    Graph<double> g;
    auto loss = label_smoothed_nll(g.constant(logits), {0}, 0.1, -1);
    CHECK(loss.value()(0, 0) == doctest::Approx(0.5076059644).epsilon(1e-9));
  }
  SUBCASE("pad rows are excluded from the mean") {
    Matrix<double> logits(2, 3);
    logits << 2.0, 1.0, 0.0, 9.0, -3.0, 4.0;
    Graph<double> g;
    auto loss = label_smoothed_nll(g.constant(logits), {0, 2}, 0.1, 2);
    CHECK(loss.value()(0, 0) == doctest::Approx(0.5076059644).epsilon(1e-9));
  }
  SUBCASE("target out of vocabulary") {
    Graph<double> g;
    CHECK_THROWS_AS(label_smoothed_nll(g.constant(Matrix<double>::Zero(1, 3)), {3}, 0.1, 0), std::out_of_range);
  }
}

TEST_CASE("global-norm clipping") {
  Rng rng(9);
  Parameter<double> a("a", Matrix<double>::Zero(2, 3)), b("b", Matrix<double>::Zero(4, 1));
  std::vector<Parameter<double>*> ps = {&a, &b};
  auto set_norm = [&](double n) {
    a.grad = random_matrix(rng, 2, 3);
    b.grad = random_matrix(rng, 4, 1);
    double cur = global_grad_norm(ps);
    a.grad *= n / cur;
    b.grad *= n / cur;
  };
  set_norm(0.5);
  auto before_a = a.grad;
  CHECK(clip_global_norm(ps, 1.0) == doctest::Approx(0.5));
  CHECK(a.grad == before_a);

  set_norm(4.0);
  Eigen::VectorXd pre(10);
  pre << Eigen::Map<Eigen::VectorXd>(a.grad.data(), 6), Eigen::Map<Eigen::VectorXd>(b.grad.data(), 4);
  auto a_pre = a.grad;
  CHECK(clip_global_norm(ps, 1.0) == doctest::Approx(4.0));
  CHECK(std::abs(global_grad_norm(ps) - 1.0) < 1e-6);
  CHECK(a.grad.isApprox(a_pre * 0.25));
  Eigen::VectorXd post(10);
  post << Eigen::Map<Eigen::VectorXd>(a.grad.data(), 6), Eigen::Map<Eigen::VectorXd>(b.grad.data(), 4);
  CHECK(std::abs(pre.dot(post) / (pre.norm() * post.norm()) - 1.0) < 1e-6);
  CHECK_THROWS_AS(clip_global_norm(ps, 0.0), std::invalid_argument);
}

TEST_CASE("Adam") {
  SUBCASE("zero gradients leave parameters unchanged") {
    Parameter<double> p("p", Matrix<double>::Constant(2, 2, 3.0));
    Adam<double> opt({&p});
    opt.step();
    CHECK(p.value == Matrix<double>::Constant(2, 2, 3.0));
    CHECK(opt.steps() == 1);
  }
  SUBCASE("first update is about -lr * sign(g)") {
    Parameter<double> p("p", Matrix<double>::Zero(1, 2));
    p.grad << 0.37, -12.0;
    Adam<double> opt({&p});
    opt.step();
    CHECK(p.value(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(p.value(0, 1) == doctest::Approx(1e-3).epsilon(1e-6));
  }
  SUBCASE("quadratic loss decreases monotonically after step 2") {
    Parameter<double> p("p", Matrix<double>(1, 2));
    p.value << 1.5, -2.0;
    AdamConfig cfg;
    cfg.lr = 0.1;
    Adam<double> opt({&p}, cfg);
    auto loss = [&] { return 0.5 * p.value(0, 0) * p.value(0, 0) + 2.0 * p.value(0, 1) * p.value(0, 1); };
    std::vector<double> losses = {loss()};
    for (int i = 0; i < 10; ++i) {
      p.grad << p.value(0, 0), 4.0 * p.value(0, 1);
      opt.step();
      losses.push_back(loss());
    }
    for (std::size_t i = 2; i + 1 < losses.size(); ++i) CHECK(losses[i + 1] < losses[i]);
  }
  SUBCASE("non-finite gradient aborts the update") {
    Parameter<double> p("p", Matrix<double>::Zero(1, 1));
    p.grad(0, 0) = INFINITY;
    Adam<double> opt({&p});
    CHECK_THROWS_AS(opt.step(), NumericalError);
    CHECK(p.value(0, 0) == 0.0);
    CHECK(opt.steps() == 0);
  }
}

TEST_CASE("inverse square-root schedule") {
  LrSchedule s;
  CHECK(s.at(1) == 1e-3);
  s.kind = LrScheduleKind::kInverseSqrt;
  s.warmup_updates = 100;
  CHECK(s.at(50) < s.at(99));
  CHECK(s.at(100) == doctest::Approx(1e-3));
  CHECK(s.at(400) == doctest::Approx(5e-4));
}
