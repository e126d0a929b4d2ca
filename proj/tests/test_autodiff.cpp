#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "support/gradcheck.hpp"
#include "tkg/autodiff.hpp"

using namespace tkg::nn;
using tkg::testing::check_gradients;

namespace {
constexpr double kTol = 1e-7;
}

TEST_CASE("matmul add mul chain gradients") {
  ParameterStore store(1);
  Var a = store.add("a", 3, 4, Init::Normal, true, 0.7);
  Var b = store.add("b", 4, 2, Init::Normal, true, 0.7);
  Var c = store.add("c", 3, 2, Init::Normal, true, 0.7);
  auto builder = [&] { return sum_all(mul(add(matmul(a, b), c), c)); };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);
}

TEST_CASE("shared subgraph accumulates both paths") {
  ParameterStore store(2);
  Var a = store.add("a", 2, 2, Init::Normal, true, 0.5);
  auto builder = [&] {
    Var shared = relu(a);
    return sum_all(add(matmul(shared, transpose(shared)), shared));
  };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);
}

TEST_CASE("broadcast ops") {
  ParameterStore store(3);
  Var x = store.add("x", 4, 3, Init::Normal, true, 0.5);
  Var row = store.add("row", 1, 3, Init::Normal, true, 0.5);
  Var col = store.add("col", 4, 1, Init::Normal, true, 0.5);
  auto builder = [&] {
    return sum_all(add_colvec(mul_rowvec(add_rowvec(x, row), row), col));
  };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);
}

TEST_CASE("activations and reductions") {
  ParameterStore store(4);
  Var x = store.add("x", 3, 5, Init::Normal, true, 0.8);
  auto builder = [&] {
    Var h = relu(x);
    Var e = exp(scale(x, 0.3));
    Var sp = softplus(x);
    Var sg = sigmoid(x);
    return sum_all(add(add(h, e), mul(sp, sg)));
  };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);
}

TEST_CASE("softmax_rows values and gradient") {
  ParameterStore store(5);
  Var x = store.add("x", 3, 4, Init::Normal, true, 1.2);

  Var sm = softmax_rows(x);
  for (int r = 0; r < 3; ++r) {
    CHECK(sm.value().row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sm.value().row(r).minCoeff() >= 0.0);
  }

  auto mask = std::make_shared<Mat>(Mat::Ones(3, 4));
  (*mask)(0, 2) = 0.0;
  Var masked = softmax_rows(x, mask);
  CHECK(masked.value()(0, 2) == 0.0);
  CHECK(masked.value().row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));

  Var probe = Var::constant(Mat::Random(3, 4));
  auto builder = [&] { return sum_all(mul(softmax_rows(x, mask), probe)); };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);

  // A fully masked row is an empty distribution.
  auto dead = std::make_shared<Mat>(Mat::Zero(1, 3));
  Var empty_row = softmax_rows(Var::constant(Mat::Random(1, 3)), dead);
  CHECK(empty_row.value().cwiseAbs().sum() == 0.0);
}

TEST_CASE("layer_norm normalizes rows and differentiates") {
  ParameterStore store(6);
  Var x = store.add("x", 4, 6, Init::Normal, true, 1.5);
  Var gamma = store.add("gamma", 1, 6, Init::One);
  Var beta = store.add("beta", 1, 6, Init::Zero);

  Var y = layer_norm(x, gamma, beta);
  for (int r = 0; r < 4; ++r) {
    CHECK(y.value().row(r).mean() == doctest::Approx(0.0).epsilon(1e-9));
    double var = (y.value().row(r).array() - y.value().row(r).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }

  Var probe = Var::constant(Mat::Random(4, 6));
  auto builder = [&] { return sum_all(mul(layer_norm(x, gamma, beta), probe)); };
  CHECK(check_gradients(store, builder).max_rel_error < 1e-6);
}

TEST_CASE("concat and slicing") {
  ParameterStore store(7);
  Var a = store.add("a", 2, 3, Init::Normal, true, 0.5);
  Var b = store.add("b", 1, 3, Init::Normal, true, 0.5);
  Var c = store.add("c", 3, 2, Init::Normal, true, 0.5);
  auto builder = [&] {
    Var rows = concat_rows({a, b});               // 3x3
    Var cols = concat_cols({rows, c});            // 3x5
    Var sl = slice_cols(slice_rows(cols, 1, 2), 1, 3);
    return sum_all(mul(sl, sl));
  };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);

  // Zero-row parts are allowed.
  Var empty = Var::constant(Mat(0, 3));
  Var stacked = concat_rows({empty, Var::constant(Mat::Ones(2, 3))});
  CHECK(stacked.rows() == 2);
}

TEST_CASE("depthwise_conv1d matches a direct computation") {
  ParameterStore store(8);
  Var x = store.add("x", 5, 2, Init::Normal, true, 0.8);
  Var k = store.add("k", 3, 2, Init::Normal, true, 0.8);
  Var bias = store.add("bias", 1, 2, Init::Normal, true, 0.3);

  Var y = depthwise_conv1d(x, k, bias);
  // value check against an explicit loop
  for (int t = 0; t < 5; ++t) {
    for (int ch = 0; ch < 2; ++ch) {
      double want = bias.value()(0, ch);
      for (int j = 0; j < 3; ++j) {
        int s = t + j - 1;
        if (s < 0 || s >= 5) continue;
        want += x.value()(s, ch) * k.value()(j, ch);
      }
      CHECK(y.value()(t, ch) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  Var probe = Var::constant(Mat::Random(5, 2));
  auto builder = [&] { return sum_all(mul(depthwise_conv1d(x, k, bias), probe)); };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);

  // Sequences shorter than the kernel still work.
  Var tiny = depthwise_conv1d(Var::constant(Mat::Ones(1, 2)), k, bias);
  CHECK(tiny.rows() == 1);
}

TEST_CASE("gather_rows scatters gradients per id") {
  ParameterStore store(9);
  Var table = store.add("table", 6, 3, Init::Normal, true, 0.5);
  Var probe = Var::constant(Mat::Random(4, 3));
  auto builder = [&] {
    return sum_all(mul(gather_rows(table, {0, 2, 2, 5}), probe));
  };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);
  CHECK_THROWS(gather_rows(table, {9}));
}

TEST_CASE("nll_row equals explicit cross entropy") {
  ParameterStore store(10);
  Var logits = store.add("logits", 1, 6, Init::Normal, true, 1.3);
  Var loss = nll_row(logits, 2);
  Var probs = softmax_rows(logits);
  CHECK(loss.item() == doctest::Approx(-std::log(probs.value()(0, 2))).epsilon(1e-12));

  auto builder = [&] { return nll_row(logits, 2); };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);

  // Uniform logits on 6 classes cost ln 6.
  Var uniform = nll_row(Var::constant(Mat::Zero(1, 6)), 3);
  CHECK(uniform.item() == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("mul_scalar and mean_over_rows") {
  ParameterStore store(11);
  Var a = store.add("a", 3, 3, Init::Normal, true, 0.5);
  Var s = store.add("s", 1, 1, Init::Normal, true, 0.5);
  auto builder = [&] {
    return sum_all(mul_scalar(mean_over_rows(a), exp(s)));
  };
  CHECK(check_gradients(store, builder).max_rel_error < kTol);
}

TEST_CASE("adamw basics") {
  ParameterStore store(12);
  Var w = store.add("w", 2, 2, Init::Normal, true, 1.0);
  Mat initial = w.value();

  SUBCASE("zero learning rate leaves parameters untouched") {
    AdamW opt(store, {.lr = 0.0});
    GradMap grads;
    Var loss = sum_all(mul(w, w));
    backward(loss, grads);
    opt.step(grads);
    CHECK((w.value() - initial).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("a step reduces a quadratic loss") {
    AdamW opt(store, {.lr = 0.05, .weight_decay = 0.0, .clip_norm = 0.0});
    double before = sum_all(mul(w, w)).item();
    for (int i = 0; i < 50; ++i) {
      GradMap grads;
      backward(sum_all(mul(w, w)), grads);
      opt.step(grads);
    }
    CHECK(sum_all(mul(w, w)).item() < before);
  }

  SUBCASE("non-trainable entries are frozen") {
    store.set_trainable("w", false);
    AdamW opt(store, {.lr = 0.1});
    GradMap grads;
    backward(sum_all(mul(w, w)), grads);
    opt.step(grads);
    CHECK((w.value() - initial).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gradient accumulation across separate graphs") {
  ParameterStore store(13);
  Var w = store.add("w", 2, 2, Init::Normal, true, 0.6);

  GradMap accumulated;
  backward(sum_all(w), accumulated);
  backward(sum_all(mul(w, w)), accumulated);

  GradMap joint;
  backward(add(sum_all(w), sum_all(mul(w, w))), joint);

  Mat diff = accumulated.at(w.node().get()) - joint.at(w.node().get());
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-14);
}
