#include <cmath>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "ate/neural.hpp"
#include "ate/rng.hpp"
#include "ate/types.hpp"

using ate::Mat;
using ate::Param;
using ate::ParamStore;
using ate::Rng;
using ate::Tape;
using ate::Vec;

namespace {

Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (const double x : xs) {
    v[i++] = x;
  }
  return v;
}

}  // namespace

TEST_CASE("tape primitives compute the documented forward values") {
  ParamStore store;
  Param& W = store.create("W", 2, 3);
  W.value << 1.0, 0.0, -1.0, 0.5, 2.0, 0.25;
  Param& b = store.create("b", 2, 1);
  b.value << 0.1, -0.2;

  Tape t;
  const Tape::Var x = t.input(make_vec({2.0, -1.0, 4.0}));
  const Tape::Var ax = t.affine(x, W, &b);
  CHECK(t.value(ax)[0] == doctest::Approx(2.0 - 4.0 + 0.1));
  CHECK(t.value(ax)[1] == doctest::Approx(1.0 - 2.0 + 1.0 - 0.2));

  const Tape::Var s = t.sigmoid(ax);
  CHECK(t.value(s)[0] == doctest::Approx(1.0 / (1.0 + std::exp(1.9))));
  const Tape::Var th = t.tanh(ax);
  CHECK(t.value(th)[1] == doctest::Approx(std::tanh(-0.2)));

  const Tape::Var y = t.input(make_vec({3.0, -2.0}));
  CHECK(t.value(t.add(ax, y))[0] == doctest::Approx(t.value(ax)[0] + 3.0));
  CHECK(t.value(t.hadamard(ax, y))[1] == doctest::Approx(t.value(ax)[1] * -2.0));
  CHECK(t.value(t.scale(y, -0.5))[0] == doctest::Approx(-1.5));

  const Tape::Var cat = t.concat(ax, y);
  REQUIRE(t.size(cat) == 4);
  CHECK(t.value(cat)[2] == 3.0);

  const Tape::Var total = t.sum({y, y, y});
  CHECK(t.value(total)[1] == doctest::Approx(-6.0));

  CHECK_THROWS_AS(t.add(x, y), ate::ContractError);
  CHECK_THROWS_AS((void)t.affine(y, W, &b), ate::ContractError);
}

TEST_CASE("softmax cross entropy matches the log-sum-exp identity") {
  Tape t;
  const Tape::Var logits = t.input(make_vec({1.0, 2.0, 3.0}));
  const Tape::Var loss = t.softmax_cross_entropy(logits, 2);
  REQUIRE(t.size(loss) == 1);
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  CHECK(t.value(loss)[0] == doctest::Approx(lse - 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(t.softmax_cross_entropy(logits, 3), ate::ContractError);

  // Gradient is softmax(logits) - one_hot(target).
  t.backward(loss);
  const Vec g = t.grad(logits);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  CHECK(g[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
  CHECK(g[2] == doctest::Approx(std::exp(3.0) / z - 1.0).epsilon(1e-12));
}

TEST_CASE("embed_row returns table rows and routes gradients only when trainable") {
  ParamStore store;
  Param& table = store.create("table", 3, 2);
  table.value << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  Param& frozen = store.create("frozen", 3, 2, /*trainable=*/false);
  frozen.value = table.value;

  Tape t;
  const Tape::Var r1 = t.embed_row(table, 1);
  CHECK(t.value(r1)[0] == 3.0);
  CHECK(t.value(r1)[1] == 4.0);
  const Tape::Var r2 = t.embed_row(frozen, 2);
  const Tape::Var loss = t.softmax_cross_entropy(t.add(r1, r2), 0);
  t.backward(loss);

  CHECK(table.grad.size() != 0);
  CHECK(table.grad.row(1).norm() > 0.0);
  CHECK(table.grad.row(0).norm() == 0.0);
  CHECK(frozen.grad.size() == 0);  // lazy buffer never allocated

  CHECK_THROWS_AS(t.embed_row(table, 3), ate::ContractError);
}

TEST_CASE("dropout is identity in eval mode and scales survivors in train mode") {
  Tape t;
  Rng rng(123);
  const Tape::Var x = t.input(make_vec({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0}));
  const Tape::Var eval_out = t.dropout(x, 0.5, /*train=*/false, rng);
  CHECK(eval_out.id == x.id);
  const Tape::Var zero_rate = t.dropout(x, 0.0, /*train=*/true, rng);
  CHECK(zero_rate.id == x.id);

  const Tape::Var train_out = t.dropout(x, 0.5, /*train=*/true, rng);
  CHECK(train_out.id != x.id);
  int dropped = 0;
  for (Eigen::Index i = 0; i < 8; ++i) {
    const double v = t.value(train_out)[i];
    const bool kept = v == doctest::Approx(2.0 * t.value(x)[i]);
    const bool zeroed = v == 0.0;
    CHECK((kept || zeroed));
    dropped += zeroed ? 1 : 0;
  }
  CHECK(dropped > 0);
  CHECK(dropped < 8);
  CHECK_THROWS_AS(t.dropout(x, 1.0, true, rng), ate::ContractError);
}

TEST_CASE("backward accumulates param grads additively across tapes") {
  ParamStore store;
  Rng rng(9);
  Param& W = store.create("W", 3, 3);
  ate::glorot_uniform(W.value, rng);

  const auto run_once = [&]() {
    Tape t;
    const Tape::Var x = t.input(make_vec({0.3, -0.7, 1.1}));
    const Tape::Var loss = t.softmax_cross_entropy(t.tanh(t.affine(x, W, nullptr)), 1);
    t.backward(loss);
  };
  run_once();
  const Mat once = W.grad;
  REQUIRE(once.norm() > 0.0);
  run_once();
  CHECK((W.grad - 2.0 * once).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("finite differences validate a composite tape gradient") {
  ParamStore store;
  Rng rng(31);
  Param& W = store.create("W", 4, 3);
  ate::glorot_uniform(W.value, rng);
  Param& b = store.create("b", 4, 1);
  b.value = 0.1 * Vec::Ones(4);
  Param& V = store.create("V", 3, 4);
  ate::glorot_uniform(V.value, rng);

  const Vec x_val = make_vec({0.5, -1.0, 2.0});
  const auto forward = [&]() {
    Tape t;
    const Tape::Var x = t.input(x_val);
    const Tape::Var h = t.sigmoid(t.affine(x, W, &b));
    const Tape::Var g = t.hadamard(t.tanh(h), h);
    const Tape::Var logits = t.affine(g, V, nullptr);
    return t.value(t.softmax_cross_entropy(logits, 2))[0];
  };
  const auto backward = [&]() {
    store.zero_grads();
    Tape t;
    const Tape::Var x = t.input(x_val);
    const Tape::Var h = t.sigmoid(t.affine(x, W, &b));
    const Tape::Var g = t.hadamard(t.tanh(h), h);
    const Tape::Var logits = t.affine(g, V, nullptr);
    t.backward(t.softmax_cross_entropy(logits, 2));
  };
  const ate::GradCheckReport report =
      ate::grad_check(forward, backward, store.all(), 1e-6, 12, 77);
  INFO(report.summary());
  CHECK(report.pass);
}

TEST_CASE("grad_check rejects a deliberately corrupted gradient") {
  ParamStore store;
  Param& w = store.create("w", 2, 1);
  w.value << 1.0, 2.0;
  const auto forward = [&]() { return w.value.squaredNorm(); };
  const auto backward = [&]() {
    w.ensure_grad() = 2.0 * w.value;
    w.grad(0, 0) += 0.5;  // sabotage
  };
  const ate::GradCheckReport report = ate::grad_check(forward, backward, {&w}, 1e-6, 4, 3);
  CHECK_FALSE(report.pass);
  CHECK(report.summary().find("w") != std::string::npos);
}

TEST_CASE("param store rejects duplicate names and restores snapshots") {
  ParamStore store;
  Param& a = store.create("a", 2, 2);
  CHECK_THROWS_AS(store.create("a", 1, 1), ate::ContractError);
  store.create("b", 1, 3, /*trainable=*/false);
  CHECK(store.size() == 2);
  CHECK(store.find("a") == &a);
  CHECK(store.find("missing") == nullptr);

  a.value << 1, 2, 3, 4;
  const auto snap = store.snapshot_values();
  a.value.setZero();
  store.restore_values(snap);
  CHECK(a.value(1, 1) == 4.0);
  CHECK_THROWS_AS(store.restore_values({}), ate::ContractError);
}

TEST_CASE("checkpoints round-trip bit-exactly and validate structure") {
  ParamStore store;
  Rng rng(5);
  Param& a = store.create("alpha", 3, 4);
  ate::glorot_uniform(a.value, rng);
  Param& b = store.create("beta", 2, 1, /*trainable=*/false);
  b.value << -1.5, 2.25;

  std::ostringstream out;
  store.save(out);
  const std::string blob = out.str();

  ParamStore copy;
  copy.create("alpha", 3, 4);
  copy.create("beta", 2, 1, false);
  std::istringstream in(blob);
  copy.load(in);
  CHECK((copy.find("alpha")->value - a.value).norm() == 0.0);
  CHECK((copy.find("beta")->value - b.value).norm() == 0.0);

  ParamStore missing;
  missing.create("alpha", 3, 4);
  std::istringstream in2(blob);
  CHECK_THROWS_AS(missing.load(in2), ate::ParseError);

  ParamStore wrong_shape;
  wrong_shape.create("alpha", 4, 3);
  wrong_shape.create("beta", 2, 1, false);
  std::istringstream in3(blob);
  CHECK_THROWS_AS(wrong_shape.load(in3), ate::ParseError);

  std::string corrupt = blob;
  corrupt[0] = 'X';
  std::istringstream in4(corrupt);
  ParamStore fresh;
  fresh.create("alpha", 3, 4);
  fresh.create("beta", 2, 1, false);
  CHECK_THROWS_AS(fresh.load(in4), ate::ParseError);
}

TEST_CASE("adam takes the documented bias-corrected steps and clears grads") {
  ParamStore store;
  Param& p = store.create("p", 1, 1);
  p.value(0, 0) = 1.0;
  ate::AdamState adam;
  CHECK(adam.config().lr == 1e-3);
  CHECK(adam.config().beta1 == 0.9);
  CHECK(adam.config().beta2 == 0.999);
  CHECK(adam.config().epsilon == 1e-8);

  p.ensure_grad()(0, 0) = 0.5;
  adam.step(store);
  CHECK(adam.step_count() == 1);
  CHECK(p.value(0, 0) == doctest::Approx(0.99900000002).epsilon(1e-12));
  CHECK(p.grad.norm() == 0.0);

  p.ensure_grad()(0, 0) = 0.25;
  adam.step(store);
  CHECK(p.value(0, 0) == doctest::Approx(0.9980678204047746).epsilon(1e-12));
}

TEST_CASE("adam never touches frozen params") {
  ParamStore store;
  Param& frozen = store.create("f", 1, 1, /*trainable=*/false);
  frozen.value(0, 0) = 3.0;
  frozen.ensure_grad()(0, 0) = 100.0;
  ate::AdamState adam;
  adam.step(store);
  CHECK(frozen.value(0, 0) == 3.0);
  CHECK(frozen.grad.norm() == 0.0);  // grads still cleared after the step
}

TEST_CASE("glorot_uniform respects its fan-based limit and seed") {
  Mat m1(6, 10), m2(6, 10), m3(6, 10);
  Rng r1(4), r2(4), r3(5);
  ate::glorot_uniform(m1, r1);
  ate::glorot_uniform(m2, r2);
  ate::glorot_uniform(m3, r3);
  const double limit = std::sqrt(6.0 / (6 + 10));
  CHECK(m1.maxCoeff() <= limit);
  CHECK(m1.minCoeff() >= -limit);
  CHECK((m1 - m2).norm() == 0.0);
  CHECK((m1 - m3).norm() != 0.0);
  CHECK(m1.maxCoeff() > 0.3 * limit);  // actually spreads over the range
}
