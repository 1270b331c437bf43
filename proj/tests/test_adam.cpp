#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "laviter/core/adam.hpp"
#include "laviter/core/rng.hpp"

using namespace laviter;

namespace {

ParamList single(const char* name, Tensor t) { return {{name, std::move(t)}}; }

}  // namespace

TEST_CASE("first step without decay moves by lr * g / (|g| + eps)") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.0;
  Adam opt(cfg);
  Tensor p = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
  Tensor loss = sum(mul(Tensor::from_data({3}, {2.0, -3.0, 0.0}), p));
  loss.backward();
  ParamList params = single("p", p);
  opt.step(params);
  // m-hat = g, v-hat = g^2, so the step is sign(g) modulo eps
  CHECK(p.at(0) == doctest::Approx(1.0 - 0.01 * 2.0 / (2.0 + cfg.eps)).epsilon(1e-12));
  CHECK(p.at(1) == doctest::Approx(-2.0 - 0.01 * -3.0 / (3.0 + cfg.eps)).epsilon(1e-12));
  CHECK(p.at(2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(opt.step_count("p") == 1);
}

TEST_CASE("zero gradient leaves only the decoupled decay") {
  AdamConfig cfg;
  cfg.lr = 2e-4;
  cfg.weight_decay = 1e-4;
  Adam opt(cfg);
  Tensor p = Tensor::from_data({2}, {10.0, -4.0}, true);
  ParamList params = single("p", p);
  opt.step(params);
  double factor = 1.0 - cfg.lr * cfg.weight_decay;
  CHECK(p.at(0) == doctest::Approx(10.0 * factor).epsilon(1e-15));
  CHECK(p.at(1) == doctest::Approx(-4.0 * factor).epsilon(1e-15));
}

TEST_CASE("decay applies after the gradient step, not to the stale value") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.01;
  Adam opt(cfg);
  Tensor p = Tensor::from_data({1}, {1.0}, true);
  Tensor loss = mul_scalar(sum(p), 5.0);
  loss.backward();
  ParamList params = single("p", p);
  opt.step(params);
  double after_grad = 1.0 - 0.1 * 5.0 / (5.0 + cfg.eps);
  CHECK(p.at(0) == doctest::Approx(after_grad * (1.0 - 0.1 * 0.01)).epsilon(1e-12));
}

TEST_CASE("moments persist across steps and shrink the effective step under reversal") {
  AdamConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  Adam opt(cfg);
  Tensor p = Tensor::from_data({1}, {0.0}, true);
  ParamList params = single("p", p);

  p.zero_grad();
  Tensor l1 = mul_scalar(sum(p), 1.0);
  l1.backward();
  opt.step(params);
  double after_first = p.at(0);
  CHECK(after_first == doctest::Approx(-0.05).epsilon(1e-6));

  // opposite gradient: momentum partially cancels, so the move back is smaller
  p.zero_grad();
  Tensor l2 = mul_scalar(sum(p), -1.0);
  l2.backward();
  opt.step(params);
  CHECK(p.at(0) > after_first);
  CHECK(std::fabs(p.at(0) - after_first) < 0.05);
  CHECK(opt.step_count("p") == 2);
}

TEST_CASE("per-name state survives a step that omits the parameter") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.0;
  Adam opt(cfg);
  Tensor a = Tensor::from_data({1}, {1.0}, true);
  Tensor b = Tensor::from_data({1}, {1.0}, true);

  auto push = [&](Tensor& t) {
    t.zero_grad();
    Tensor l = sum(t);
    l.backward();
  };

  push(a);
  push(b);
  ParamList both = {{"a", a}, {"b", b}};
  opt.step(both);
  CHECK(opt.step_count("a") == 1);
  CHECK(opt.step_count("b") == 1);

  push(a);
  ParamList only_a = {{"a", a}};
  opt.step(only_a);
  CHECK(opt.step_count("a") == 2);
  CHECK(opt.step_count("b") == 1);

  push(a);
  push(b);
  opt.step(both);
  CHECK(opt.step_count("a") == 3);
  CHECK(opt.step_count("b") == 2);
}

TEST_CASE("set_lr changes later steps only") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  Adam opt(cfg);
  Tensor p = Tensor::from_data({1}, {0.0}, true);
  ParamList params = single("p", p);
  p.zero_grad();
  Tensor l = sum(p);
  l.backward();
  opt.step(params);
  CHECK(p.at(0) == doctest::Approx(-0.1).epsilon(1e-6));
  opt.set_lr(0.01);
  CHECK(opt.lr() == 0.01);
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  Adam opt(cfg);
  Tensor p = Tensor::from_data({2}, {4.0, -3.0}, true);
  ParamList params = single("p", p);
  Tensor target = Tensor::from_data({2}, {1.0, 2.0});
  for (int i = 0; i < 200; ++i) {
    p.zero_grad();
    Tensor d = sub(p, target);
    Tensor loss = sum(mul(d, d));
    loss.backward();
    opt.step(params);
  }
  CHECK(p.at(0) == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(p.at(1) == doctest::Approx(2.0).epsilon(1e-2));
}
