#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "laviter/core/nn_ops.hpp"
#include "laviter/core/rng.hpp"

using namespace laviter;
using testutil::gradcheck;

TEST_CASE("softmax rows and columns sum to one and order correctly") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 0, 0, 0});
  Tensor r = softmax(a, 1);
  double row0 = r.at(0, 0) + r.at(0, 1) + r.at(0, 2);
  CHECK(row0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.at(0, 2) > r.at(0, 1));
  CHECK(r.at(1, 0) == doctest::Approx(1.0 / 3.0));

  Tensor c = softmax(a, 0);
  CHECK(c.at(0, 0) + c.at(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.at(0, 2) > c.at(1, 2));

  Tensor v = softmax(Tensor::from_data({2}, {0.0, std::log(3.0)}), 1);
  CHECK(v.at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(v.at(1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax over masked entries yields exact zeros") {
  Tensor a = Tensor::from_data({1, 4}, {0.3, kMaskBias, 1.2, kMaskBias});
  Tensor s = softmax(a, 1);
  CHECK(s.at(0, 1) == 0.0);
  CHECK(s.at(0, 3) == 0.0);
  CHECK(s.at(0, 0) + s.at(0, 2) == doctest::Approx(1.0).epsilon(1e-15));
  double z = std::exp(0.3 - 1.2) + 1.0;
  CHECK(s.at(0, 2) == doctest::Approx(1.0 / z).epsilon(1e-12));
}

TEST_CASE("softmax is invariant to a constant shift") {
  Tensor a = Tensor::from_data({1, 3}, {1000.0, 1001.0, 1002.0});
  Tensor b = Tensor::from_data({1, 3}, {0.0, 1.0, 2.0});
  Tensor sa = softmax(a, 1);
  Tensor sb = softmax(b, 1);
  for (int j = 0; j < 3; ++j) CHECK(sa.at(0, j) == doctest::Approx(sb.at(0, j)).epsilon(1e-12));
}

TEST_CASE("softmax gradients match finite differences on both axes") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 17);
    Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor w = Tensor::randn({3, 4}, rng, 1.0, false);
    CHECK(gradcheck({a}, [&] { return sum(mul(softmax(a, 0), w)); }) < 1e-4);
    CHECK(gradcheck({a}, [&] { return sum(mul(softmax(a, 1), w)); }) < 1e-4);
  }
}

TEST_CASE("masked softmax passes no gradient to masked logits") {
  Tensor a = Tensor::from_data({1, 3}, {0.5, -0.2, 0.1}, true);
  Tensor bias = Tensor::from_data({1, 3}, {0.0, kMaskBias, 0.0});
  Tensor s = softmax(add(a, bias), 1);
  Tensor w = Tensor::from_data({1, 3}, {1.0, 2.0, 3.0});
  sum(mul(s, w)).backward();
  CHECK(a.grad()[1] == 0.0);
  CHECK(a.grad()[0] != 0.0);
}

TEST_CASE("layer_norm normalizes each slice to zero mean, unit variance") {
  Rng rng(5);
  Tensor x = Tensor::randn({4, 3}, rng, 2.0);
  Tensor g = Tensor::full({4}, 1.0);
  Tensor b = Tensor::zeros({4});
  Tensor y = layer_norm(x, g, b, 1e-5, 0);
  for (int col = 0; col < 3; ++col) {
    double m = 0, v = 0;
    for (int row = 0; row < 4; ++row) m += y.at(row, col);
    m /= 4;
    for (int row = 0; row < 4; ++row) v += (y.at(row, col) - m) * (y.at(row, col) - m);
    v /= 4;
    CHECK(m == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("layer_norm applies gain and bias elementwise") {
  Tensor x = Tensor::from_data({2, 2}, {1.0, -1.0, -1.0, 1.0});
  Tensor g = Tensor::from_data({2}, {2.0, 3.0});
  Tensor b = Tensor::from_data({2}, {10.0, 20.0});
  Tensor y = layer_norm(x, g, b, 0.0, 0);
  CHECK(y.at(0, 0) == doctest::Approx(12.0).epsilon(1e-9));
  CHECK(y.at(1, 0) == doctest::Approx(17.0).epsilon(1e-9));
  CHECK(y.at(0, 1) == doctest::Approx(8.0).epsilon(1e-9));
  CHECK(y.at(1, 1) == doctest::Approx(23.0).epsilon(1e-9));
}

TEST_CASE("layer_norm gradients match finite differences") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 29);
    Tensor x = Tensor::randn({4, 3}, rng, 1.0, true);
    Tensor g = Tensor::uniform({4}, rng, 0.5, 1.5, true);
    Tensor b = Tensor::randn({4}, rng, 0.3, true);
    Tensor w = Tensor::randn({4, 3}, rng, 1.0, false);
    CHECK(gradcheck({x, g, b},
                    [&] { return sum(mul(layer_norm(x, g, b, 1e-5, 0), w)); }) < 1e-4);
    Tensor g1 = Tensor::uniform({3}, rng, 0.5, 1.5, true);
    Tensor b1 = Tensor::randn({3}, rng, 0.3, true);
    CHECK(gradcheck({x, g1, b1},
                    [&] { return sum(mul(layer_norm(x, g1, b1, 1e-5, 1), w)); }) < 1e-4);
  }
}

TEST_CASE("cosine similarity reference points") {
  Tensor a = Tensor::from_data({3}, {1, 0, 0});
  Tensor b = Tensor::from_data({3}, {0, 1, 0});
  CHECK(cosine_similarity(a, b).value() == doctest::Approx(0.0));
  CHECK(cosine_similarity(a, a).value() == doctest::Approx(1.0).epsilon(1e-12));
  Tensor na = Tensor::from_data({3}, {-2, 0, 0});
  CHECK(cosine_similarity(a, na).value() == doctest::Approx(-1.0).epsilon(1e-12));
  Tensor z = Tensor::zeros({3});
  CHECK(cosine_similarity(a, z).value() == 0.0);
  Tensor c = Tensor::from_data({2}, {1.0, 1.0});
  Tensor d = Tensor::from_data({2}, {1.0, 0.0});
  CHECK(cosine_similarity(c, d).value() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("cosine similarity gradients match finite differences") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 41);
    Tensor a = Tensor::randn({5}, rng, 1.0, true);
    Tensor b = Tensor::randn({5}, rng, 1.0, true);
    CHECK(gradcheck({a, b}, [&] { return cosine_similarity(a, b); }) < 1e-4);
  }
}

TEST_CASE("log_sum_exp reference values and stability") {
  Tensor a = Tensor::from_data({3}, {0.0, 0.0, 0.0});
  CHECK(log_sum_exp(a).value() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  Tensor big = Tensor::from_data({2}, {1000.0, 1000.0});
  CHECK(log_sum_exp(big).value() == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
  Tensor masked = Tensor::from_data({3}, {2.0, kMaskBias, kMaskBias});
  CHECK(log_sum_exp(masked).value() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("log_sum_exp gradients are the softmax weights") {
  Tensor a = Tensor::from_data({3}, {0.1, 0.7, -0.3}, true);
  log_sum_exp(a).backward();
  Tensor s = softmax(Tensor::from_data({3}, {0.1, 0.7, -0.3}), 1);
  for (int i = 0; i < 3; ++i) CHECK(a.grad()[i] == doctest::Approx(s.at(i)).epsilon(1e-12));
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 43);
    Tensor x = Tensor::randn({6}, rng, 2.0, true);
    CHECK(gradcheck({x}, [&] { return log_sum_exp(x); }) < 1e-4);
  }
}

TEST_CASE("conv2d matches a direct sliding-window oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 4; ++trial) {
    int C = 1 + rng.uniform_int(3);
    int OC = 1 + rng.uniform_int(3);
    int H = 4 + rng.uniform_int(3);
    int W = 4 + rng.uniform_int(3);
    int k = 3, stride = 1 + rng.uniform_int(2), pad = 1;
    Tensor in = Tensor::randn({C, H, W}, rng);
    Tensor kern = Tensor::randn({OC, C * k * k}, rng);
    Tensor bias = Tensor::randn({OC}, rng);
    Tensor out = conv2d(in, kern, bias, C, OC, k, stride, pad);
    int OH = (H + 2 * pad - k) / stride + 1;
    int OW = (W + 2 * pad - k) / stride + 1;
    REQUIRE(out.dim(0) == OC);
    REQUIRE(out.dim(1) == OH);
    REQUIRE(out.dim(2) == OW);
    for (int o = 0; o < OC; ++o)
      for (int oi = 0; oi < OH; ++oi)
        for (int oj = 0; oj < OW; ++oj) {
          double acc = bias.at(o);
          for (int c = 0; c < C; ++c)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                int ii = oi * stride + ki - pad;
                int jj = oj * stride + kj - pad;
                if (ii < 0 || ii >= H || jj < 0 || jj >= W) continue;
                acc += kern.at(o, c * k * k + ki * k + kj) * in.at(c, ii, jj);
              }
          CHECK(out.at(o, oi, oj) == doctest::Approx(acc).epsilon(1e-10));
        }
  }
}

TEST_CASE("conv2d with an identity kernel reproduces the input") {
  Tensor in = Tensor::from_data({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  std::vector<double> k(9, 0.0);
  k[4] = 1.0;
  Tensor kern = Tensor::from_data({1, 9}, k);
  Tensor bias = Tensor::zeros({1});
  Tensor out = conv2d(in, kern, bias, 1, 1, 3, 1, 1);
  for (int i = 0; i < 9; ++i) CHECK(out.at(i) == in.at(i));
}

TEST_CASE("conv2d gradients match finite differences") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 53);
    int C = 2, OC = 2, H = 5, W = 4, k = 3;
    Tensor in = Tensor::randn({C, H, W}, rng, 1.0, true);
    Tensor kern = Tensor::randn({OC, C * k * k}, rng, 0.5, true);
    Tensor bias = Tensor::randn({OC}, rng, 0.5, true);
    int stride = seed % 2 == 0 ? 2 : 1;
    int OH = (H + 2 - k) / stride + 1;
    int OW = (W + 2 - k) / stride + 1;
    Tensor w = Tensor::randn({OC, OH * OW}, rng, 1.0, false);
    CHECK(gradcheck({in, kern, bias}, [&] {
            Tensor out = conv2d(in, kern, bias, C, OC, k, stride, 1);
            return sum(mul(reshape(out, {OC, OH * OW}), w));
          }) < 1e-4);
  }
}

TEST_CASE("upsample_nearest2 repeats each cell into a 2x2 block") {
  Tensor in = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  Tensor out = upsample_nearest2(in);
  REQUIRE(out.dim(1) == 4);
  REQUIRE(out.dim(2) == 4);
  CHECK(out.at(0, 0, 0) == 1.0);
  CHECK(out.at(0, 0, 1) == 1.0);
  CHECK(out.at(0, 1, 1) == 1.0);
  CHECK(out.at(0, 0, 2) == 2.0);
  CHECK(out.at(0, 3, 3) == 4.0);
  CHECK(out.at(0, 2, 1) == 3.0);

  Rng rng(3);
  Tensor x = Tensor::randn({2, 3, 3}, rng, 1.0, true);
  Tensor w = Tensor::randn({2, 6, 6}, rng, 1.0, false);
  CHECK(gradcheck({x}, [&] {
          return sum(mul(reshape(upsample_nearest2(x), {2, 36}), reshape(w, {2, 36})));
        }) < 1e-4);
}

TEST_CASE("global_avg_pool averages each channel") {
  Tensor in = Tensor::from_data({2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  Tensor out = global_avg_pool(in);
  REQUIRE(out.dim(0) == 2);
  CHECK(out.at(0) == doctest::Approx(2.5));
  CHECK(out.at(1) == doctest::Approx(25.0));

  Rng rng(4);
  Tensor x = Tensor::randn({3, 4, 4}, rng, 1.0, true);
  Tensor w = Tensor::randn({3}, rng, 1.0, false);
  CHECK(gradcheck({x}, [&] { return sum(mul(global_avg_pool(x), w)); }) < 1e-4);
}

TEST_CASE("mask bias helpers mark exactly the disallowed entries") {
  auto kb = key_mask_bias(2, {true, false, true});
  REQUIRE(kb.size() == 6);
  CHECK(kb[0] == 0.0);
  CHECK(kb[1] == kMaskBias);
  CHECK(kb[2] == 0.0);
  CHECK(kb[4] == kMaskBias);

  auto cb = causal_bias(3);
  REQUIRE(cb.size() == 9);
  CHECK(cb[0] == 0.0);
  CHECK(cb[1] == kMaskBias);
  CHECK(cb[2] == kMaskBias);
  CHECK(cb[3] == 0.0);
  CHECK(cb[4] == 0.0);
  CHECK(cb[5] == kMaskBias);
  CHECK(cb[8] == 0.0);
}
