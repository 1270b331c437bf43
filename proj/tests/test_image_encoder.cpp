#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "laviter/core/error.hpp"
#include "laviter/core/rng.hpp"
#include "laviter/img/image_encoder.hpp"

using namespace laviter;

namespace {

ImageEncoderConfig desk_config() {
  ImageEncoderConfig cfg;
  cfg.channels = {8, 16, 32, 64};
  cfg.model_dim = 64;
  cfg.input_size = 64;
  cfg.region_block = 3;
  return cfg;
}

}  // namespace

TEST_CASE("desk configuration yields an 8x8 region grid") {
  Rng rng(1);
  ImageEncoder enc(desk_config(), rng);
  Rng img_rng(2);
  Tensor image = Tensor::randn({3, 64, 64}, img_rng, 0.5);
  ImageEncoding out = enc.encode(image);
  REQUIRE(out.regions.shape() == std::vector<int>{64, 64});
  REQUIRE(out.global_vec.shape() == std::vector<int>{64});
  CHECK(out.map_h == 8);
  CHECK(out.map_w == 8);
  CHECK(enc.region_count() == 64);
}

TEST_CASE("wide model width gives (256,64) regions on 64x64 input") {
  ImageEncoderConfig cfg = desk_config();
  cfg.model_dim = 256;
  Rng rng(3);
  ImageEncoder enc(cfg, rng);
  Rng img_rng(4);
  Tensor image = Tensor::randn({3, 64, 64}, img_rng, 0.5);
  ImageEncoding out = enc.encode(image);
  REQUIRE(out.regions.shape() == std::vector<int>{256, 64});
  REQUIRE(out.global_vec.shape() == std::vector<int>{256});
}

TEST_CASE("272 input tapped at block four gives the 17x17 grid of 289 regions") {
  ImageEncoderConfig cfg;
  cfg.channels = {32, 64, 128, 256};
  cfg.model_dim = 256;
  cfg.input_size = 272;
  cfg.region_block = 4;
  Rng rng(5);
  ImageEncoder enc(cfg, rng);
  CHECK(enc.region_count() == 289);
  Rng img_rng(6);
  Tensor image = Tensor::randn({3, 272, 272}, img_rng, 0.5);
  ImageEncoding out = enc.encode(image);
  REQUIRE(out.regions.shape() == std::vector<int>{256, 289});
  CHECK(out.map_h == 17);
  CHECK(out.map_w == 17);
}

TEST_CASE("identical images encode identically") {
  Rng rng(7);
  ImageEncoder enc(desk_config(), rng);
  Rng img_rng(8);
  Tensor image = Tensor::randn({3, 64, 64}, img_rng, 0.5);
  ImageEncoding a = enc.encode(image);
  ImageEncoding b = enc.encode(image);
  for (int i = 0; i < a.regions.numel(); ++i) CHECK(a.regions.at(i) == b.regions.at(i));
  for (int i = 0; i < a.global_vec.numel(); ++i) CHECK(a.global_vec.at(i) == b.global_vec.at(i));
}

TEST_CASE("wrong input dimensions raise a shape error naming both shapes") {
  Rng rng(9);
  ImageEncoder enc(desk_config(), rng);
  Rng img_rng(10);
  Tensor bad = Tensor::randn({3, 32, 32}, img_rng);
  try {
    enc.encode(bad);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("64") != std::string::npos);
    CHECK(msg.find("32") != std::string::npos);
  }
}

TEST_CASE("the global vector responds to every quadrant") {
  Rng rng(11);
  ImageEncoder enc(desk_config(), rng);
  Rng img_rng(12);
  Tensor image = Tensor::randn({3, 64, 64}, img_rng, 0.5);
  ImageEncoding base = enc.encode(image);
  for (int q = 0; q < 4; ++q) {
    Tensor masked = image.detach();
    int y0 = (q / 2) * 32, x0 = (q % 2) * 32;
    for (int c = 0; c < 3; ++c)
      for (int y = y0; y < y0 + 32; ++y)
        for (int x = x0; x < x0 + 32; ++x)
          masked.raw()[(static_cast<size_t>(c) * 64 + y) * 64 + x] = 0.0;
    ImageEncoding out = enc.encode(masked);
    double diff = 0.0;
    for (int d = 0; d < 64; ++d) diff += std::fabs(out.global_vec.at(d) - base.global_vec.at(d));
    CHECK(diff > 1e-9);
  }
}

TEST_CASE("frozen blocks keep their parameters bitwise under training updates") {
  Rng rng(13);
  ImageEncoder enc(desk_config(), rng);
  enc.set_frozen_blocks(enc.num_blocks());
  ParamList params;
  enc.collect("img", params);

  std::vector<std::vector<double>> conv_before;
  for (const auto& p : params)
    if (p.name.find("block") != std::string::npos) conv_before.push_back(p.tensor.raw());

  // one training step over the projection outputs
  Rng img_rng(14);
  Tensor image = Tensor::randn({3, 64, 64}, img_rng, 0.5);
  for (auto& p : params) p.tensor.zero_grad();
  ImageEncoding out = enc.encode(image);
  Tensor loss = add(sum(out.regions), sum(out.global_vec));
  loss.backward();
  for (auto& p : params) {
    if (!p.tensor.requires_grad()) continue;
    auto& buf = p.tensor.raw();
    const auto& g = p.tensor.grad();
    for (size_t i = 0; i < buf.size(); ++i) buf[i] -= 1e-3 * g[i];
  }

  size_t idx = 0;
  int frozen_seen = 0;
  for (const auto& p : params)
    if (p.name.find("block") != std::string::npos) {
      CHECK(p.tensor.raw() == conv_before[idx]);
      ++idx;
      ++frozen_seen;
    }
  CHECK(frozen_seen == 8);

  // projections must have moved
  bool projection_moved = false;
  for (const auto& p : params)
    if (p.name.find("block") == std::string::npos)
      for (double g : p.tensor.grad()) projection_moved = projection_moved || g != 0.0;
  CHECK(projection_moved);
}

TEST_CASE("unfreezing restores gradient flow to the conv stack") {
  Rng rng(15);
  ImageEncoder enc(desk_config(), rng);
  enc.set_frozen_blocks(enc.num_blocks());
  enc.set_frozen_blocks(0);
  ParamList params;
  enc.collect("img", params);
  for (const auto& p : params) CHECK(p.tensor.requires_grad());
}

TEST_CASE("partial freezing splits the stack at the requested depth") {
  Rng rng(16);
  ImageEncoder enc(desk_config(), rng);
  enc.set_frozen_blocks(1);
  ParamList params;
  enc.collect("img", params);
  for (const auto& p : params) {
    if (p.name.find("block1") != std::string::npos)
      CHECK_FALSE(p.tensor.requires_grad());
    else
      CHECK(p.tensor.requires_grad());
  }
  CHECK_THROWS_AS(enc.set_frozen_blocks(5), ConfigError);
  CHECK_THROWS_AS(enc.set_frozen_blocks(-1), ConfigError);
}

TEST_CASE("region features depend on local content") {
  Rng rng(17);
  ImageEncoder enc(desk_config(), rng);
  Rng img_rng(18);
  Tensor image = Tensor::randn({3, 64, 64}, img_rng, 0.5);
  ImageEncoding base = enc.encode(image);

  // brighten the top-left corner only
  Tensor bumped = image.detach();
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) bumped.raw()[(static_cast<size_t>(c) * 64 + y) * 64 + x] = 1.0;
  ImageEncoding out = enc.encode(bumped);

  double corner = 0.0, far_corner = 0.0;
  for (int d = 0; d < 64; ++d) {
    corner += std::fabs(out.regions.at(d, 0) - base.regions.at(d, 0));
    far_corner += std::fabs(out.regions.at(d, 63) - base.regions.at(d, 63));
  }
  CHECK(corner > 1e-9);
  CHECK(far_corner == doctest::Approx(0.0).epsilon(1e-12));
}
