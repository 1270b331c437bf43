#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "laviter/data/checkpoint.hpp"
#include "laviter/data/synthetic.hpp"
#include "laviter/train/trainer.hpp"

using namespace laviter;

namespace {

ModelConfig tiny_model_config() {
  ModelConfig cfg = ModelConfig::desk();
  cfg.text = {16, 1, 2, 8, 32, 8};
  cfg.image = {3, {4, 8, 16, 32}, 16, 64, 3};
  cfg.gen = {16, 8, 8, 4, {16, 32}};
  cfg.disc_base_channels = 8;
  cfg.cap = {1, 1, 2, 8, 16, 32, 8, 0};
  return cfg;
}

const Dataset& tiny_dataset() {
  static Dataset data = [] {
    std::string dir = "/tmp/laviter_train_corpus";
    std::string cmd = "rm -rf " + dir + " && mkdir -p " + dir;
    REQUIRE(std::system(cmd.c_str()) == 0);
    CorpusSpec spec;
    spec.train_count = 8;
    spec.test_count = 4;
    spec.seed = 31;
    generate_corpus(dir, spec);
    return load_dataset(dir + "/train");
  }();
  return data;
}

LaviterModel fresh_model(uint64_t seed = 5) {
  const Dataset& data = tiny_dataset();
  return LaviterModel(tiny_model_config(), static_cast<int>(data.vocab.size()), seed);
}

std::vector<double> flatten(const ParamList& params) {
  std::vector<double> out;
  for (const auto& np : params)
    out.insert(out.end(), np.tensor.data().begin(), np.tensor.data().end());
  return out;
}

int count_changed(const std::vector<double>& before, const std::vector<double>& after) {
  REQUIRE(before.size() == after.size());
  int changed = 0;
  for (size_t i = 0; i < before.size(); ++i)
    if (before[i] != after[i]) ++changed;
  return changed;
}

}  // namespace

TEST_CASE("loss weight presets carry the published mixing coefficients") {
  LossWeights m = LossWeights::match_only();
  CHECK(m.match == 1.0);
  CHECK(m.fake_image == 0.0);
  CHECK(m.fake_text == 0.0);
  CHECK(m.gan == 0.0);
  CHECK(m.caption == 0.0);

  LossWeights u = LossWeights::uniform();
  CHECK(u.match == 1.0);
  CHECK(u.fake_image == 1.0);
  CHECK(u.fake_text == 1.0);
  CHECK(u.gan == 1.0);
  CHECK(u.caption == 1.0);

  LossWeights coco = LossWeights::best_coco();
  CHECK(coco.match == 10.0);
  CHECK(coco.fake_image == 1.0);
  CHECK(coco.fake_text == 1.0);
  CHECK(coco.gan == 0.01);
  CHECK(coco.caption == 0.1);

  LossWeights cub = LossWeights::best_cub();
  CHECK(cub.match == 5.0);
  CHECK(cub.fake_image == 1.0);
  CHECK(cub.gan == 0.01);
}

TEST_CASE("combined objective weighs exactly the computed components") {
  LossComponents parts;
  LossWeights w;
  w.match = 0.0;
  CHECK(multimodal_loss(parts, w).value() == 0.0);

  parts.match = Tensor::scalar(2.0);
  parts.gan = Tensor::scalar(3.0);
  w.match = 0.5;
  w.gan = 2.0;
  CHECK(multimodal_loss(parts, w).value() == 0.5 * 2.0 + 2.0 * 3.0);

  w.caption = 1.0;
  CHECK_THROWS_AS(multimodal_loss(parts, w), ContractError);
}

TEST_CASE("combined objective routes gradients scaled by the weights") {
  Tensor a = Tensor::from_data({1}, {2.0}, true);
  Tensor b = Tensor::from_data({1}, {-1.0}, true);
  LossComponents parts;
  parts.match = sum(a);
  parts.caption = sum(b);
  LossWeights w;
  w.match = 3.0;
  w.caption = 0.25;
  multimodal_loss(parts, w).backward();
  CHECK(a.grad()[0] == 3.0);
  CHECK(b.grad()[0] == 0.25);
}

TEST_CASE("ablation profiles select branches and weights") {
  AblationProfile full = ablation_profile("full");
  CHECK(full.use_generator);
  CHECK(full.use_captioner);
  CHECK_FALSE(full.backbone_frozen);
  CHECK(full.weights.match == 10.0);

  AblationProfile frozen = ablation_profile("vta-frozen");
  CHECK_FALSE(frozen.use_generator);
  CHECK_FALSE(frozen.use_captioner);
  CHECK(frozen.backbone_frozen);
  CHECK(frozen.weights.gan == 0.0);

  AblationProfile trainable = ablation_profile("vta-trainable");
  CHECK_FALSE(trainable.use_generator);
  CHECK_FALSE(trainable.backbone_frozen);
  CHECK(trainable.weights.match == 1.0);

  AblationProfile i2t = ablation_profile("img2txt-only");
  CHECK_FALSE(i2t.use_generator);
  CHECK(i2t.use_captioner);
  CHECK(i2t.weights.fake_image == 0.0);
  CHECK(i2t.weights.gan == 0.0);
  CHECK(i2t.weights.fake_text == 1.0);
  CHECK(i2t.weights.caption == 0.1);

  AblationProfile t2i = ablation_profile("txt2img-only");
  CHECK(t2i.use_generator);
  CHECK_FALSE(t2i.use_captioner);
  CHECK(t2i.weights.fake_text == 0.0);
  CHECK(t2i.weights.caption == 0.0);
  CHECK(t2i.weights.fake_image == 1.0);

  CHECK_THROWS_AS(ablation_profile("everything"), ConfigError);
}

TEST_CASE("the trainable filter follows the frozen block setting") {
  LaviterModel model = fresh_model();
  ParamList all_img = model.params_image();

  model.image().set_frozen_blocks(model.image().num_blocks());
  ParamList open = trainable_params(model.params_image());
  for (const auto& np : open) CHECK(np.name.find(".block") == std::string::npos);
  CHECK(open.size() == 4);  // region kernel/bias and global w/b

  model.image().set_frozen_blocks(0);
  CHECK(trainable_params(model.params_image()).size() == all_img.size());
}

TEST_CASE("batch encoding pads texts to a common width") {
  LaviterModel model = fresh_model();
  Rng rng(9);
  std::vector<Tensor> images = {Tensor::uniform({3, 64, 64}, rng, -1.0, 1.0),
                                Tensor::uniform({3, 64, 64}, rng, -1.0, 1.0)};
  std::vector<std::vector<int>> texts = {{5, 6, 7}, {5, 6, 7, 8, 9}};
  MatchingBatch batch = encode_matching_batch(model.image(), model.text(), images, texts);
  REQUIRE(batch.words.size() == 2);
  CHECK(batch.words[0].dim(1) == 5);
  CHECK(batch.words[1].dim(1) == 5);
  CHECK(batch.real[0] == std::vector<bool>{true, true, true, false, false});
  CHECK(batch.real[1] == std::vector<bool>{true, true, true, true, true});

  // texts beyond the encoder window are truncated to n_max
  std::vector<std::vector<int>> long_texts = {{5, 6, 7, 8, 9, 5, 6, 7, 8, 9}, {5}};
  MatchingBatch truncated = encode_matching_batch(model.image(), model.text(), images, long_texts);
  CHECK(truncated.words[0].dim(1) == model.text().config().n_max);

  CHECK_THROWS_AS(encode_matching_batch(model.image(), model.text(), images, {texts[0]}),
                  ContractError);
}

TEST_CASE("caption targets are truncated and end-terminated") {
  LaviterModel model = fresh_model();
  Trainer trainer(model, tiny_dataset());
  std::vector<int> targets = trainer.caption_targets(0, 0);
  int max_len = model.config().cap.max_len;
  CHECK(static_cast<int>(targets.size()) <= max_len);
  CHECK(targets.back() == Vocabulary::kEnd);
  size_t raw_len = trainer.caption_ids(0, 0).size();
  CHECK(targets.size() == std::min(raw_len, static_cast<size_t>(max_len - 1)) + 1);
}

TEST_CASE("matching phase trains the projections and spares the conv stack") {
  LaviterModel model = fresh_model();
  Trainer trainer(model, tiny_dataset());

  uint64_t text_before = params_checksum(model.params_text());
  std::vector<double> conv_before, proj_before;
  for (const auto& np : model.params_image())
    if (np.name.find(".block") != std::string::npos)
      conv_before.insert(conv_before.end(), np.tensor.data().begin(), np.tensor.data().end());
    else
      proj_before.insert(proj_before.end(), np.tensor.data().begin(), np.tensor.data().end());

  Phase1Config cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 2;
  cfg.seed = 17;
  PhaseResult res = trainer.run_phase1(cfg);
  CHECK(res.steps == 2);
  REQUIRE(res.trace.size() == 2);
  REQUIRE(res.component_names.size() == res.trace[0].size());
  CHECK(res.component_names[0] == "total");

  std::vector<double> conv_after, proj_after;
  for (const auto& np : model.params_image())
    if (np.name.find(".block") != std::string::npos)
      conv_after.insert(conv_after.end(), np.tensor.data().begin(), np.tensor.data().end());
    else
      proj_after.insert(proj_after.end(), np.tensor.data().begin(), np.tensor.data().end());

  CHECK(count_changed(conv_before, conv_after) == 0);
  CHECK(count_changed(proj_before, proj_after) > 0);
  CHECK(params_checksum(model.params_text()) != text_before);
}

TEST_CASE("identical seeds reproduce the matching phase bitwise") {
  Phase1Config cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 3;
  cfg.seed = 23;

  LaviterModel m1 = fresh_model(7);
  Trainer t1(m1, tiny_dataset());
  PhaseResult r1 = t1.run_phase1(cfg);

  LaviterModel m2 = fresh_model(7);
  Trainer t2(m2, tiny_dataset());
  PhaseResult r2 = t2.run_phase1(cfg);

  CHECK(params_checksum(m1.params_matching()) == params_checksum(m2.params_matching()));
  REQUIRE(r1.trace.size() == r2.trace.size());
  for (size_t i = 0; i < r1.trace.size(); ++i) CHECK(r1.trace[i] == r2.trace[i]);

  LaviterModel m3 = fresh_model(7);
  Trainer t3(m3, tiny_dataset());
  Phase1Config other = cfg;
  other.seed = 24;
  PhaseResult r3 = t3.run_phase1(other);
  CHECK(params_checksum(m3.params_matching()) != params_checksum(m1.params_matching()));
}

TEST_CASE("phase outputs land in the requested directory") {
  std::string dir = "/tmp/laviter_train_out";
  std::string cmd = "rm -rf " + dir;
  REQUIRE(std::system(cmd.c_str()) == 0);

  LaviterModel model = fresh_model();
  Trainer trainer(model, tiny_dataset());
  Phase1Config cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 2;
  cfg.seed = 3;
  cfg.config_hash = 77;
  cfg.out_dir = dir;
  PhaseResult res = trainer.run_phase1(cfg);

  CHECK(res.checkpoint_path == dir + "/phase1.ckpt");
  CHECK(std::filesystem::exists(res.checkpoint_path));
  CHECK(std::filesystem::exists(res.metrics_path));

  CheckpointData data = load_checkpoint(res.checkpoint_path);
  CHECK(data.meta.phase == 1);
  CHECK(data.meta.step == 2);
  CHECK(data.meta.seed == 3);
  CHECK(data.meta.config_hash == 77);
}

TEST_CASE("generator pretraining leaves the encoders and captioner intact") {
  LaviterModel model = fresh_model();
  Trainer trainer(model, tiny_dataset());
  uint64_t match_before = params_checksum(model.params_matching());
  uint64_t cap_before = params_checksum(model.params_captioner());

  Phase2GanConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 1;
  cfg.seed = 29;
  PhaseResult res = trainer.run_phase2_gan(cfg);
  CHECK(res.steps == 1);
  REQUIRE(res.component_names == std::vector<std::string>{"gen", "disc"});

  CHECK(params_checksum(model.params_matching()) == match_before);
  CHECK(params_checksum(model.params_captioner()) == cap_before);
  CHECK(count_changed(flatten(model.params_generator()),
                      flatten(fresh_model().params_generator())) > 0);
}

TEST_CASE("generator updates precede and survive the discriminator update") {
  LaviterModel model = fresh_model();
  Trainer trainer(model, tiny_dataset());
  std::vector<double> gen_before = flatten(model.params_generator());
  std::vector<double> disc_before = flatten(model.params_discriminators());

  Phase2GanConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 1;
  cfg.seed = 41;
  trainer.run_phase2_gan(cfg);

  CHECK(count_changed(gen_before, flatten(model.params_generator())) > 0);
  CHECK(count_changed(disc_before, flatten(model.params_discriminators())) > 0);
}

TEST_CASE("captioner pretraining touches only the captioner") {
  LaviterModel model = fresh_model();
  Trainer trainer(model, tiny_dataset());
  uint64_t match_before = params_checksum(model.params_matching());
  uint64_t gen_before = params_checksum(model.params_generator());
  std::vector<double> cap_before = flatten(model.params_captioner());

  Phase2CapConfig cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 2;
  cfg.seed = 37;
  PhaseResult res = trainer.run_phase2_captioner(cfg);
  CHECK(res.steps == 2);
  CHECK(params_checksum(model.params_matching()) == match_before);
  CHECK(params_checksum(model.params_generator()) == gen_before);
  CHECK(count_changed(cap_before, flatten(model.params_captioner())) > 0);
}

TEST_CASE("a zero decay factor freezes the captioner at the decay epoch") {
  Phase2CapConfig one_epoch;
  one_epoch.batch_size = 4;
  one_epoch.epochs = 1;
  one_epoch.seed = 43;

  LaviterModel m1 = fresh_model(19);
  Trainer t1(m1, tiny_dataset());
  t1.run_phase2_captioner(one_epoch);

  Phase2CapConfig frozen_tail = one_epoch;
  frozen_tail.epochs = 3;
  frozen_tail.decay_epoch = 1;
  frozen_tail.decay_factor = 0.0;

  LaviterModel m2 = fresh_model(19);
  Trainer t2(m2, tiny_dataset());
  PhaseResult res = t2.run_phase2_captioner(frozen_tail);
  CHECK(res.steps == 6);

  CHECK(params_checksum(m1.params_captioner()) == params_checksum(m2.params_captioner()));
}

TEST_CASE("joint training without the auxiliary branches leaves them bitwise intact") {
  LaviterModel model = fresh_model();
  Trainer trainer(model, tiny_dataset());
  uint64_t gen_before = params_checksum(model.params_generator());
  uint64_t disc_before = params_checksum(model.params_discriminators());
  uint64_t cap_before = params_checksum(model.params_captioner());
  uint64_t match_before = params_checksum(model.params_matching());

  AblationProfile profile = ablation_profile("vta-trainable");
  Phase3Config cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 2;
  cfg.seed = 47;
  cfg.use_generator = profile.use_generator;
  cfg.use_captioner = profile.use_captioner;
  cfg.backbone_frozen = profile.backbone_frozen;
  cfg.weights = profile.weights;
  cfg.frozen_blocks = 1;
  PhaseResult res = trainer.run_phase3(cfg);
  CHECK(res.steps == 2);

  CHECK(params_checksum(model.params_generator()) == gen_before);
  CHECK(params_checksum(model.params_discriminators()) == disc_before);
  CHECK(params_checksum(model.params_captioner()) == cap_before);
  CHECK(params_checksum(model.params_matching()) != match_before);
}

TEST_CASE("full joint training moves every branch and honors frozen blocks") {
  LaviterModel model = fresh_model();
  Trainer trainer(model, tiny_dataset());

  std::vector<double> block1_before, later_blocks_before;
  for (const auto& np : model.params_image()) {
    if (np.name.find(".block1.") != std::string::npos)
      block1_before.insert(block1_before.end(), np.tensor.data().begin(), np.tensor.data().end());
    else if (np.name.find(".block") != std::string::npos)
      later_blocks_before.insert(later_blocks_before.end(), np.tensor.data().begin(),
                                 np.tensor.data().end());
  }
  uint64_t gen_before = params_checksum(model.params_generator());
  uint64_t disc_before = params_checksum(model.params_discriminators());
  uint64_t cap_before = params_checksum(model.params_captioner());

  AblationProfile profile = ablation_profile("full");
  Phase3Config cfg;
  cfg.batch_size = 4;
  cfg.max_steps = 1;
  cfg.seed = 53;
  cfg.weights = profile.weights;
  cfg.frozen_blocks = 1;
  PhaseResult res = trainer.run_phase3(cfg);
  REQUIRE(res.component_names.size() == 7);
  REQUIRE(res.trace.size() == 1);

  std::vector<double> block1_after, later_blocks_after;
  for (const auto& np : model.params_image()) {
    if (np.name.find(".block1.") != std::string::npos)
      block1_after.insert(block1_after.end(), np.tensor.data().begin(), np.tensor.data().end());
    else if (np.name.find(".block") != std::string::npos)
      later_blocks_after.insert(later_blocks_after.end(), np.tensor.data().begin(),
                                np.tensor.data().end());
  }
  CHECK(count_changed(block1_before, block1_after) == 0);
  CHECK(count_changed(later_blocks_before, later_blocks_after) > 0);
  CHECK(params_checksum(model.params_generator()) != gen_before);
  CHECK(params_checksum(model.params_discriminators()) != disc_before);
  CHECK(params_checksum(model.params_captioner()) != cap_before);
}

TEST_CASE("batch sizing is validated against the dataset") {
  LaviterModel model = fresh_model();
  Trainer trainer(model, tiny_dataset());
  Phase1Config cfg;
  cfg.batch_size = 100;
  cfg.max_steps = 1;
  CHECK_THROWS_AS(trainer.run_phase1(cfg), ConfigError);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(trainer.run_phase1(cfg), ConfigError);
}
