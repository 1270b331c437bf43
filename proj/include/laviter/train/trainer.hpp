#pragma once

#include <string>
#include <vector>

#include "laviter/core/adam.hpp"
#include "laviter/data/dataset.hpp"
#include "laviter/train/model.hpp"

namespace laviter {

// Coefficients of the combined objective. Terms with weight zero are not
// evaluated at all, so their modules stay out of the graph.
struct LossWeights {
  double match = 1.0;       // real-pair matching
  double fake_image = 0.0;  // matching on generated images vs real texts
  double fake_text = 0.0;   // matching on real images vs generated texts
  double gan = 0.0;         // generator adversarial loss
  double caption = 0.0;     // captioner teacher-forced NLL

  static LossWeights match_only();
  static LossWeights uniform();
  static LossWeights best_coco();  // strongest retrieval mix on the large corpus
  static LossWeights best_cub();
};

struct LossComponents {
  Tensor match, fake_image_match, fake_text_match, gan, caption;
};

// Weighted sum of whichever components are defined. An undefined component
// with nonzero weight is a contract violation.
Tensor multimodal_loss(const LossComponents& parts, const LossWeights& w);

// Branch selection for joint training. Parameters of an unused branch are
// never handed to an optimizer, so they stay bitwise intact.
struct AblationProfile {
  std::string name;
  bool use_generator = true;
  bool use_captioner = true;
  bool backbone_frozen = false;  // freeze the whole conv stack, not just the first blocks
  LossWeights weights;
};

// Known names: full, vta-frozen, vta-trainable, img2txt-only, txt2img-only.
AblationProfile ablation_profile(const std::string& name);

// Keeps only tensors that currently require gradients.
ParamList trainable_params(const ParamList& params);

// Runs both encoders over raw images and token id lists, padding every
// text in the batch to a common length.
MatchingBatch encode_matching_batch(const ImageEncoder& image_enc, const TextEncoder& text_enc,
                                    const std::vector<Tensor>& images,
                                    const std::vector<std::vector<int>>& texts);

struct PhaseResult {
  std::vector<std::string> component_names;
  std::vector<std::vector<double>> trace;  // one row per step
  std::string checkpoint_path;
  std::string metrics_path;
  int steps = 0;
};

struct Phase1Config {
  int epochs = 60;
  int batch_size = 8;
  double lr = 2e-4;
  double weight_decay = 1e-4;
  int max_steps = 0;  // when > 0, stop after this many steps
  uint64_t seed = 1;
  uint64_t config_hash = 0;
  std::string out_dir;  // empty disables checkpoint/metrics files
};

struct Phase2GanConfig {
  int epochs = 8;
  int batch_size = 8;
  double gen_lr = 2e-4;
  double disc_lr = 2e-4;
  double weight_decay = 1e-4;
  double lambda_fake_image = 0.0;  // adds the fake-image matching term to G's loss
  int max_steps = 0;
  uint64_t seed = 1;
  uint64_t config_hash = 0;
  std::string out_dir;
};

struct Phase2CapConfig {
  int epochs = 30;
  int batch_size = 8;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int decay_epoch = 20;  // multiply lr by decay_factor after this many epochs
  double decay_factor = 0.1;
  int max_steps = 0;
  uint64_t seed = 1;
  uint64_t config_hash = 0;
  std::string out_dir;
};

struct Phase3Config {
  int epochs = 4;
  int batch_size = 8;
  double lr = 1e-4;
  double disc_lr = 2e-4;
  double weight_decay = 1e-4;
  int frozen_blocks = 1;  // conv blocks excluded from the joint update
  bool end_to_end_fakes = false;  // let matching gradients reach the generator
  bool use_generator = true;
  bool use_captioner = true;
  bool backbone_frozen = false;
  LossWeights weights = LossWeights::best_coco();
  int max_steps = 0;
  uint64_t seed = 1;
  uint64_t config_hash = 0;
  std::string out_dir;
};

// Drives the three-phase schedule over one model and dataset. Images are
// decoded once and cached; batches are drawn in seeded shuffled order.
class Trainer {
 public:
  Trainer(LaviterModel& model, const Dataset& data);

  PhaseResult run_phase1(const Phase1Config& cfg);
  PhaseResult run_phase2_gan(const Phase2GanConfig& cfg);
  PhaseResult run_phase2_captioner(const Phase2CapConfig& cfg);
  PhaseResult run_phase3(const Phase3Config& cfg);

  const Tensor& image_tensor(size_t record) const;
  const std::vector<int>& caption_ids(size_t record, size_t caption) const;
  // Caption token ids followed by the end token, ready as captioner targets.
  std::vector<int> caption_targets(size_t record, size_t caption) const;

 private:
  std::vector<std::vector<size_t>> epoch_batches(int batch_size, Rng& rng) const;
  void write_outputs(PhaseResult& result, const std::string& stem, int phase,
                     const ParamList& saved, uint64_t seed, uint64_t config_hash,
                     const std::string& out_dir) const;

  LaviterModel& model_;
  const Dataset& data_;
  mutable std::vector<Tensor> image_cache_;
  std::vector<std::vector<std::vector<int>>> captions_;
};

}  // namespace laviter
