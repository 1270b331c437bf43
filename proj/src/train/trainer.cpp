#include "laviter/train/trainer.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>

#include "laviter/core/error.hpp"
#include "laviter/core/rng.hpp"
#include "laviter/data/checkpoint.hpp"
#include "laviter/data/image_io.hpp"
#include "laviter/tim/gan_loss.hpp"

namespace laviter {

LossWeights LossWeights::match_only() {
  LossWeights w;
  w.match = 1.0;
  return w;
}

LossWeights LossWeights::uniform() {
  LossWeights w;
  w.match = w.fake_image = w.fake_text = w.gan = w.caption = 1.0;
  return w;
}

LossWeights LossWeights::best_coco() {
  LossWeights w;
  w.match = 10.0;
  w.fake_image = 1.0;
  w.fake_text = 1.0;
  w.gan = 0.01;
  w.caption = 0.1;
  return w;
}

LossWeights LossWeights::best_cub() {
  LossWeights w = best_coco();
  w.match = 5.0;
  return w;
}

Tensor multimodal_loss(const LossComponents& parts, const LossWeights& w) {
  struct Term {
    const Tensor* t;
    double weight;
    const char* name;
  };
  const Term terms[] = {
      {&parts.match, w.match, "match"},
      {&parts.fake_image_match, w.fake_image, "fake_image_match"},
      {&parts.fake_text_match, w.fake_text, "fake_text_match"},
      {&parts.gan, w.gan, "gan"},
      {&parts.caption, w.caption, "caption"},
  };
  Tensor total;
  for (const Term& term : terms) {
    if (term.weight == 0.0) continue;
    if (!term.t->defined())
      throw ContractError(std::string("multimodal_loss: component ") + term.name +
                          " has nonzero weight but was not computed");
    Tensor scaled = mul_scalar(*term.t, term.weight);
    total = total.defined() ? add(total, scaled) : scaled;
  }
  return total.defined() ? total : Tensor::scalar(0.0);
}

AblationProfile ablation_profile(const std::string& name) {
  AblationProfile p;
  p.name = name;
  if (name == "full") {
    p.weights = LossWeights::best_coco();
  } else if (name == "vta-frozen") {
    p.use_generator = false;
    p.use_captioner = false;
    p.backbone_frozen = true;
    p.weights = LossWeights::match_only();
  } else if (name == "vta-trainable") {
    p.use_generator = false;
    p.use_captioner = false;
    p.weights = LossWeights::match_only();
  } else if (name == "img2txt-only") {
    p.use_generator = false;
    p.weights = LossWeights::best_coco();
    p.weights.fake_image = 0.0;
    p.weights.gan = 0.0;
  } else if (name == "txt2img-only") {
    p.use_captioner = false;
    p.weights = LossWeights::best_coco();
    p.weights.fake_text = 0.0;
    p.weights.caption = 0.0;
  } else {
    throw ConfigError("unknown ablation \"" + name +
                      "\" (expected full, vta-frozen, vta-trainable, img2txt-only or txt2img-only)");
  }
  return p;
}

namespace {

// Generated images may be smaller or larger than the encoder's input.
Tensor fit_resolution(Tensor img, int target) {
  int size = img.dim(1);
  while (size < target) {
    img = upsample_nearest2(img);
    size *= 2;
  }
  if (size > target) {
    if (size % target != 0)
      throw ConfigError("cannot resample a " + std::to_string(img.dim(1)) + " image to " +
                        std::to_string(target));
    img = avg_pool2d(img, size / target);
    size = target;
  }
  if (size != target)
    throw ConfigError("cannot resample a " + std::to_string(img.dim(1)) + " image to " +
                      std::to_string(target));
  return img;
}

}  // namespace

ParamList trainable_params(const ParamList& params) {
  ParamList out;
  for (const auto& np : params)
    if (np.tensor.requires_grad()) out.push_back(np);
  return out;
}

MatchingBatch encode_matching_batch(const ImageEncoder& image_enc, const TextEncoder& text_enc,
                                    const std::vector<Tensor>& images,
                                    const std::vector<std::vector<int>>& texts) {
  if (images.size() != texts.size())
    throw ContractError("encode_matching_batch: image and text counts differ");
  int pad_to = 1;
  for (const auto& ids : texts) {
    int len = std::min<int>(static_cast<int>(ids.size()), text_enc.config().n_max);
    pad_to = std::max(pad_to, std::max(len, 1));
  }
  MatchingBatch batch;
  for (size_t i = 0; i < images.size(); ++i) {
    ImageEncoding ie = image_enc.encode(images[i]);
    batch.regions.push_back(ie.regions);
    batch.global_vecs.push_back(ie.global_vec);
    TextEncoding te = text_enc.encode(texts[i], pad_to);
    batch.words.push_back(te.words);
    batch.sentences.push_back(te.sentence);
    batch.real.push_back(te.real);
  }
  return batch;
}

Trainer::Trainer(LaviterModel& model, const Dataset& data) : model_(model), data_(data) {
  if (data_.records.empty()) throw ContractError("trainer needs a nonempty dataset");
  image_cache_.resize(data_.records.size());
  captions_.reserve(data_.records.size());
  for (const auto& rec : data_.records) {
    std::vector<std::vector<int>> ids;
    for (const auto& cap : rec.captions) ids.push_back(data_.vocab.encode(cap));
    captions_.push_back(std::move(ids));
  }
}

const Tensor& Trainer::image_tensor(size_t record) const {
  Tensor& slot = image_cache_.at(record);
  if (!slot.defined()) {
    NoGradGuard guard;
    slot = image_to_tensor(read_ppm(data_.image_path(data_.records[record])));
  }
  return slot;
}

const std::vector<int>& Trainer::caption_ids(size_t record, size_t caption) const {
  return captions_.at(record).at(caption);
}

std::vector<int> Trainer::caption_targets(size_t record, size_t caption) const {
  std::vector<int> ids = caption_ids(record, caption);
  int limit = model_.config().cap.max_len - 1;
  if (static_cast<int>(ids.size()) > limit) ids.resize(static_cast<size_t>(limit));
  ids.push_back(Vocabulary::kEnd);
  return ids;
}

std::vector<std::vector<size_t>> Trainer::epoch_batches(int batch_size, Rng& rng) const {
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  size_t n = data_.records.size();
  if (n < static_cast<size_t>(batch_size))
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds the dataset (" +
                      std::to_string(n) + " records)");
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<size_t>> batches;
  size_t full = n / static_cast<size_t>(batch_size);
  for (size_t b = 0; b < full; ++b)
    batches.emplace_back(order.begin() + b * batch_size, order.begin() + (b + 1) * batch_size);
  return batches;
}

void Trainer::write_outputs(PhaseResult& result, const std::string& stem, int phase,
                            const ParamList& saved, uint64_t seed, uint64_t config_hash,
                            const std::string& out_dir) const {
  if (out_dir.empty()) return;
  std::filesystem::create_directories(out_dir);

  std::string csv = "step";
  for (const auto& name : result.component_names) csv += "," + name;
  csv += "\n";
  char buf[64];
  for (size_t row = 0; row < result.trace.size(); ++row) {
    csv += std::to_string(row);
    for (double v : result.trace[row]) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      csv += buf;
    }
    csv += "\n";
  }
  result.metrics_path = out_dir + "/" + stem + "_metrics.csv";
  atomic_write(result.metrics_path, csv);

  CheckpointMeta meta;
  meta.phase = static_cast<uint32_t>(phase);
  meta.step = static_cast<uint64_t>(result.steps);
  meta.seed = seed;
  meta.config_hash = config_hash;
  result.checkpoint_path = out_dir + "/" + stem + ".ckpt";
  save_checkpoint(result.checkpoint_path, saved, meta);
}

PhaseResult Trainer::run_phase1(const Phase1Config& cfg) {
  model_.image().set_frozen_blocks(model_.image().num_blocks());
  ParamList opt_params = trainable_params(model_.params_matching());

  AdamConfig ac;
  ac.lr = cfg.lr;
  ac.weight_decay = cfg.weight_decay;
  Adam adam(ac);

  Rng rng = Rng(cfg.seed).fork(101);
  PhaseResult res;
  res.component_names = {"total", "word_i2t", "word_t2i", "sent_i2t", "sent_t2i"};

  int step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    for (const auto& batch : epoch_batches(cfg.batch_size, rng)) {
      std::vector<Tensor> images;
      std::vector<std::vector<int>> texts;
      for (size_t idx : batch) {
        images.push_back(image_tensor(idx));
        texts.push_back(caption_ids(idx, static_cast<size_t>(rng.uniform_int(
                                             static_cast<int>(captions_[idx].size())))));
      }
      MatchingBatch mb = encode_matching_batch(model_.image(), model_.text(), images, texts);
      MatchingLoss ml = total_matching_loss(mb, model_.config().gammas);

      zero_all_grads(opt_params);
      ml.total.backward();
      adam.step(opt_params);

      res.trace.push_back({ml.total.value(), ml.word_image_to_text.value(),
                           ml.word_text_to_image.value(), ml.sent_image_to_text.value(),
                           ml.sent_text_to_image.value()});
      ++step;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        stop = true;
        break;
      }
    }
  }
  res.steps = step;
  write_outputs(res, "phase1", 1, model_.params_matching(), cfg.seed, cfg.config_hash, cfg.out_dir);
  return res;
}

PhaseResult Trainer::run_phase2_gan(const Phase2GanConfig& cfg) {
  ParamList g_params = trainable_params(model_.params_generator());
  ParamList d_params = trainable_params(model_.params_discriminators());

  AdamConfig gc;
  gc.lr = cfg.gen_lr;
  gc.weight_decay = cfg.weight_decay;
  Adam adam_g(gc);
  AdamConfig dc;
  dc.lr = cfg.disc_lr;
  dc.weight_decay = cfg.weight_decay;
  Adam adam_d(dc);

  const auto& stages = model_.config().gen.stage_sizes;
  int input_size = model_.config().image.input_size;

  // Frozen text features and downsampled reals, cached per record/caption.
  std::vector<std::vector<TextEncoding>> text_cache(data_.records.size());
  std::vector<std::vector<Tensor>> real_cache(data_.records.size());
  auto texts_of = [&](size_t idx) -> std::vector<TextEncoding>& {
    auto& slot = text_cache[idx];
    if (slot.empty()) {
      NoGradGuard guard;
      for (const auto& ids : captions_[idx]) slot.push_back(model_.text().encode(ids));
    }
    return slot;
  };
  auto reals_of = [&](size_t idx) -> std::vector<Tensor>& {
    auto& slot = real_cache[idx];
    if (slot.empty()) {
      NoGradGuard guard;
      for (int size : stages) {
        if (input_size % size != 0)
          throw ConfigError("stage size " + std::to_string(size) +
                            " does not divide the input size");
        slot.push_back(avg_pool2d(image_tensor(idx), input_size / size));
      }
    }
    return slot;
  };

  Rng rng = Rng(cfg.seed).fork(102);
  PhaseResult res;
  res.component_names = {"gen", "disc"};

  int step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    for (const auto& batch : epoch_batches(cfg.batch_size, rng)) {
      struct Sample {
        const TextEncoding* text;
        std::vector<Tensor> fakes;
        const std::vector<Tensor>* reals;
      };
      std::vector<Sample> samples;
      for (size_t idx : batch) {
        auto& encs = texts_of(idx);
        Sample s;
        s.text = &encs[static_cast<size_t>(rng.uniform_int(static_cast<int>(encs.size())))];
        s.reals = &reals_of(idx);
        Tensor z = sample_noise(model_.config().gen.noise_dim, rng);
        s.fakes = model_.generator().generate(s.text->words, s.text->sentence, z);
        samples.push_back(std::move(s));
      }

      std::vector<std::vector<DiscriminatorOutput>> fake_scores;
      for (const Sample& s : samples) {
        std::vector<DiscriminatorOutput> per_stage;
        for (size_t k = 0; k < stages.size(); ++k)
          per_stage.push_back(model_.discriminators()[k].score(s.fakes[k], s.text->sentence));
        fake_scores.push_back(std::move(per_stage));
      }
      Tensor g_loss = generator_loss(fake_scores);
      if (cfg.lambda_fake_image > 0.0) {
        MatchingBatch mb;
        for (const Sample& s : samples) {
          ImageEncoding ie = model_.image().encode(fit_resolution(s.fakes.back(), input_size));
          mb.regions.push_back(ie.regions);
          mb.global_vecs.push_back(ie.global_vec);
          mb.words.push_back(s.text->words);
          mb.sentences.push_back(s.text->sentence);
          mb.real.push_back(s.text->real);
        }
        Tensor match = total_matching_loss(mb, model_.config().gammas).total;
        g_loss = tim_total_loss(g_loss, match, cfg.lambda_fake_image);
      }
      zero_all_grads(g_params);
      g_loss.backward();
      adam_g.step(g_params);

      std::vector<std::vector<DiscriminatorOutput>> real_scores, detached_fake_scores;
      for (const Sample& s : samples) {
        std::vector<DiscriminatorOutput> on_real, on_fake;
        for (size_t k = 0; k < stages.size(); ++k) {
          on_real.push_back(model_.discriminators()[k].score((*s.reals)[k], s.text->sentence));
          on_fake.push_back(model_.discriminators()[k].score(s.fakes[k].detach(), s.text->sentence));
        }
        real_scores.push_back(std::move(on_real));
        detached_fake_scores.push_back(std::move(on_fake));
      }
      Tensor d_loss = discriminator_loss(real_scores, detached_fake_scores);
      zero_all_grads(d_params);
      d_loss.backward();
      adam_d.step(d_params);

      res.trace.push_back({g_loss.value(), d_loss.value()});
      ++step;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        stop = true;
        break;
      }
    }
  }
  res.steps = step;
  ParamList saved = model_.params_generator();
  ParamList discs = model_.params_discriminators();
  saved.insert(saved.end(), discs.begin(), discs.end());
  write_outputs(res, "phase2_tim", 2, saved, cfg.seed, cfg.config_hash, cfg.out_dir);
  return res;
}

PhaseResult Trainer::run_phase2_captioner(const Phase2CapConfig& cfg) {
  ParamList cap_params = trainable_params(model_.params_captioner());

  AdamConfig ac;
  ac.lr = cfg.lr;
  ac.weight_decay = cfg.weight_decay;
  Adam adam(ac);

  // Region features come from the frozen encoders, so they are computed once.
  std::vector<Tensor> region_cache(data_.records.size());
  auto regions_of = [&](size_t idx) -> const Tensor& {
    Tensor& slot = region_cache[idx];
    if (!slot.defined()) {
      NoGradGuard guard;
      slot = model_.image().encode(image_tensor(idx)).regions;
    }
    return slot;
  };

  Rng rng = Rng(cfg.seed).fork(103);
  PhaseResult res;
  res.component_names = {"nll"};

  int step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    if (epoch == cfg.decay_epoch) adam.set_lr(cfg.lr * cfg.decay_factor);
    for (const auto& batch : epoch_batches(cfg.batch_size, rng)) {
      std::vector<Tensor> losses;
      for (size_t idx : batch) {
        size_t cap_idx =
            static_cast<size_t>(rng.uniform_int(static_cast<int>(captions_[idx].size())));
        losses.push_back(
            model_.captioner().caption_nll(regions_of(idx), caption_targets(idx, cap_idx)));
      }
      Tensor loss = mean(pack_scalars({static_cast<int>(losses.size())}, losses));
      zero_all_grads(cap_params);
      loss.backward();
      adam.step(cap_params);

      res.trace.push_back({loss.value()});
      ++step;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        stop = true;
        break;
      }
    }
  }
  res.steps = step;
  write_outputs(res, "phase2_itm", 2, model_.params_captioner(), cfg.seed, cfg.config_hash, cfg.out_dir);
  return res;
}

PhaseResult Trainer::run_phase3(const Phase3Config& cfg) {
  int frozen = cfg.backbone_frozen ? model_.image().num_blocks() : cfg.frozen_blocks;
  model_.image().set_frozen_blocks(frozen);

  ParamList joint = trainable_params(model_.params_matching());
  if (cfg.use_generator) {
    ParamList g = trainable_params(model_.params_generator());
    joint.insert(joint.end(), g.begin(), g.end());
  }
  if (cfg.use_captioner) {
    ParamList c = trainable_params(model_.params_captioner());
    joint.insert(joint.end(), c.begin(), c.end());
  }
  ParamList d_params = trainable_params(model_.params_discriminators());
  bool train_disc = cfg.use_generator && cfg.weights.gan != 0.0;

  AdamConfig jc;
  jc.lr = cfg.lr;
  jc.weight_decay = cfg.weight_decay;
  Adam adam(jc);
  AdamConfig dc;
  dc.lr = cfg.disc_lr;
  dc.weight_decay = cfg.weight_decay;
  Adam adam_d(dc);

  const auto& stages = model_.config().gen.stage_sizes;
  int input_size = model_.config().image.input_size;

  Rng rng = Rng(cfg.seed).fork(104);
  PhaseResult res;
  res.component_names = {"total", "match", "fake_image", "fake_text", "gan", "caption", "disc"};

  int step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    for (const auto& batch : epoch_batches(cfg.batch_size, rng)) {
      std::vector<Tensor> images;
      std::vector<std::vector<int>> texts;
      std::vector<size_t> cap_choice;
      for (size_t idx : batch) {
        images.push_back(image_tensor(idx));
        size_t cap_idx =
            static_cast<size_t>(rng.uniform_int(static_cast<int>(captions_[idx].size())));
        cap_choice.push_back(cap_idx);
        texts.push_back(caption_ids(idx, cap_idx));
      }

      MatchingBatch real_batch = encode_matching_batch(model_.image(), model_.text(), images, texts);

      LossComponents parts;
      parts.match = total_matching_loss(real_batch, model_.config().gammas).total;

      std::vector<std::vector<Tensor>> fakes;
      if (cfg.use_generator) {
        for (size_t b = 0; b < batch.size(); ++b) {
          Tensor condition = cfg.end_to_end_fakes ? real_batch.sentences[b]
                                                  : real_batch.sentences[b].detach();
          Tensor z = sample_noise(model_.config().gen.noise_dim, rng);
          fakes.push_back(model_.generator().generate(real_batch.words[b].detach(), condition, z));
        }
        if (cfg.weights.gan != 0.0) {
          std::vector<std::vector<DiscriminatorOutput>> fake_scores;
          for (size_t b = 0; b < batch.size(); ++b) {
            std::vector<DiscriminatorOutput> per_stage;
            for (size_t k = 0; k < stages.size(); ++k)
              per_stage.push_back(model_.discriminators()[k].score(
                  fakes[b][k], real_batch.sentences[b].detach()));
            fake_scores.push_back(std::move(per_stage));
          }
          parts.gan = generator_loss(fake_scores);
        }
        if (cfg.weights.fake_image != 0.0) {
          MatchingBatch fake_batch;
          for (size_t b = 0; b < batch.size(); ++b) {
            Tensor fake = cfg.end_to_end_fakes ? fakes[b].back() : fakes[b].back().detach();
            ImageEncoding ie = model_.image().encode(fit_resolution(fake, input_size));
            fake_batch.regions.push_back(ie.regions);
            fake_batch.global_vecs.push_back(ie.global_vec);
            fake_batch.words.push_back(real_batch.words[b]);
            fake_batch.sentences.push_back(real_batch.sentences[b]);
            fake_batch.real.push_back(real_batch.real[b]);
          }
          parts.fake_image_match = total_matching_loss(fake_batch, model_.config().gammas).total;
        }
      }

      if (cfg.use_captioner) {
        if (cfg.weights.caption != 0.0) {
          std::vector<Tensor> nll;
          for (size_t b = 0; b < batch.size(); ++b)
            nll.push_back(model_.captioner().caption_nll(
                real_batch.regions[b], caption_targets(batch[b], cap_choice[b])));
          parts.caption = mean(pack_scalars({static_cast<int>(nll.size())}, nll));
        }
        if (cfg.weights.fake_text != 0.0) {
          MatchingBatch cap_batch;
          for (size_t b = 0; b < batch.size(); ++b) {
            std::vector<int> generated = model_.captioner().generate(real_batch.regions[b].detach());
            if (generated.empty()) generated.push_back(Vocabulary::kUnk);
            TextEncoding te = model_.text().encode(generated);
            cap_batch.regions.push_back(real_batch.regions[b]);
            cap_batch.global_vecs.push_back(real_batch.global_vecs[b]);
            cap_batch.words.push_back(te.words);
            cap_batch.sentences.push_back(te.sentence);
            cap_batch.real.push_back(te.real);
          }
          parts.fake_text_match = total_matching_loss(cap_batch, model_.config().gammas).total;
        }
      }

      Tensor total = multimodal_loss(parts, cfg.weights);
      zero_all_grads(joint);
      total.backward();
      adam.step(joint);

      double disc_value = 0.0;
      if (train_disc) {
        std::vector<std::vector<DiscriminatorOutput>> real_scores, fake_scores;
        for (size_t b = 0; b < batch.size(); ++b) {
          std::vector<DiscriminatorOutput> on_real, on_fake;
          Tensor sentence = real_batch.sentences[b].detach();
          for (size_t k = 0; k < stages.size(); ++k) {
            Tensor real_k;
            {
              NoGradGuard guard;
              real_k = avg_pool2d(images[b], input_size / stages[k]);
            }
            on_real.push_back(model_.discriminators()[k].score(real_k, sentence));
            on_fake.push_back(model_.discriminators()[k].score(fakes[b][k].detach(), sentence));
          }
          real_scores.push_back(std::move(on_real));
          fake_scores.push_back(std::move(on_fake));
        }
        Tensor d_loss = discriminator_loss(real_scores, fake_scores);
        zero_all_grads(d_params);
        d_loss.backward();
        adam_d.step(d_params);
        disc_value = d_loss.value();
      }

      auto part_value = [](const Tensor& t) { return t.defined() ? t.value() : 0.0; };
      res.trace.push_back({total.value(), part_value(parts.match), part_value(parts.fake_image_match),
                           part_value(parts.fake_text_match), part_value(parts.gan),
                           part_value(parts.caption), disc_value});
      ++step;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        stop = true;
        break;
      }
    }
  }
  res.steps = step;
  write_outputs(res, "phase3", 3, model_.params_all(), cfg.seed, cfg.config_hash, cfg.out_dir);
  return res;
}

}  // namespace laviter
