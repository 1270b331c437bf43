#include "laviter/cli/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "laviter/core/error.hpp"
#include "laviter/data/checkpoint.hpp"
#include "laviter/data/config.hpp"
#include "laviter/data/image_io.hpp"
#include "laviter/data/synthetic.hpp"
#include "laviter/eval/metrics.hpp"
#include "laviter/train/trainer.hpp"

namespace laviter {

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out;
  std::string data;
  std::string profile;
  std::string ablation;
  int64_t seed = -1;  // -1 means "not given on the command line"
  std::vector<std::string> sets;
};

void attach_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration file (key=value lines)");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--data", flags.data, "dataset root directory (train/ and test/ inside)");
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_option("--profile", flags.profile, "model profile: desk or paper");
  cmd->add_option("--set", flags.sets, "config override, key=value, repeatable");
}

// Merges config file, profile, flag overrides; flags win over file keys.
struct Context {
  RunConfig cfg;
  ModelConfig model_cfg;
  uint64_t seed = 1;
  std::string out;
  std::string data;
  std::string ablation = "full";
};

Context make_context(const CommonFlags& flags) {
  Context ctx;
  if (!flags.config_path.empty()) ctx.cfg = RunConfig::parse_file(flags.config_path);
  for (const auto& pair : flags.sets) ctx.cfg.set_pair(pair);

  std::string profile = !flags.profile.empty() ? flags.profile : ctx.cfg.get_string("profile", "desk");
  ctx.cfg.set("profile", profile);
  ctx.model_cfg = ModelConfig::named_profile(profile);
  ctx.model_cfg.apply_overrides(ctx.cfg);

  if (flags.seed >= 0)
    ctx.seed = static_cast<uint64_t>(flags.seed);
  else
    ctx.seed = static_cast<uint64_t>(ctx.cfg.get_int("seed", 1));
  ctx.cfg.set("seed", std::to_string(ctx.seed));

  // Paths stay out of the stored config so the hash reflects run semantics,
  // not where outputs happen to land.
  ctx.out = !flags.out.empty() ? flags.out : ctx.cfg.get_string("out", "");
  ctx.data = !flags.data.empty() ? flags.data : ctx.cfg.get_string("data", "");

  ctx.ablation = !flags.ablation.empty() ? flags.ablation : ctx.cfg.get_string("ablation", "full");
  ctx.cfg.set("ablation", ctx.ablation);
  return ctx;
}

std::string require_out(const Context& ctx) {
  if (ctx.out.empty()) throw ConfigError("no output directory (use --out or config key out)");
  return ctx.out;
}

std::string require_data(const Context& ctx) {
  if (ctx.data.empty()) throw ConfigError("no dataset directory (use --data or config key data)");
  return ctx.data;
}

Dataset load_split(const Context& ctx, const std::string& split) {
  return load_dataset(require_data(ctx) + "/" + split);
}

LaviterModel build_model(const Context& ctx, const Dataset& data) {
  return LaviterModel(ctx.model_cfg, data.vocab.size(), ctx.seed);
}

size_t load_ckpt(const std::string& label, const std::string& path, LaviterModel& model) {
  CheckpointData data = load_checkpoint(path);
  ParamList all = model.params_all();
  std::vector<std::string> fresh = load_into(data, all);
  std::printf("%s: loaded %zu tensors from %s (%zu parameters left fresh)\n", label.c_str(),
              data.entries.size(), path.c_str(), fresh.size());
  return fresh.size();
}

std::string require_key(const Context& ctx, const std::string& key, const std::string& why) {
  std::string v = ctx.cfg.get_string(key, "");
  if (v.empty()) throw ConfigError(why + " (set config key " + key + ")");
  return v;
}

std::vector<Tensor> load_split_images(const Dataset& data) {
  NoGradGuard guard;
  std::vector<Tensor> images;
  images.reserve(data.records.size());
  for (const auto& rec : data.records) images.push_back(image_to_tensor(read_ppm(data.image_path(rec))));
  return images;
}

std::vector<std::vector<int>> eval_texts(const Dataset& data) {
  std::vector<std::vector<int>> texts;
  texts.reserve(data.records.size());
  for (const auto& rec : data.records) texts.push_back(data.vocab.encode(rec.captions.at(0)));
  return texts;
}

int cmd_gen_data(const Context& ctx) {
  CorpusSpec spec;
  spec.train_count = static_cast<int>(ctx.cfg.get_int("train_count", 512));
  spec.test_count = static_cast<int>(ctx.cfg.get_int("test_count", 128));
  spec.image_size = static_cast<int>(ctx.cfg.get_int("image_size", 64));
  spec.seed = ctx.seed;
  std::string out = require_out(ctx);
  generate_corpus(out, spec);
  std::printf("gen-data: wrote %d train and %d test records under %s\n", spec.train_count,
              spec.test_count, out.c_str());
  return 0;
}

int cmd_train_vta(const Context& ctx) {
  Dataset data = load_split(ctx, "train");
  LaviterModel model = build_model(ctx, data);
  std::string init = ctx.cfg.get_string("init_vta", "");
  if (!init.empty()) load_ckpt("train-vta", init, model);

  Trainer trainer(model, data);
  Phase1Config cfg;
  cfg.epochs = static_cast<int>(ctx.cfg.get_int("phase1_epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(ctx.cfg.get_int("batch_size", cfg.batch_size));
  cfg.lr = ctx.cfg.get_double("phase1_lr", cfg.lr);
  cfg.weight_decay = ctx.cfg.get_double("phase1_wd", cfg.weight_decay);
  cfg.max_steps = static_cast<int>(ctx.cfg.get_int("max_steps", 0));
  cfg.seed = ctx.seed;
  cfg.config_hash = ctx.cfg.hash();
  cfg.out_dir = require_out(ctx);
  PhaseResult res = trainer.run_phase1(cfg);
  std::printf("train-vta: %d steps, final loss %.6f, checkpoint %s\n", res.steps,
              res.trace.empty() ? 0.0 : res.trace.back()[0], res.checkpoint_path.c_str());
  return 0;
}

int cmd_train_tim(const Context& ctx) {
  Dataset data = load_split(ctx, "train");
  LaviterModel model = build_model(ctx, data);
  load_ckpt("train-tim", require_key(ctx, "init_vta", "phase 2 needs the phase-1 checkpoint"),
            model);

  Trainer trainer(model, data);
  Phase2GanConfig cfg;
  cfg.epochs = static_cast<int>(ctx.cfg.get_int("phase2_gan_epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(ctx.cfg.get_int("batch_size", cfg.batch_size));
  cfg.gen_lr = ctx.cfg.get_double("gen_lr", cfg.gen_lr);
  cfg.disc_lr = ctx.cfg.get_double("disc_lr", cfg.disc_lr);
  cfg.lambda_fake_image = ctx.cfg.get_double("tim_lambda_fake", cfg.lambda_fake_image);
  cfg.weight_decay = ctx.cfg.get_double("phase2_wd", cfg.weight_decay);
  cfg.max_steps = static_cast<int>(ctx.cfg.get_int("max_steps", 0));
  cfg.seed = ctx.seed;
  cfg.config_hash = ctx.cfg.hash();
  cfg.out_dir = require_out(ctx);
  PhaseResult res = trainer.run_phase2_gan(cfg);
  std::printf("train-tim: %d steps, final G %.6f D %.6f, checkpoint %s\n", res.steps,
              res.trace.empty() ? 0.0 : res.trace.back()[0],
              res.trace.empty() ? 0.0 : res.trace.back()[1], res.checkpoint_path.c_str());
  return 0;
}

int cmd_train_itm(const Context& ctx) {
  Dataset data = load_split(ctx, "train");
  LaviterModel model = build_model(ctx, data);
  load_ckpt("train-itm", require_key(ctx, "init_vta", "phase 2 needs the phase-1 checkpoint"),
            model);

  Trainer trainer(model, data);
  Phase2CapConfig cfg;
  cfg.epochs = static_cast<int>(ctx.cfg.get_int("phase2_cap_epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(ctx.cfg.get_int("batch_size", cfg.batch_size));
  cfg.lr = ctx.cfg.get_double("cap_lr", cfg.lr);
  cfg.decay_epoch = static_cast<int>(ctx.cfg.get_int("cap_decay_epoch", cfg.decay_epoch));
  cfg.decay_factor = ctx.cfg.get_double("cap_decay_factor", cfg.decay_factor);
  cfg.weight_decay = ctx.cfg.get_double("phase2_wd", cfg.weight_decay);
  cfg.max_steps = static_cast<int>(ctx.cfg.get_int("max_steps", 0));
  cfg.seed = ctx.seed;
  cfg.config_hash = ctx.cfg.hash();
  cfg.out_dir = require_out(ctx);
  PhaseResult res = trainer.run_phase2_captioner(cfg);
  std::printf("train-itm: %d steps, final NLL %.6f, checkpoint %s\n", res.steps,
              res.trace.empty() ? 0.0 : res.trace.back()[0], res.checkpoint_path.c_str());
  return 0;
}

int cmd_train_joint(const Context& ctx) {
  Dataset data = load_split(ctx, "train");
  LaviterModel model = build_model(ctx, data);
  AblationProfile profile = ablation_profile(ctx.ablation);

  load_ckpt("train-joint", require_key(ctx, "init_vta", "phase 3 needs the phase-1 checkpoint"),
            model);
  if (profile.use_generator)
    load_ckpt("train-joint",
              require_key(ctx, "init_tim", "phase 3 with the image branch needs the TIM checkpoint"),
              model);
  if (profile.use_captioner)
    load_ckpt("train-joint",
              require_key(ctx, "init_itm", "phase 3 with the text branch needs the ITM checkpoint"),
              model);

  Trainer trainer(model, data);
  Phase3Config cfg;
  cfg.use_generator = profile.use_generator;
  cfg.use_captioner = profile.use_captioner;
  cfg.backbone_frozen = profile.backbone_frozen;
  cfg.weights = profile.weights;
  cfg.weights.match = ctx.cfg.get_double("lambda_m", cfg.weights.match);
  cfg.weights.fake_image = ctx.cfg.get_double("lambda_fake_image", cfg.weights.fake_image);
  cfg.weights.fake_text = ctx.cfg.get_double("lambda_fake_text", cfg.weights.fake_text);
  cfg.weights.gan = ctx.cfg.get_double("lambda_gan", cfg.weights.gan);
  cfg.weights.caption = ctx.cfg.get_double("lambda_caption", cfg.weights.caption);
  cfg.epochs = static_cast<int>(ctx.cfg.get_int("phase3_epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(ctx.cfg.get_int("batch_size", cfg.batch_size));
  cfg.lr = ctx.cfg.get_double("phase3_lr", cfg.lr);
  cfg.disc_lr = ctx.cfg.get_double("disc_lr", cfg.disc_lr);
  cfg.weight_decay = ctx.cfg.get_double("phase3_wd", cfg.weight_decay);
  cfg.frozen_blocks = static_cast<int>(ctx.cfg.get_int("frozen_blocks", cfg.frozen_blocks));
  cfg.end_to_end_fakes = ctx.cfg.get_bool("end_to_end", cfg.end_to_end_fakes);
  cfg.max_steps = static_cast<int>(ctx.cfg.get_int("max_steps", 0));
  cfg.seed = ctx.seed;
  cfg.config_hash = ctx.cfg.hash();
  cfg.out_dir = require_out(ctx);
  PhaseResult res = trainer.run_phase3(cfg);
  std::printf("train-joint[%s]: %d steps, final loss %.6f, checkpoint %s\n", ctx.ablation.c_str(),
              res.steps, res.trace.empty() ? 0.0 : res.trace.back()[0],
              res.checkpoint_path.c_str());
  return 0;
}

void load_eval_checkpoints(const Context& ctx, LaviterModel& model) {
  std::string joined = require_key(ctx, "checkpoint", "evaluation needs a checkpoint");
  std::stringstream in(joined);
  std::string path;
  while (std::getline(in, path, ','))
    if (!path.empty()) load_ckpt("eval", path, model);
}

int cmd_eval(const Context& ctx, int top_k, int pool) {
  std::string split = ctx.cfg.get_string("eval_split", "test");
  Dataset data = load_split(ctx, split);
  LaviterModel model = build_model(ctx, data);
  load_eval_checkpoints(ctx, model);

  std::vector<Tensor> images = load_split_images(data);
  std::vector<std::vector<int>> texts = eval_texts(data);

  ScoreWeights weights;
  weights.sentence = ctx.cfg.get_double("rank_sentence_weight", weights.sentence);
  weights.word = ctx.cfg.get_double("rank_word_weight", weights.word);
  auto scores = matching_score_matrix(model, images, texts, weights);
  RetrievalResult retrieval = r_precision_matrix(scores, pool, top_k, ctx.seed);

  std::vector<size_t> record_ids(data.records.size());
  for (size_t i = 0; i < record_ids.size(); ++i) record_ids[i] = i;
  AimcosResult true_attrs = aimcos_eval(model, data, record_ids, images, 0);
  AimcosResult permuted = aimcos_eval(model, data, record_ids, images, ctx.seed + 0x5EED);

  char buf[96];
  std::string report;
  auto put = [&report, &buf](const std::string& key, double v) {
    std::snprintf(buf, sizeof(buf), "%s=%.17g\n", key.c_str(), v);
    report += buf;
  };
  report += "split=" + split + "\n";
  report += "records=" + std::to_string(data.records.size()) + "\n";
  report += "pool=" + std::to_string(pool) + "\n";
  report += "top_k=" + std::to_string(top_k) + "\n";
  put("r_precision_image_to_text", retrieval.image_to_text);
  put("r_precision_text_to_image", retrieval.text_to_image);
  put("r_precision_average", retrieval.average);
  put("aimcos", true_attrs.score);
  put("aimcos_permuted", permuted.score);
  put("aimcos_margin", true_attrs.score - permuted.score);
  report += "aimcos_skipped=" + std::to_string(true_attrs.skipped) + "\n";

  if (ctx.cfg.get_bool("eval_bleu", true)) {
    NoGradGuard guard;
    std::vector<std::vector<int>> candidates;
    std::vector<std::vector<std::vector<int>>> references;
    for (size_t i = 0; i < data.records.size(); ++i) {
      ImageEncoding ie = model.image().encode(images[i]);
      candidates.push_back(model.captioner().generate(ie.regions));
      std::vector<std::vector<int>> refs;
      for (const auto& cap : data.records[i].captions) refs.push_back(data.vocab.encode(cap));
      references.push_back(std::move(refs));
    }
    for (int n = 1; n <= 4; ++n) {
      BleuResult bleu = corpus_bleu(candidates, references, n);
      put("bleu" + std::to_string(n), bleu.score);
      if (n == 1)
        report += "bleu_empty_candidates=" + std::to_string(bleu.empty_candidates) + "\n";
    }
  }

  std::string out = require_out(ctx);
  std::filesystem::create_directories(out);
  atomic_write(out + "/eval_report.txt", report);
  std::fputs(report.c_str(), stdout);
  std::printf("eval: report written to %s/eval_report.txt\n", out.c_str());
  return 0;
}

int cmd_export_embeddings(const Context& ctx) {
  std::string split = ctx.cfg.get_string("eval_split", "test");
  Dataset data = load_split(ctx, split);
  LaviterModel model = build_model(ctx, data);
  load_eval_checkpoints(ctx, model);

  std::vector<Tensor> images = load_split_images(data);
  std::vector<EmbeddingRow> rows = collect_embeddings(model, data, images);
  std::string out = require_out(ctx);
  std::filesystem::create_directories(out);
  write_embeddings(out + "/embeddings.txt", model.config().model_dim(), rows);
  std::printf("export-embeddings: %zu rows written to %s/embeddings.txt\n", rows.size(),
              out.c_str());
  return 0;
}

int cmd_simmap(const Context& ctx) {
  std::string split = ctx.cfg.get_string("eval_split", "test");
  Dataset data = load_split(ctx, split);
  LaviterModel model = build_model(ctx, data);
  load_eval_checkpoints(ctx, model);

  std::vector<Tensor> images = load_split_images(data);
  std::vector<std::string> labels;
  auto map = similarity_map_eval(model, data, images, &labels);

  std::string csv = "class";
  for (const auto& label : labels) csv += "," + label;
  csv += "\n";
  char buf[64];
  for (size_t i = 0; i < map.size(); ++i) {
    csv += labels[i];
    for (double v : map[i]) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      csv += buf;
    }
    csv += "\n";
  }
  std::string out = require_out(ctx);
  std::filesystem::create_directories(out);
  atomic_write(out + "/simmap.csv", csv);
  std::fputs(csv.c_str(), stdout);
  std::printf("simmap: %zux%zu matrix written to %s/simmap.csv\n", map.size(), map.size(),
              out.c_str());
  return 0;
}

// Maps an external annotation file (one JSON object per line with keys
// image, captions, and optionally attributes, class, id) onto the native
// record format. Images are referenced, not copied.
int cmd_convert(const Context& ctx, const std::string& in_path) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw DataError("cannot open annotation file " + in_path);

  std::vector<DatasetRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(in_path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    DatasetRecord rec;
    rec.id = j.value("id", "record-" + std::to_string(lineno));
    rec.image = j.at("image").get<std::string>();
    for (const auto& cap : j.at("captions")) rec.captions.push_back(cap.get<std::string>());
    if (j.contains("attributes"))
      for (const auto& attr : j.at("attributes")) rec.attributes.push_back(attr.get<std::string>());
    if (rec.attributes.empty() && !rec.captions.empty()) rec.attributes.push_back(rec.captions[0]);
    rec.class_label = j.value("class", rec.attributes.empty() ? "unknown" : rec.attributes[0]);
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw DataError(in_path + " holds no records");

  std::vector<std::string> texts;
  for (const auto& rec : records)
    for (const auto& cap : rec.captions) texts.push_back(cap);
  Vocabulary vocab = Vocabulary::build(texts);

  std::string out = require_out(ctx);
  std::filesystem::create_directories(out);
  save_records(out + "/annotations.jsonl", records);
  vocab.save(out + "/vocab.txt");
  std::printf("convert: %zu records, vocabulary of %d tokens written to %s\n", records.size(),
              vocab.size(), out.c_str());
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"joint visual-textual representation learning"};
  app.require_subcommand(1);

  CommonFlags flags;
  int top_k = 3;
  int pool = 100;
  std::string convert_in;

  CLI::App* gen = app.add_subcommand("gen-data", "render the synthetic shapes corpus");
  attach_common(gen, flags);
  CLI::App* vta = app.add_subcommand("train-vta", "phase 1: train the matching encoders");
  attach_common(vta, flags);
  CLI::App* tim = app.add_subcommand("train-tim", "phase 2: pretrain the image generator");
  attach_common(tim, flags);
  CLI::App* itm = app.add_subcommand("train-itm", "phase 2: pretrain the captioner");
  attach_common(itm, flags);
  CLI::App* joint = app.add_subcommand("train-joint", "phase 3: joint multimodal training");
  attach_common(joint, flags);
  joint->add_option("--ablation", flags.ablation,
                    "full, vta-frozen, vta-trainable, img2txt-only or txt2img-only");
  CLI::App* eval = app.add_subcommand("eval", "retrieval, attribute and caption metrics");
  attach_common(eval, flags);
  eval->add_option("--top-k", top_k, "retrieval cutoff");
  eval->add_option("--pool", pool, "retrieval pool size");
  CLI::App* exp = app.add_subcommand("export-embeddings", "write image and label embeddings");
  attach_common(exp, flags);
  CLI::App* sim = app.add_subcommand("simmap", "class-by-class similarity matrix");
  attach_common(sim, flags);
  CLI::App* conv = app.add_subcommand("convert", "map external annotations to the native format");
  attach_common(conv, flags);
  conv->add_option("--in", convert_in, "external annotation file (JSON lines)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    Context ctx = make_context(flags);
    if (gen->parsed()) return cmd_gen_data(ctx);
    if (vta->parsed()) return cmd_train_vta(ctx);
    if (tim->parsed()) return cmd_train_tim(ctx);
    if (itm->parsed()) return cmd_train_itm(ctx);
    if (joint->parsed()) return cmd_train_joint(ctx);
    if (eval->parsed()) return cmd_eval(ctx, top_k, pool);
    if (exp->parsed()) return cmd_export_embeddings(ctx);
    if (sim->parsed()) return cmd_simmap(ctx);
    if (conv->parsed()) return cmd_convert(ctx, convert_in);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace laviter
