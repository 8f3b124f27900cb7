#pragma once

#include "spamgan/evalkit.hpp"
#include "spamgan/trainer.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spamgan {

/// Everything a run needs, as one flat key/value document. Every field has a
/// default; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;

  // corpus
  int vocab_size = 1000;
  int max_len = 32;

  // backbones: "recurrent", or "attention" for a masked generator with
  // unmasked discriminator and classifier
  std::string backbone = "recurrent";
  int layers = 2;
  int hidden = 64;
  int heads = 2;
  int ffn = 256;
  int embed = 32;
  double dropout_embed_g = 0.2, dropout_core_g = 0.1, dropout_head_g = 0.2;
  double dropout_embed_dc = 0.4, dropout_core_dc = 0.1, dropout_head_dc = 0.4;
  double init_std = 0.02;
  bool shared_init = false;

  // generator
  int d_z = 10;
  std::string decode = "free";  // free | teacher | greedy
  double top_p = 0.9;

  // losses
  double beta = 1.0;
  std::string entropy_sign = "paper";  // paper | min-entropy
  bool alpha_offset = false;
  double class_prior = 0.5;

  // schedule
  int pretrain_g_epochs = 30, pretrain_d_epochs = 10, pretrain_c_epochs = 20, pretrain_critic_epochs = 10;
  int training_epochs = 15, g_adv_epochs = 1, g_mle_epochs = 1, d_epochs = 1, c_epochs = 1;
  int batch_size = 32;
  int max_batches_per_epoch = 0;
  double lr_g = 1e-3, lr_d = 1e-4, lr_c = 1e-4, lr_critic = 1e-3;
  double wd_g = 1e-7, wd_d = 1e-4, wd_c = 1e-4;
  double clip_norm = 5.0;
  double validation_fraction = 0.1;

  // paths
  std::string labeled_path;
  std::string unlabeled_path;
  std::string checkpoint_path = "spamgan.ckpt";
  std::string metrics_path = "metrics.jsonl";
  bool metrics_wall_clock = false;

  // synthetic corpus (synth-data, sweep)
  double synth_sigma = 1.0;
  int synth_labeled = 400, synth_unlabeled = 2000, synth_test = 400;
  int synth_keywords_per_class = 6;
  double synth_keyword_rate = 0.3;
  int synth_min_words = 4;
  double synth_zipf_exponent = 1.1;

  ModelConfig model_config() const;
  TrainSchedule schedule() const;
  SynthCorpusSpec synth_spec() const;

  /// Throws ConfigError on any out-of-range value.
  void validate() const;
};

/// Throws ConfigError naming the key for unknown keys and mistyped values.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& cfg);

/// Named presets: "desk" (the defaults) and "gpt2" (attention backbone with
/// the transformer-variant learning rates, decays and dropouts).
RunConfig preset(const std::string& name);

}  // namespace spamgan
