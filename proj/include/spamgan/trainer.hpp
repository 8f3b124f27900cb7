#pragma once

#include "spamgan/classifier.hpp"
#include "spamgan/corpus.hpp"
#include "spamgan/discriminator.hpp"
#include "spamgan/generator.hpp"
#include "spamgan/metrics.hpp"
#include "spamgan/optim.hpp"
#include "spamgan/rl.hpp"
#include "spamgan/rng.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace spamgan {

struct ModelConfig {
  int vocab_size = 1000;
  int max_len = 32;
  int embed = 32;
  NoiseSpec noise;
  BackboneConfig g_backbone;
  BackboneConfig dc_backbone;  // discriminator and classifier
  double init_std = 0.02;
  bool shared_init = false;  // copy the generator's initial trunk into D and C where shapes agree
};

/// Generator, discriminator and classifier over one parameter set with
/// prefixes g/, d/, dcrit/, c/, ccrit/.
class SpamGanModel {
 public:
  SpamGanModel(ModelConfig cfg, std::uint64_t seed);

  ModelConfig config;
  ParamSet<float> params;
  Generator<float> generator;
  Discriminator<float> discriminator;
  Classifier<float> classifier;

  /// Sentence-level spam scores in eval mode.
  std::vector<double> spam_scores(std::span<const TokenSequence> seqs, int batch_size = 64);
  std::vector<ClassLabel> classify(std::span<const TokenSequence> seqs, int batch_size = 64);
};

/// Names of the five parameter groups, in update-partition order.
inline const char* const kParamGroups[] = {"g/", "d/", "dcrit/", "c/", "ccrit/"};

struct TrainSchedule {
  int pretrain_g_epochs = 30;
  int pretrain_d_epochs = 10;
  int pretrain_c_epochs = 20;
  int pretrain_critic_epochs = 10;
  int training_epochs = 15;
  int g_adv_epochs = 1;
  int g_mle_epochs = 1;
  int d_epochs = 1;
  int c_epochs = 1;
  int batch_size = 32;
  int max_batches_per_epoch = 0;  // 0 = full pass
  AdamConfig g_opt{1e-3, 1e-7};
  AdamConfig d_opt{1e-4, 1e-4};
  AdamConfig c_opt{1e-4, 1e-4};
  AdamConfig critic_opt{1e-3, 0.0};
  DecodeStrategy decode;
  double beta = 1.0;
  EntropySign entropy_sign = EntropySign::Paper;
  bool alpha_offset = false;
  ClassPrior prior;
  double validation_fraction = 0.1;
  bool metrics_wall_clock = false;

  void validate() const;
};

/// One line of the metrics file. Absent values are written as null.
struct MetricsRecord {
  MetricsRecord() = default;
  MetricsRecord(std::string phase, int epoch) : phase(std::move(phase)), epoch(epoch) {}

  std::string phase;  // pretrain-g | pretrain-d | pretrain-c | pretrain-critic | adv
  int epoch = 0;
  std::optional<double> mle_loss;
  std::optional<double> d_loss;
  std::optional<double> d_critic_loss;
  std::optional<double> c_real_loss;
  std::optional<double> c_fake_loss;
  std::optional<double> c_critic_loss;
  std::optional<double> surrogate_loss;
  std::optional<double> mean_reward;
  std::optional<double> mean_advantage;
  std::optional<double> val_accuracy;
  std::optional<double> val_f1;
  std::optional<double> val_perplexity;
  std::optional<double> wall_clock_s;
};

nlohmann::json to_json(const MetricsRecord& r);

/// A generated batch together with everything needed to score it and to
/// rebuild its log-probabilities inside a graph.
struct FakeBatch {
  std::vector<TokenSequence> seqs;
  std::vector<TokenSequence> contexts;  // conditioning inputs: the fakes, or the teacher-forcing anchors
  std::vector<ClassLabel> classes;
  Matrix<double> z;
  std::vector<std::vector<double>> log_probs;
};

/// Runs the pretraining phase and the adversarial loop over a model it
/// borrows for its lifetime.
class Trainer {
 public:
  Trainer(SpamGanModel& model, TrainSchedule schedule, std::uint64_t seed);

  /// Appends each record to `out` as one JSON line as soon as it is complete.
  void set_metrics_stream(std::ostream* out) { metrics_out_ = out; }

  /// Holds out the validation split, then pretrains and trains adversarially.
  void train(const Dataset& data);
  void pretrain(const Dataset& data);
  void adversarial_train(const Dataset& data);

  // Single epochs, exposed for tests and baselines. Each returns its mean loss.
  double epoch_g_mle(const Dataset& data, const std::string& tag);
  double epoch_d(const Dataset& data, const std::string& tag, bool with_critic, double* critic_loss = nullptr);
  double epoch_c_real(const Dataset& data, const std::string& tag);
  /// Alternates labeled C_R batches with generated C_G batches; critic too.
  void epoch_c_adv(const Dataset& data, const std::string& tag, MetricsRecord& rec);
  void epoch_critics(const Dataset& data, const std::string& tag, MetricsRecord& rec);
  void epoch_g_adv(const Dataset& data, const std::string& tag, MetricsRecord& rec);

  /// Generates `count` sequences under the schedule's decode strategy with
  /// prior-sampled classes; `anchors` feed teacher forcing.
  FakeBatch make_fakes(std::span<const TokenSequence> anchors, std::size_t count, std::mt19937_64& rng);

  /// Validation metrics on the held-out split (empty split: all null).
  void fill_validation(MetricsRecord& rec);

  const std::vector<std::string>& phase_log() const { return phase_log_; }
  const std::vector<MetricsRecord>& records() const { return records_; }
  const Dataset& validation() const { return validation_; }
  const TrainSchedule& schedule() const { return schedule_; }

 private:
  void emit(MetricsRecord rec);
  std::vector<Batch> batches(const Dataset& data, Pool pool, const std::string& tag) const;
  std::size_t pass_length(const Dataset& data, Pool pool) const;
  double step(Graph<float>& g, Var<float> loss, std::initializer_list<OptimState<float>*> groups, const std::string& tag);
  std::mt19937_64 stream(const std::string& name) const { return streams_.stream(name); }

  SpamGanModel& model_;
  TrainSchedule schedule_;
  RngStreams streams_;
  OptimState<float> g_opt_, d_opt_, dcrit_opt_, c_opt_, ccrit_opt_;
  Dataset validation_;
  std::vector<std::string> phase_log_;
  std::vector<MetricsRecord> records_;
  std::ostream* metrics_out_ = nullptr;
  double started_ = 0.0;
};

/// Moves a seeded `fraction` of the labeled pool into a separate dataset.
Dataset split_validation(Dataset& data, double fraction, std::uint64_t seed);

// ---- checkpoints ---------------------------------------------------------------

struct CheckpointError : std::runtime_error {
  enum class Kind { Unrecognized, VersionMismatch, CorruptHeader, ShapeMismatch, Truncated, Io };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct LoadedCheckpoint {
  SpamGanModel model;
  Vocab vocab;
  std::uint64_t root_seed = 0;
  nlohmann::json schedule;
  nlohmann::json config;
};

/// "SGCK", u32 version, u64 manifest length, JSON manifest, little-endian f32
/// payload in manifest order.
void save_checkpoint(const std::string& path, const SpamGanModel& model, const Vocab& vocab, std::uint64_t root_seed,
                     const nlohmann::json& schedule, const nlohmann::json& config);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace spamgan
