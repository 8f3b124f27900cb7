#pragma once

#include "spamgan/backbone.hpp"
#include "spamgan/corpus.hpp"
#include "spamgan/numcore.hpp"

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace spamgan {

/// Standard normal noise of dimension `dim`, one draw per sentence.
struct NoiseSpec {
  int dim = 10;
};

/// batch x dim matrix of N(0, 1) draws.
Matrix<double> sample_noise(const NoiseSpec& spec, int batch, std::mt19937_64& rng);

enum class DecodeKind { Greedy, TopPFree, TopPTeacher };

std::string decode_kind_name(DecodeKind k);
DecodeKind parse_decode_kind(const std::string& s);  // greedy | free | teacher

struct DecodeStrategy {
  DecodeKind kind = DecodeKind::TopPFree;
  double p = 0.9;
  int max_length = 32;  // total sequence length T, <start> included
};

struct GeneratorConfig {
  int vocab_size = 1000;
  int embed = 32;
  NoiseSpec noise;
  BackboneConfig backbone;
};

/// Class-conditional autoregressive language model. Every timestep's input is
/// [embedding(y_t), z, onehot(c)].
template <typename Scalar>
class Generator {
 public:
  Generator() = default;
  explicit Generator(GeneratorConfig cfg, std::string prefix = "g/");

  void init(ParamSet<Scalar>& params, std::mt19937_64& rng, double init_std) const;

  /// Next-token logits for every input position: ((length * B) x V), row
  /// t * B + b predicting the token after ids[t * B + b].
  Var<Scalar> logits(Graph<Scalar>& g, ParamSet<Scalar>& params, std::span<const int> ids, int batch, int length,
                     std::span<const ClassLabel> classes, const Matrix<double>& z, Mode mode,
                     std::mt19937_64* rng) const;

  const GeneratorConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }
  int vocab_size() const { return cfg_.vocab_size; }

 private:
  GeneratorConfig cfg_;
  std::string prefix_;
  Backbone<Scalar> backbone_;
};

/// Mean over the batch of the summed next-token cross-entropy; <pad> targets
/// are masked, <end> is counted.
template <typename Scalar>
Var<Scalar> mle_loss(Graph<Scalar>& g, ParamSet<Scalar>& params, const Generator<Scalar>& gen,
                     std::span<const TokenSequence> seqs, std::span<const ClassLabel> classes,
                     const Matrix<double>& z, Mode mode = Mode::Eval, std::mt19937_64* rng = nullptr);

/// ((T-1) * B) x 1 column of log G(targets[t+1] | contexts[0..t]) under the raw
/// model, plus its mask (0 where the target is <pad>). The row for trace
/// position t (1-based) is (t - 1) * B + b.
template <typename Scalar>
struct StepLogProbs {
  Var<Scalar> values;
  std::vector<std::uint8_t> mask;
};

template <typename Scalar>
StepLogProbs<Scalar> step_log_probs(Graph<Scalar>& g, ParamSet<Scalar>& params, const Generator<Scalar>& gen,
                                    std::span<const TokenSequence> contexts, std::span<const TokenSequence> targets,
                                    std::span<const ClassLabel> classes, const Matrix<double>& z, Mode mode,
                                    std::mt19937_64* rng);

/// Distribution over the vocabulary for the token following `prefix`.
template <typename Scalar>
std::vector<double> step_dist(ParamSet<Scalar>& params, const Generator<Scalar>& gen, std::span<const int> prefix,
                              ClassLabel c, std::span<const double> z);

// ---- decoding ----------------------------------------------------------------

struct TopPResult {
  std::vector<double> probs;  // renormalized over the kept set, 0 elsewhere
  std::vector<int> kept;      // kept ids in descending-probability order
  double kept_mass = 0.0;
};

/// Smallest prefix of the tokens (descending probability, ties by ascending id)
/// whose cumulative mass reaches p, renormalized.
TopPResult top_p_filter(std::span<const double> dist, double p);

/// Given time-major ids (length * batch), returns the (length * batch) x V
/// next-token distributions.
using NextTokenFn = std::function<Matrix<double>(std::span<const int> ids, int batch, int length)>;

/// Wraps a generator in eval mode as a NextTokenFn for fixed classes and noise.
template <typename Scalar>
NextTokenFn next_token_fn(ParamSet<Scalar>& params, const Generator<Scalar>& gen, std::vector<ClassLabel> classes,
                          Matrix<double> z);

struct SampleResult {
  std::vector<TokenSequence> seqs;
  std::vector<std::vector<double>> log_probs;  // per emitted token, under the unfiltered distribution
};

/// Free-running decoding from <start> until <end> or the length limit.
/// <start> and <pad> are never emitted.
SampleResult sample_free(const NextTokenFn& model, int batch, const DecodeStrategy& strategy, std::mt19937_64& rng);

/// One parallel pass conditioned on the anchors' own prefixes; position t emits
/// a token drawn from the top-p filtered distribution given anchor[0..t-1].
/// The fake has the anchor's length.
SampleResult teacher_forced_sample(const NextTokenFn& model, std::span<const TokenSequence> anchors, double p,
                                   std::mt19937_64& rng);

}  // namespace spamgan
