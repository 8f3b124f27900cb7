#pragma once

#include "spamgan/backbone.hpp"
#include "spamgan/corpus.hpp"
#include "spamgan/numcore.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace spamgan {

struct ScorerConfig {
  int vocab_size = 1000;
  int embed = 32;
  BackboneConfig backbone;
};

/// Per-timestep head outputs over a batch of T-token sequences, trace
/// position t = 1..T-1 at row (t - 1) * batch + b.
template <typename Scalar>
struct StepOutputs {
  Var<Scalar> head;    // from the state after y_t
  Var<Scalar> critic;  // from the (detached) state after y_{t-1}
  std::vector<std::uint8_t> mask;  // 0 where y_t is <pad>
  int batch = 0;
  int length = 0;  // T - 1
};

/// Embedding + backbone trunk with a score head under `prefix` and a critic
/// head under `critic_prefix`, both `outputs` wide. Critic gradients stop at
/// the trunk.
template <typename Scalar>
class SequenceScorer {
 public:
  SequenceScorer() = default;
  SequenceScorer(ScorerConfig cfg, std::string prefix, std::string critic_prefix, int outputs);

  void init(ParamSet<Scalar>& params, std::mt19937_64& rng, double init_std) const;

  /// Raw (pre-activation) head outputs.
  StepOutputs<Scalar> forward(Graph<Scalar>& g, ParamSet<Scalar>& params, std::span<const TokenSequence> seqs,
                              Mode mode, std::mt19937_64* rng) const;

  const ScorerConfig& config() const { return cfg_; }
  const std::string& prefix() const { return prefix_; }
  const std::string& critic_prefix() const { return critic_prefix_; }

 private:
  ScorerConfig cfg_;
  std::string prefix_;
  std::string critic_prefix_;
  int outputs_ = 1;
  Backbone<Scalar> backbone_;
};

/// Mean over unmasked positions for each sequence: (length * batch) x k in,
/// batch x k out. Throws when a sequence has no unmasked position.
template <typename Scalar>
Var<Scalar> average_steps(Var<Scalar> per_step, std::span<const std::uint8_t> mask, int batch);

/// Sum over unmasked positions of (target - estimate)^2 divided by batch,
/// with `target` held constant. Both are (length * batch) x 1.
template <typename Scalar>
Var<Scalar> masked_regression_loss(Var<Scalar> target, Var<Scalar> estimate, std::span<const std::uint8_t> mask,
                                   int batch);

}  // namespace spamgan
