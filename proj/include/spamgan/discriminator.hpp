#pragma once

#include "spamgan/scorer.hpp"

#include <span>
#include <vector>

namespace spamgan {

/// Per-timestep real/fake scores Q_D (sigmoid) and critic values V_D for a batch.
template <typename Scalar>
struct DiscriminatorOutput {
  Var<Scalar> q;  // (length * batch) x 1, in (0, 1)
  Var<Scalar> v;  // (length * batch) x 1, unconstrained
  std::vector<std::uint8_t> mask;
  int batch = 0;
  int length = 0;
};

/// Q_D and V_D of one sequence, indexed by trace position t - 1.
struct StepTraceD {
  std::vector<double> q;
  std::vector<double> v;
  std::vector<std::uint8_t> mask;
};

template <typename Scalar>
class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(ScorerConfig cfg, std::string prefix = "d/", std::string critic_prefix = "dcrit/")
      : scorer_(cfg, std::move(prefix), std::move(critic_prefix), 1) {}

  void init(ParamSet<Scalar>& params, std::mt19937_64& rng, double init_std) const {
    scorer_.init(params, rng, init_std);
  }

  DiscriminatorOutput<Scalar> forward(Graph<Scalar>& g, ParamSet<Scalar>& params, std::span<const TokenSequence> seqs,
                                      Mode mode = Mode::Eval, std::mt19937_64* rng = nullptr) const;

  const ScorerConfig& config() const { return scorer_.config(); }
  const std::string& prefix() const { return scorer_.prefix(); }
  const std::string& critic_prefix() const { return scorer_.critic_prefix(); }

 private:
  SequenceScorer<Scalar> scorer_;
};

/// batch x 1 mean of Q_D over unmasked positions.
template <typename Scalar>
Var<Scalar> sentence_scores(const DiscriminatorOutput<Scalar>& out);

/// mean(-log real) + mean(-log(1 - fake)), probabilities floored.
template <typename Scalar>
Var<Scalar> d_loss(Var<Scalar> real_scores, Var<Scalar> fake_scores);

/// Sum over unmasked t of (Q_D - V_D)^2, batch-averaged; Q_D is a constant.
template <typename Scalar>
Var<Scalar> d_critic_loss(const DiscriminatorOutput<Scalar>& out);

template <typename Scalar>
std::vector<StepTraceD> traces(const DiscriminatorOutput<Scalar>& out);

// Value-level forms.
double sentence_score(const StepTraceD& trace);
double d_loss(std::span<const double> real_scores, std::span<const double> fake_scores);
double d_critic_loss(std::span<const StepTraceD> traces);

}  // namespace spamgan
