#pragma once

#include "spamgan/scorer.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace spamgan {

/// Per-timestep class distributions Q_C (softmax over {nonspam, spam}) and
/// per-class critic values V_C. Column k is class k.
template <typename Scalar>
struct ClassifierOutput {
  Var<Scalar> q;  // (length * batch) x 2
  Var<Scalar> v;  // (length * batch) x 2
  std::vector<std::uint8_t> mask;
  int batch = 0;
  int length = 0;
};

struct StepTraceC {
  std::array<std::vector<double>, kNumClasses> q;
  std::array<std::vector<double>, kNumClasses> v;
  std::vector<std::uint8_t> mask;
};

/// `Paper` subtracts beta * H inside the minimized loss; `MinEntropy` adds it.
enum class EntropySign { Paper, MinEntropy };

std::string entropy_sign_name(EntropySign s);
EntropySign parse_entropy_sign(const std::string& s);

template <typename Scalar>
class Classifier {
 public:
  Classifier() = default;
  explicit Classifier(ScorerConfig cfg, std::string prefix = "c/", std::string critic_prefix = "ccrit/")
      : scorer_(cfg, std::move(prefix), std::move(critic_prefix), kNumClasses) {}

  void init(ParamSet<Scalar>& params, std::mt19937_64& rng, double init_std) const {
    scorer_.init(params, rng, init_std);
  }

  ClassifierOutput<Scalar> forward(Graph<Scalar>& g, ParamSet<Scalar>& params, std::span<const TokenSequence> seqs,
                                   Mode mode = Mode::Eval, std::mt19937_64* rng = nullptr) const;

  const ScorerConfig& config() const { return scorer_.config(); }
  const std::string& prefix() const { return scorer_.prefix(); }
  const std::string& critic_prefix() const { return scorer_.critic_prefix(); }

 private:
  SequenceScorer<Scalar> scorer_;
};

/// batch x 2 sentence-level class distributions.
template <typename Scalar>
Var<Scalar> sentence_scores(const ClassifierOutput<Scalar>& out);

/// mean -log C(label | y) over a labeled real batch.
template <typename Scalar>
Var<Scalar> c_loss_real(Var<Scalar> scores, std::span<const ClassLabel> labels);

/// mean [-log C(c | y) -/+ beta * H(C(. | y))] over a generated batch.
template <typename Scalar>
Var<Scalar> c_loss_fake(Var<Scalar> scores, std::span<const ClassLabel> classes, double beta, EntropySign sign);

/// Sum over unmasked t of (Q_C(c) - V_C(c))^2 for each sequence's class c,
/// batch-averaged; Q_C is a constant.
template <typename Scalar>
Var<Scalar> c_critic_loss(const ClassifierOutput<Scalar>& out, std::span<const ClassLabel> classes);

template <typename Scalar>
std::vector<StepTraceC> traces(const ClassifierOutput<Scalar>& out);

/// Spam iff the spam score exceeds 0.5; an exact tie is non-spam.
ClassLabel predict(double spam_score);
ClassLabel predict(const StepTraceC& trace);

// Value-level forms.
double sentence_score(const StepTraceC& trace, ClassLabel c);
/// Shannon entropy (natural log) of a two-class distribution (s, 1 - s).
double binary_entropy(double s);
double c_loss_real(std::span<const double> true_class_scores);
double c_loss_fake(std::span<const double> intended_class_scores, double beta, EntropySign sign = EntropySign::Paper);
double c_critic_loss(std::span<const StepTraceC> traces, std::span<const ClassLabel> classes);

}  // namespace spamgan
