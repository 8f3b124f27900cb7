#pragma once

#include "spamgan/corpus.hpp"
#include "spamgan/generator.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace spamgan {

/// Classification metrics with spam as the positive class, plus generator
/// perplexity when measured.
struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long true_positive = 0;
  long false_positive = 0;
  long false_negative = 0;
  long true_negative = 0;
  double perplexity = std::numeric_limits<double>::quiet_NaN();
  long samples = 0;
  std::uint64_t seed = 0;

  bool operator==(const EvalReport&) const = default;
};

/// Precision, recall and F1 are 0 when their denominators are 0.
EvalReport accuracy_f1(std::span<const ClassLabel> predictions, std::span<const ClassLabel> truths);

/// exp(total -log G over non-pad targets / their count); <end> is a target,
/// <pad> is not. Noise is drawn from `rng`, one vector per sequence in order.
template <typename Scalar>
double perplexity(ParamSet<Scalar>& params, const Generator<Scalar>& gen, std::span<const TokenSequence> seqs,
                  std::span<const ClassLabel> classes, std::mt19937_64 rng, int batch_size = 64);

}  // namespace spamgan
