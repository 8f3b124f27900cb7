#pragma once

#include "spamgan/corpus.hpp"
#include "spamgan/metrics.hpp"
#include "spamgan/trainer.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spamgan {

// ---- synthetic two-class corpus -------------------------------------------------

/// Sentences are Zipf-distributed fillers with class keywords sprinkled in.
/// Each keyword comes from the sentence's own class set with probability
/// sigma and from the union of both sets otherwise, so sigma = 0 makes the
/// classes identical and sigma = 1 makes the keyword sets decisive.
struct SynthCorpusSpec {
  int vocab_size = 50;  // including the four special tokens
  int max_len = 20;     // encoded length T, <start> and <end> included
  int min_words = 4;
  int keywords_per_class = 6;
  double keyword_rate = 0.3;  // chance that a word slot holds a keyword
  double zipf_exponent = 1.1;
  double sigma = 1.0;
  double spam_prior = 0.5;
  int labeled = 400;
  int unlabeled = 2000;
  int test = 400;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthCorpus {
  Vocab vocab;
  std::vector<std::string> spam_keywords;
  std::vector<std::string> nonspam_keywords;
  std::vector<TextRecord> labeled;
  std::vector<TextRecord> unlabeled;
  std::vector<TextRecord> test;
};

SynthCorpus make_synth_corpus(const SynthCorpusSpec& spec);

/// Encodes records into a dataset; labeled records must carry labels.
Dataset to_dataset(std::span<const TextRecord> labeled, std::span<const TextRecord> unlabeled, const Vocab& vocab,
                   int max_len);
std::vector<LabeledExample> encode_labeled(std::span<const TextRecord> records, const Vocab& vocab, int max_len);

// ---- evaluation -----------------------------------------------------------------

/// Classification metrics on `test` plus generator perplexity (true classes,
/// noise from `noise_seed`).
EvalReport evaluate(SpamGanModel& model, std::span<const LabeledExample> test, std::uint64_t noise_seed,
                    bool with_perplexity = true);

// ---- sweeps ---------------------------------------------------------------------

struct SweepSpec {
  SynthCorpusSpec corpus;
  ModelConfig model;
  TrainSchedule schedule;
  std::vector<double> labeled_fractions{1.0};
  std::vector<double> unlabeled_fractions{1.0};
  std::vector<std::uint64_t> seeds{0};
};

struct SweepCell {
  std::string model;  // base | full
  double labeled_fraction = 0.0;
  double unlabeled_fraction = 0.0;
  std::uint64_t seed = 0;
  EvalReport report;
};

struct SweepRow {
  std::string model;
  double labeled_fraction = 0.0;
  double unlabeled_fraction = 0.0;
  int seeds = 0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double f1_mean = 0.0, f1_std = 0.0;
  double perplexity_mean = 0.0, perplexity_std = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<SweepRow> rows;
};

/// A cell's training failed; the message carries its coordinates.
struct SweepCellError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Schedule of the classifier-only baseline: as many C_R epochs as `full`
/// performs in total, nothing else.
TrainSchedule base_schedule(const TrainSchedule& full);

/// Subsets the corpus pools for one cell: a seeded `labeled_fraction` of D_L
/// and `unlabeled_fraction` of D_U.
Dataset subset(const Dataset& full, double labeled_fraction, double unlabeled_fraction, std::uint64_t seed);

/// For every (labeled fraction, unlabeled fraction, seed) trains the base and
/// full models and evaluates both on the corpus's test set. Rows are ordered
/// by labeled fraction, unlabeled fraction, then base before full.
SweepResult sweep(const SweepSpec& spec, const std::function<void(const std::string&)>& progress = {});

std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace spamgan
