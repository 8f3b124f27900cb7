#include "doctest.h"
#include "fixtures.hpp"

#include "spamgan/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace spamgan;
using namespace fixtures;
using doctest::Approx;

namespace {

constexpr auto S = ClassLabel::Spam;
constexpr auto N = ClassLabel::NonSpam;

ParamSet<double> flat_generator(const Generator<double>& gen) {
  ParamSet<double> params(1);
  std::mt19937_64 rng(1);
  gen.init(params, rng, 0.5);
  params.at("g/out/w").value.setZero();
  params.at("g/out/b").value.setZero();
  return params;
}

std::set<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::set<std::string> out;
  for (std::string w; in >> w;) out.insert(w);
  return out;
}

/// Spam iff the sentence holds more spam keywords than non-spam ones.
ClassLabel keyword_rule(const SynthCorpus& c, const std::string& text) {
  int score = 0;
  for (const auto& w : words(text)) {
    score += std::count(c.spam_keywords.begin(), c.spam_keywords.end(), w) ? 1 : 0;
    score -= std::count(c.nonspam_keywords.begin(), c.nonspam_keywords.end(), w) ? 1 : 0;
  }
  return score > 0 ? S : N;
}

double rule_accuracy(const SynthCorpus& c) {
  std::vector<ClassLabel> pred, truth;
  for (const auto& r : c.test) {
    pred.push_back(keyword_rule(c, r.text));
    truth.push_back(r.label);
  }
  return accuracy_f1(pred, truth).accuracy;
}

ModelConfig small_model(int vocab, int max_len) {
  ModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.max_len = max_len;
  cfg.embed = 8;
  cfg.noise.dim = 2;
  cfg.init_std = 0.1;
  for (auto* b : {&cfg.g_backbone, &cfg.dc_backbone}) {
    b->layers = 1;
    b->hidden = 8;
    b->ffn = 16;
    b->max_positions = max_len;
    b->dropout_embed = b->dropout_core = b->dropout_head = 0.0;
  }
  return cfg;
}

SweepSpec small_sweep() {
  SweepSpec spec;
  spec.corpus.vocab_size = 20;
  spec.corpus.max_len = 8;
  spec.corpus.min_words = 2;
  spec.corpus.keywords_per_class = 3;
  spec.corpus.labeled = 16;
  spec.corpus.unlabeled = 8;
  spec.corpus.test = 10;
  spec.model = small_model(999, 999);
  spec.schedule.pretrain_g_epochs = 1;
  spec.schedule.pretrain_d_epochs = 1;
  spec.schedule.pretrain_c_epochs = 1;
  spec.schedule.pretrain_critic_epochs = 1;
  spec.schedule.training_epochs = 1;
  spec.schedule.batch_size = 4;
  spec.labeled_fractions = {1.0};
  spec.unlabeled_fractions = {0.0};
  spec.seeds = {0};
  return spec;
}

}  // namespace

TEST_CASE("accuracy_f1 examples") {
  const std::vector<ClassLabel> pred{S, S, N, N}, truth{S, N, S, N};
  const auto r = accuracy_f1(pred, truth);
  CHECK(r.true_positive == 1);
  CHECK(r.false_positive == 1);
  CHECK(r.false_negative == 1);
  CHECK(r.true_negative == 1);
  CHECK(r.accuracy == Approx(0.5));
  CHECK(r.f1 == Approx(0.5));

  const auto perfect = accuracy_f1(truth, truth);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);

  const std::vector<ClassLabel> none{N, N, N};
  const auto degenerate = accuracy_f1(none, none);
  CHECK(degenerate.accuracy == 1.0);
  CHECK(degenerate.f1 == 0.0);
  CHECK(degenerate.samples == 3);

  CHECK_THROWS(accuracy_f1(pred, none));
  CHECK_THROWS(accuracy_f1(std::vector<ClassLabel>{}, std::vector<ClassLabel>{}));
}

TEST_CASE("accuracy_f1 agrees with a brute-force recount") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + int(rng() % 30);
    std::vector<ClassLabel> pred, truth;
    for (int i = 0; i < n; ++i) {
      pred.push_back(rng() % 2 ? S : N);
      truth.push_back(rng() % 2 ? S : N);
    }
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (int i = 0; i < n; ++i) {
      if (pred[i] == S && truth[i] == S) ++tp;
      if (pred[i] == S && truth[i] == N) ++fp;
      if (pred[i] == N && truth[i] == S) ++fn;
      if (pred[i] == N && truth[i] == N) ++tn;
    }
    const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const auto rep = accuracy_f1(pred, truth);
    CHECK(rep.accuracy == Approx(double(tp + tn) / n));
    CHECK(rep.precision == Approx(p));
    CHECK(rep.recall == Approx(r));
    CHECK(rep.f1 == Approx(p + r > 0 ? 2 * p * r / (p + r) : 0.0));
  }
}

TEST_CASE("perplexity closed forms") {
  SUBCASE("uniform model equals the vocabulary size") {
    for (int vocab : {5, 10, 37}) {
      Generator<double> gen(tiny_generator(BackboneKind::Recurrent, vocab));
      auto params = flat_generator(gen);
      const std::vector<TokenSequence> seqs{{{kStart, 4, 4, kEnd, kPad}, 4}, {{kStart, kEnd, kPad, kPad, kPad}, 2}};
      const std::vector<ClassLabel> cls{S, N};
      CHECK(std::abs(perplexity(params, gen, seqs, cls, std::mt19937_64(1)) - vocab) <= 1e-4);
    }
  }
  SUBCASE("a certain model scores one") {
    Generator<double> gen(tiny_generator(BackboneKind::AttentionMasked, 8));
    auto params = flat_generator(gen);
    params.at("g/out/b").value(0, kEnd) = 60.0;
    const std::vector<TokenSequence> seqs{{{kStart, kEnd, kPad}, 2}};
    const std::vector<ClassLabel> cls{S};
    CHECK(perplexity(params, gen, seqs, cls, std::mt19937_64(1)) == Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("two equally likely tokens score two") {
    Generator<double> gen(tiny_generator(BackboneKind::Recurrent, 8));
    auto params = flat_generator(gen);
    params.at("g/out/b").value(0, 4) = 60.0;
    params.at("g/out/b").value(0, 5) = 60.0;
    const std::vector<TokenSequence> seqs{{{kStart, 4, 5, 4}, 4}, {{kStart, 5, 5, 5}, 4}};
    const std::vector<ClassLabel> cls{S, N};
    CHECK(perplexity(params, gen, seqs, cls, std::mt19937_64(1)) == Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("never below one") {
    Generator<double> gen(tiny_generator(BackboneKind::Recurrent, 8));
    ParamSet<double> params(1);
    std::mt19937_64 rng(4);
    gen.init(params, rng, 1.0);
    const auto seqs = tiny_batch();
    CHECK(perplexity(params, gen, seqs, tiny_classes(), std::mt19937_64(1)) >= 1.0);
  }
}

TEST_CASE("synthetic corpus shape and determinism") {
  SynthCorpusSpec spec;
  spec.labeled = 50;
  spec.unlabeled = 30;
  spec.test = 20;
  const auto a = make_synth_corpus(spec);
  const auto b = make_synth_corpus(spec);
  CHECK(a.labeled.size() == 50);
  CHECK(a.unlabeled.size() == 30);
  CHECK(a.test.size() == 20);
  CHECK(a.vocab.size() == 50);
  CHECK(a.spam_keywords.size() == 6);
  for (std::size_t i = 0; i < a.labeled.size(); ++i) {
    CHECK(a.labeled[i].text == b.labeled[i].text);
    CHECK(a.labeled[i].label == b.labeled[i].label);
    CHECK(a.labeled[i].has_label);
  }
  for (const auto& r : a.unlabeled) CHECK_FALSE(r.has_label);
  spec.seed = 1;
  CHECK(make_synth_corpus(spec).labeled[0].text != a.labeled[0].text);

  const auto ds = to_dataset(a.labeled, a.unlabeled, a.vocab, spec.max_len);
  CHECK(ds.labeled.size() == 50);
  CHECK(ds.unlabeled.size() == 30);
  for (const auto& ex : ds.labeled) {
    CHECK_NOTHROW(validate(ex.seq, a.vocab.size()));
    CHECK(std::find(ex.seq.ids.begin(), ex.seq.ids.end(), kUnk) == ex.seq.ids.end());
  }

  spec.sigma = 1.5;
  CHECK_THROWS(spec.validate());
}

TEST_CASE("separation controls how decisive the keywords are") {
  SynthCorpusSpec spec;
  spec.labeled = spec.unlabeled = 0;
  spec.test = 400;
  spec.sigma = 1.0;
  const auto separated = make_synth_corpus(spec);
  CHECK(rule_accuracy(separated) == 1.0);

  double total = 0.0;
  spec.sigma = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = seed;
    total += rule_accuracy(make_synth_corpus(spec));
  }
  CHECK(std::abs(total / 5 - 0.5) <= 0.03);
}

TEST_CASE("a trained classifier cannot beat chance on identical classes") {
  SynthCorpusSpec spec;
  spec.sigma = 0.0;
  spec.labeled = 200;
  spec.unlabeled = 0;
  spec.test = 400;
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = seed;
    const auto c = make_synth_corpus(spec);
    const auto data = to_dataset(c.labeled, c.unlabeled, c.vocab, spec.max_len);
    SpamGanModel model(small_model(spec.vocab_size, spec.max_len), seed);
    TrainSchedule s;
    s.pretrain_g_epochs = s.pretrain_d_epochs = s.pretrain_critic_epochs = s.training_epochs = 0;
    s.pretrain_c_epochs = 3;
    s.c_opt = AdamConfig{1e-2, 0.0};
    Trainer trainer(model, s, seed);
    trainer.train(data);
    total += evaluate(model, encode_labeled(c.test, c.vocab, spec.max_len), 0, false).accuracy;
  }
  CHECK(std::abs(total / 5 - 0.5) <= 0.03);
}

TEST_CASE("evaluate reports the noise seed and skips perplexity on request") {
  const auto spec = small_sweep();
  const auto c = make_synth_corpus(spec.corpus);
  SpamGanModel model(small_model(20, 8), 0);
  const auto test = encode_labeled(c.test, c.vocab, 8);
  const auto with = evaluate(model, test, 42);
  CHECK(with.seed == 42);
  CHECK(with.samples == 10);
  CHECK(std::isfinite(with.perplexity));
  CHECK(with == evaluate(model, test, 42));
  CHECK(std::isnan(evaluate(model, test, 42, false).perplexity));
}

TEST_CASE("base schedule and subsets") {
  TrainSchedule full;
  full.pretrain_c_epochs = 4;
  full.training_epochs = 3;
  full.c_epochs = 2;
  const auto base = base_schedule(full);
  CHECK(base.pretrain_c_epochs == 10);
  CHECK(base.pretrain_g_epochs == 0);
  CHECK(base.pretrain_d_epochs == 0);
  CHECK(base.pretrain_critic_epochs == 0);
  CHECK(base.training_epochs == 0);

  const auto spec = small_sweep();
  const auto c = make_synth_corpus(spec.corpus);
  const auto data = to_dataset(c.labeled, c.unlabeled, c.vocab, 8);
  const auto a = subset(data, 0.5, 0.25, 3);
  CHECK(a.labeled.size() == 8);
  CHECK(a.unlabeled.size() == 2);
  const auto b = subset(data, 0.5, 0.25, 3);
  for (std::size_t i = 0; i < a.labeled.size(); ++i) CHECK(a.labeled[i].seq == b.labeled[i].seq);
  CHECK(subset(data, 1.0, 0.0, 3).unlabeled.empty());
  CHECK(subset(data, 1.0, 1.0, 3).labeled.size() == data.labeled.size());
}

TEST_CASE("a one-cell sweep has a base row and a full row and is deterministic") {
  const auto spec = small_sweep();
  std::vector<std::string> progress;
  const auto a = sweep(spec, [&](const std::string& m) { progress.push_back(m); });
  REQUIRE(a.rows.size() == 2);
  CHECK(a.rows[0].model == "base");
  CHECK(a.rows[1].model == "full");
  CHECK(a.cells.size() == 2);
  CHECK(progress.size() == 2);
  CHECK(std::isnan(a.rows[0].perplexity_mean));
  CHECK(std::isfinite(a.rows[1].perplexity_mean));
  CHECK(a.rows[1].seeds == 1);
  CHECK(a.rows[1].accuracy_std == 0.0);

  const auto b = sweep(spec);
  CHECK(sweep_csv(a.rows) == sweep_csv(b.rows));

  const auto csv = sweep_csv(a.rows);
  CHECK(csv.rfind("model,labeled_fraction,unlabeled_fraction,seeds,accuracy_mean,accuracy_std,f1_mean,f1_std,"
                  "perplexity_mean,perplexity_std\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("base,1.000000,0.000000,1,") != std::string::npos);
  CHECK(csv.find(",nan,nan\n") != std::string::npos);
}

TEST_CASE("sweep rows aggregate seeds in order") {
  auto spec = small_sweep();
  spec.labeled_fractions = {0.5, 1.0};
  spec.seeds = {0, 1};
  spec.schedule.training_epochs = 0;
  spec.schedule.pretrain_d_epochs = spec.schedule.pretrain_critic_epochs = 0;
  const auto r = sweep(spec);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.cells.size() == 8);
  CHECK(r.rows[0].labeled_fraction == 0.5);
  CHECK(r.rows[2].labeled_fraction == 1.0);
  for (const auto& row : r.rows) CHECK(row.seeds == 2);
  double mean = 0.0;
  for (const auto& cell : r.cells) {
    if (cell.model == "full" && cell.labeled_fraction == 0.5) mean += cell.report.accuracy / 2;
  }
  CHECK(r.rows[1].accuracy_mean == Approx(mean));
}

TEST_CASE("sweep rejects bad fractions and reports failing cells") {
  auto spec = small_sweep();
  spec.labeled_fractions = {0.0};
  CHECK_THROWS(sweep(spec));
  spec = small_sweep();
  spec.unlabeled_fractions = {1.5};
  CHECK_THROWS(sweep(spec));
  spec = small_sweep();
  spec.seeds.clear();
  CHECK_THROWS(sweep(spec));

  spec = small_sweep();
  spec.schedule.batch_size = 0;
  try {
    sweep(spec);
    FAIL("expected a cell error");
  } catch (const SweepCellError& e) {
    CHECK(std::string(e.what()).find("labeled_fraction=1") != std::string::npos);
    CHECK(std::string(e.what()).find("seed=0") != std::string::npos);
  }
}
