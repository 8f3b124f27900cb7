#include "spamgan/evalkit.hpp"

#include "spamgan/errors.hpp"
#include "spamgan/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace spamgan {

void SynthCorpusSpec::validate() const {
  if (max_len < 3) throw std::invalid_argument("synthetic corpus: max_len must be at least 3");
  if (min_words < 1 || min_words > max_len - 2) throw std::invalid_argument("synthetic corpus: min_words out of range");
  if (keywords_per_class < 1) throw std::invalid_argument("synthetic corpus: need at least one keyword per class");
  if (vocab_size - kNumSpecialTokens - 2 * keywords_per_class < 1) {
    throw std::invalid_argument("synthetic corpus: vocabulary too small for the keyword sets");
  }
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::invalid_argument("synthetic corpus: sigma must lie in [0, 1]");
  if (!(keyword_rate >= 0.0 && keyword_rate <= 1.0)) throw std::invalid_argument("synthetic corpus: keyword_rate must lie in [0, 1]");
  if (!(spam_prior >= 0.0 && spam_prior <= 1.0)) throw std::invalid_argument("synthetic corpus: spam_prior must lie in [0, 1]");
  if (labeled < 0 || unlabeled < 0 || test < 0) throw std::invalid_argument("synthetic corpus: sizes must be non-negative");
}

namespace {

std::string word_name(char prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%02d", prefix, i);
  return buf;
}

struct SentenceSampler {
  const SynthCorpusSpec& spec;
  std::vector<std::string> keywords;  // spam set then non-spam set
  std::vector<std::string> fillers;
  std::discrete_distribution<int> zipf;

  TextRecord draw(ClassLabel label, std::mt19937_64& rng) {
    const int k = spec.keywords_per_class;
    const int own = label == ClassLabel::Spam ? 0 : k;
    std::uniform_int_distribution<int> length(spec.min_words, spec.max_len - 2);
    std::uniform_int_distribution<int> pick_own(0, k - 1);
    std::uniform_int_distribution<int> pick_any(0, 2 * k - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    auto keyword = [&] { return keywords[u(rng) < spec.sigma ? own + pick_own(rng) : pick_any(rng)]; };

    const int n = length(rng);
    std::vector<std::string> words;
    bool any = false;
    for (int i = 0; i < n; ++i) {
      if (u(rng) < spec.keyword_rate) {
        words.push_back(keyword());
        any = true;
      } else {
        words.push_back(fillers[std::size_t(zipf(rng))]);
      }
    }
    if (!any) words[std::uniform_int_distribution<int>(0, n - 1)(rng)] = keyword();

    TextRecord r;
    for (std::size_t i = 0; i < words.size(); ++i) r.text += (i ? " " : "") + words[i];
    r.has_label = true;
    r.label = label;
    return r;
  }
};

}  // namespace

SynthCorpus make_synth_corpus(const SynthCorpusSpec& spec) {
  spec.validate();
  SynthCorpus out;
  const int k = spec.keywords_per_class;
  const int n_fill = spec.vocab_size - kNumSpecialTokens - 2 * k;

  std::vector<std::string> tokens = Vocab().tokens();
  for (int i = 0; i < 2 * k; ++i) {
    const auto w = word_name('k', i);
    (i < k ? out.spam_keywords : out.nonspam_keywords).push_back(w);
    tokens.push_back(w);
  }
  std::vector<std::string> fillers;
  std::vector<double> weights;
  for (int i = 0; i < n_fill; ++i) {
    fillers.push_back(word_name('w', i));
    weights.push_back(1.0 / std::pow(double(i + 1), spec.zipf_exponent));
    tokens.push_back(fillers.back());
  }
  out.vocab = Vocab::from_tokens(tokens);

  std::vector<std::string> keywords = out.spam_keywords;
  keywords.insert(keywords.end(), out.nonspam_keywords.begin(), out.nonspam_keywords.end());
  SentenceSampler sampler{spec, keywords, fillers, std::discrete_distribution<int>(weights.begin(), weights.end())};

  const RngStreams streams(spec.seed);
  const ClassPrior prior{spec.spam_prior};
  auto fill = [&](std::vector<TextRecord>& pool, int count, const char* name, bool keep_label) {
    auto rng = streams.stream(std::string("synth/") + name);
    for (int i = 0; i < count; ++i) {
      auto r = sampler.draw(sample_class(prior, rng), rng);
      r.has_label = keep_label;
      pool.push_back(std::move(r));
    }
  };
  fill(out.labeled, spec.labeled, "labeled", true);
  fill(out.unlabeled, spec.unlabeled, "unlabeled", false);
  fill(out.test, spec.test, "test", true);
  return out;
}

std::vector<LabeledExample> encode_labeled(std::span<const TextRecord> records, const Vocab& vocab, int max_len) {
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].has_label) throw std::invalid_argument("record " + std::to_string(i + 1) + " has no label");
    out.push_back({encode(records[i].text, vocab, max_len), records[i].label});
  }
  return out;
}

Dataset to_dataset(std::span<const TextRecord> labeled, std::span<const TextRecord> unlabeled, const Vocab& vocab,
                   int max_len) {
  Dataset d;
  d.labeled = encode_labeled(labeled, vocab, max_len);
  for (const auto& r : unlabeled) d.unlabeled.push_back(encode(r.text, vocab, max_len));
  return d;
}

EvalReport evaluate(SpamGanModel& model, std::span<const LabeledExample> test, std::uint64_t noise_seed,
                    bool with_perplexity) {
  std::vector<TokenSequence> seqs;
  std::vector<ClassLabel> truth;
  for (const auto& ex : test) {
    seqs.push_back(ex.seq);
    truth.push_back(ex.label);
  }
  auto report = accuracy_f1(model.classify(seqs), truth);
  if (with_perplexity) {
    report.perplexity = perplexity(model.params, model.generator, seqs, truth, std::mt19937_64(noise_seed));
  }
  report.seed = noise_seed;
  return report;
}

// ---- sweeps ---------------------------------------------------------------------

TrainSchedule base_schedule(const TrainSchedule& full) {
  TrainSchedule s = full;
  s.pretrain_c_epochs = full.pretrain_c_epochs + full.training_epochs * full.c_epochs;
  s.pretrain_g_epochs = s.pretrain_d_epochs = s.pretrain_critic_epochs = 0;
  s.training_epochs = 0;
  return s;
}

Dataset subset(const Dataset& full, double labeled_fraction, double unlabeled_fraction, std::uint64_t seed) {
  auto pick = [&](std::size_t n, double fraction, std::string_view name) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, name));
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(static_cast<std::size_t>(std::llround(fraction * double(n))));
    std::sort(order.begin(), order.end());
    return order;
  };
  Dataset d;
  for (auto i : pick(full.labeled.size(), labeled_fraction, "subset/labeled")) d.labeled.push_back(full.labeled[i]);
  for (auto i : pick(full.unlabeled.size(), unlabeled_fraction, "subset/unlabeled")) d.unlabeled.push_back(full.unlabeled[i]);
  return d;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / double(xs.size() - 1))};
}

std::string coordinates(double lf, double uf, std::uint64_t seed) {
  std::ostringstream os;
  os << "labeled_fraction=" << lf << ", unlabeled_fraction=" << uf << ", seed=" << seed;
  return os.str();
}

}  // namespace

SweepResult sweep(const SweepSpec& spec, const std::function<void(const std::string&)>& progress) {
  for (double f : spec.labeled_fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("labeled fractions must lie in (0, 1]");
  }
  for (double f : spec.unlabeled_fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("unlabeled fractions must lie in [0, 1]");
  }
  if (spec.seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");

  const auto corpus = make_synth_corpus(spec.corpus);
  ModelConfig model_cfg = spec.model;
  model_cfg.vocab_size = corpus.vocab.size();
  model_cfg.max_len = spec.corpus.max_len;
  const Dataset full = to_dataset(corpus.labeled, corpus.unlabeled, corpus.vocab, model_cfg.max_len);
  const auto test = encode_labeled(corpus.test, corpus.vocab, model_cfg.max_len);

  SweepResult result;
  for (double lf : spec.labeled_fractions) {
    for (double uf : spec.unlabeled_fractions) {
      std::vector<SweepCell> base_cells, full_cells;
      for (auto seed : spec.seeds) {
        const auto where = coordinates(lf, uf, seed);
        const Dataset data = subset(full, lf, uf, seed);
        const auto noise_seed = derive_seed(seed, "eval/noise");
        try {
          if (progress) progress("base " + where);
          SpamGanModel base(model_cfg, seed);
          Trainer(base, base_schedule(spec.schedule), seed).train(data);
          base_cells.push_back({"base", lf, uf, seed, evaluate(base, test, noise_seed, false)});

          if (progress) progress("full " + where);
          SpamGanModel model(model_cfg, seed);
          Trainer(model, spec.schedule, seed).train(data);
          full_cells.push_back({"full", lf, uf, seed, evaluate(model, test, noise_seed, true)});
        } catch (const NonFiniteLossError& e) {
          throw NonFiniteLossError("sweep cell (" + where + "): " + e.what());
        } catch (const std::exception& e) {
          throw SweepCellError("sweep cell (" + where + "): " + e.what());
        }
      }
      for (auto* cells : {&base_cells, &full_cells}) {
        std::vector<double> acc, f1, ppl;
        for (const auto& c : *cells) {
          acc.push_back(c.report.accuracy);
          f1.push_back(c.report.f1);
          if (!std::isnan(c.report.perplexity)) ppl.push_back(c.report.perplexity);
        }
        SweepRow row{cells->front().model, lf, uf, int(cells->size())};
        std::tie(row.accuracy_mean, row.accuracy_std) = mean_std(acc);
        std::tie(row.f1_mean, row.f1_std) = mean_std(f1);
        if (ppl.empty()) {
          row.perplexity_mean = row.perplexity_std = std::nan("");
        } else {
          std::tie(row.perplexity_mean, row.perplexity_std) = mean_std(ppl);
        }
        result.rows.push_back(row);
        result.cells.insert(result.cells.end(), cells->begin(), cells->end());
      }
    }
  }
  return result;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << "model,labeled_fraction,unlabeled_fraction,seeds,accuracy_mean,accuracy_std,f1_mean,f1_std,perplexity_mean,"
        "perplexity_std\n";
  auto num = [](double x) {
    if (std::isnan(x)) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", x);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << r.model << ',' << num(r.labeled_fraction) << ',' << num(r.unlabeled_fraction) << ',' << r.seeds << ','
       << num(r.accuracy_mean) << ',' << num(r.accuracy_std) << ',' << num(r.f1_mean) << ',' << num(r.f1_std) << ','
       << num(r.perplexity_mean) << ',' << num(r.perplexity_std) << '\n';
  }
  return os.str();
}

}  // namespace spamgan
