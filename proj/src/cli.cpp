#include "spamgan/cli.hpp"

#include "spamgan/config.hpp"
#include "spamgan/errors.hpp"
#include "spamgan/evalkit.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

namespace spamgan {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

/// Relative data paths in a config file are taken relative to that file.
std::string resolve(const std::string& path, const std::string& config_path) {
  if (path.empty() || fs::path(path).is_absolute() || config_path.empty()) return path;
  return (fs::path(config_path).parent_path() / path).string();
}

RunConfig effective_config(const Globals& g, bool required) {
  if (g.config.empty() && required) throw ConfigError("--config is required");
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  cfg.labeled_path = resolve(cfg.labeled_path, g.config);
  cfg.unlabeled_path = resolve(cfg.unlabeled_path, g.config);
  cfg.checkpoint_path = resolve(cfg.checkpoint_path, g.config);
  cfg.metrics_path = resolve(cfg.metrics_path, g.config);
  return cfg;
}

json schedule_snapshot(const RunConfig& cfg) {
  const json all = to_json(cfg);
  json s = json::object();
  for (const char* key : {"pretrain_g_epochs", "pretrain_d_epochs", "pretrain_c_epochs", "pretrain_critic_epochs",
                          "training_epochs", "g_adv_epochs", "g_mle_epochs", "d_epochs", "c_epochs", "batch_size",
                          "max_batches_per_epoch", "lr_g", "lr_d", "lr_c", "lr_critic", "wd_g", "wd_d", "wd_c",
                          "clip_norm", "decode", "top_p", "beta", "entropy_sign", "alpha_offset", "class_prior",
                          "validation_fraction"}) {
    s[key] = all.at(key);
  }
  return s;
}

/// Writes to --out when given, otherwise to the command's output stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw std::runtime_error("cannot write " + path);
    os_ = &file_;
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

LoadedCheckpoint open_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw MissingFileError(path);
  return load_checkpoint(path);
}

std::string format_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", s);
  return buf;
}

json report_json(const EvalReport& r) {
  return {{"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"true_positive", r.true_positive},
          {"false_positive", r.false_positive},
          {"false_negative", r.false_negative},
          {"true_negative", r.true_negative},
          {"perplexity", std::isnan(r.perplexity) ? json(nullptr) : json(r.perplexity)},
          {"samples", r.samples},
          {"seed", r.seed}};
}

std::vector<TokenSequence> encode_all(std::span<const TextRecord> records, const Vocab& vocab, int max_len) {
  std::vector<TokenSequence> out;
  for (const auto& r : records) out.push_back(encode(r.text, vocab, max_len));
  return out;
}

// ---- commands ------------------------------------------------------------------

void cmd_train(const Globals& g, std::ostream& out) {
  RunConfig cfg = effective_config(g, true);
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    cfg.checkpoint_path = (fs::path(g.out) / fs::path(cfg.checkpoint_path).filename()).string();
    cfg.metrics_path = (fs::path(g.out) / fs::path(cfg.metrics_path).filename()).string();
  }
  if (cfg.labeled_path.empty()) throw ConfigError("labeled_path is not set");
  const auto labeled = read_records(cfg.labeled_path, LabelPolicy::Require);
  std::vector<TextRecord> unlabeled;
  if (!cfg.unlabeled_path.empty()) unlabeled = read_records(cfg.unlabeled_path, LabelPolicy::Forbid);

  std::vector<std::string> texts;
  for (const auto& r : labeled) texts.push_back(r.text);
  for (const auto& r : unlabeled) texts.push_back(r.text);
  const Vocab vocab = build_vocab(texts, cfg.vocab_size);
  cfg.vocab_size = static_cast<int>(vocab.size());
  const Dataset data = to_dataset(labeled, unlabeled, vocab, cfg.max_len);

  std::ofstream metrics(cfg.metrics_path, std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write " + cfg.metrics_path);
  SpamGanModel model(cfg.model_config(), cfg.seed);
  Trainer trainer(model, cfg.schedule(), cfg.seed);
  trainer.set_metrics_stream(&metrics);
  trainer.train(data);
  save_checkpoint(cfg.checkpoint_path, model, vocab, cfg.seed, schedule_snapshot(cfg), to_json(cfg));
  out << "checkpoint " << cfg.checkpoint_path << "\nmetrics " << cfg.metrics_path << "\n";
}

void cmd_generate(const Globals& g, const std::string& checkpoint, const std::string& cls, int count,
                  std::optional<double> p, std::ostream& out) {
  const ClassLabel label = [&] {
    try {
      return parse_label(cls);
    } catch (const std::exception&) {
      throw ConfigError("class must be spam or non-spam, got \"" + cls + "\"");
    }
  }();
  if (count < 0) throw ConfigError("count must be non-negative");
  auto ck = open_checkpoint(checkpoint);
  DecodeStrategy strategy;
  strategy.kind = DecodeKind::TopPFree;
  strategy.p = p.value_or(ck.config.value("top_p", 0.9));
  strategy.max_length = ck.model.config.max_len;
  if (!(strategy.p > 0.0 && strategy.p <= 1.0)) throw ConfigError("p must lie in (0, 1]");

  Sink sink(g.out, out);
  if (count == 0) return;
  std::mt19937_64 rng(derive_seed(g.seed.value_or(ck.root_seed), "generate"));
  const std::vector<ClassLabel> classes(std::size_t(count), label);
  const auto z = sample_noise(ck.model.config.noise, count, rng);
  const auto res = sample_free(next_token_fn(ck.model.params, ck.model.generator, classes, z), count, strategy, rng);
  for (const auto& s : res.seqs) *sink << decode(s, ck.vocab) << '\n';
}

void cmd_classify(const Globals& g, const std::string& checkpoint, const std::string& input, std::ostream& out) {
  auto ck = open_checkpoint(checkpoint);
  const auto records = read_records(input, LabelPolicy::Optional);
  const auto seqs = encode_all(records, ck.vocab, ck.model.config.max_len);
  Sink sink(g.out, out);
  for (double s : ck.model.spam_scores(seqs)) *sink << label_name(predict(s)) << ' ' << format_score(s) << '\n';
}

void cmd_eval(const Globals& g, const std::string& checkpoint, const std::string& input, std::ostream& out) {
  auto ck = open_checkpoint(checkpoint);
  const auto records = read_records(input, LabelPolicy::Require);
  const auto test = encode_labeled(records, ck.vocab, ck.model.config.max_len);
  if (test.empty()) throw ConfigError("evaluation set " + input + " is empty");
  const auto report = evaluate(ck.model, test, derive_seed(g.seed.value_or(ck.root_seed), "eval/noise"));
  Sink sink(g.out, out);
  *sink << report_json(report).dump(2) << '\n';
}

void cmd_sweep(const Globals& g, const std::vector<double>& lf, const std::vector<double>& uf,
               const std::vector<std::uint64_t>& seeds, bool progress, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = effective_config(g, false);
  SweepSpec spec;
  spec.corpus = cfg.synth_spec();
  spec.model = cfg.model_config();
  spec.schedule = cfg.schedule();
  spec.labeled_fractions = lf;
  spec.unlabeled_fractions = uf;
  spec.seeds = seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : seeds;
  for (double f : lf) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("labeled fractions must lie in (0, 1]");
  }
  for (double f : uf) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("unlabeled fractions must lie in [0, 1]");
  }
  std::function<void(const std::string&)> log;
  if (progress) log = [&err](const std::string& m) { err << "training " << m << std::endl; };
  const auto result = sweep(spec, log);
  Sink sink(g.out, out);
  *sink << sweep_csv(result.rows);
}

void cmd_synth(const Globals& g, std::ostream& out) {
  const RunConfig cfg = effective_config(g, false);
  const auto corpus = make_synth_corpus(cfg.synth_spec());
  const fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
  fs::create_directories(dir);
  write_records((dir / "labeled.jsonl").string(), corpus.labeled);
  write_records((dir / "unlabeled.jsonl").string(), corpus.unlabeled);
  write_records((dir / "test.jsonl").string(), corpus.test);
  std::ofstream kw(dir / "keywords.json");
  kw << json{{"spam", corpus.spam_keywords}, {"nonspam", corpus.nonspam_keywords}}.dump(2) << '\n';
  if (!kw) throw std::runtime_error("cannot write " + (dir / "keywords.json").string());
  out << "wrote " << corpus.labeled.size() << " labeled, " << corpus.unlabeled.size() << " unlabeled, "
      << corpus.test.size() << " test records to " << dir.string() << "\n";
}

void cmd_print_config(const Globals& g, const std::string& preset_name, std::ostream& out) {
  RunConfig cfg = g.config.empty() ? preset(preset_name) : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  Sink sink(g.out, out);
  *sink << to_json(cfg).dump(2) << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised spam classification with a class-conditional text GAN", "spamgan"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Run configuration (JSON key/value document)");
  auto* seed_opt = app.add_option("--seed", seed, "Root seed, overrides the config");
  app.add_option("--out", g.out, "Output directory (train, synth-data) or file (other commands)");

  auto* train = app.add_subcommand("train", "Pretrain and train adversarially; write checkpoint and metrics");

  std::string checkpoint, cls, input;
  int count = 10;
  double p = 0.9;
  auto* generate = app.add_subcommand("generate", "Generate sentences for one class");
  generate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  generate->add_option("--class", cls, "spam or non-spam")->required();
  generate->add_option("--count", count, "Number of sentences");
  auto* p_opt = generate->add_option("--p", p, "Top-p threshold (default: the checkpoint's top_p)");

  auto* classify = app.add_subcommand("classify", "Label each input record and print its spam score");
  classify->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  classify->add_option("--input", input, "Line-record file")->required();

  auto* eval = app.add_subcommand("eval", "Print accuracy, F1 and perplexity on a labeled file");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--input", input, "Labeled line-record file")->required();

  std::vector<double> lf{1.0}, uf{1.0};
  std::vector<std::uint64_t> seeds;
  bool progress = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Base vs full models over labeled/unlabeled fractions and seeds");
  sweep_cmd->add_option("--labeled-fractions", lf, "Comma-separated fractions of D_L")->delimiter(',');
  sweep_cmd->add_option("--unlabeled-fractions", uf, "Comma-separated fractions of D_U")->delimiter(',');
  sweep_cmd->add_option("--seeds", seeds, "Comma-separated seeds (default: the config seed)")->delimiter(',');
  sweep_cmd->add_flag("--progress", progress, "Report each trained cell on stderr");

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic two-class corpus");

  std::string preset_name = "desk";
  auto* print = app.add_subcommand("print-config", "Print every configuration key with its effective value");
  print->add_option("--preset", preset_name, "desk or gpt2");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*train) cmd_train(g, out);
    if (*generate) cmd_generate(g, checkpoint, cls, count, p_opt->count() ? std::optional<double>(p) : std::nullopt, out);
    if (*classify) cmd_classify(g, checkpoint, input, out);
    if (*eval) cmd_eval(g, checkpoint, input, out);
    if (*sweep_cmd) cmd_sweep(g, lf, uf, seeds, progress, out, err);
    if (*synth) cmd_synth(g, out);
    if (*print) cmd_print_config(g, preset_name, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MissingFileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitMissingFile;
  } catch (const NonFiniteLossError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNonFinite;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const DataFormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataFormat;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace spamgan
