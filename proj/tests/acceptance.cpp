// Acceptance checks: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include "fixtures.hpp"

#include "spamgan/cli.hpp"
#include "spamgan/evalkit.hpp"
#include "spamgan/gradcheck.hpp"
#include "spamgan/rl.hpp"
#include "spamgan/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

using namespace spamgan;
using namespace fixtures;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
    if (!ok) {
      pass = false;
      detail += " [failed]";
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

SynthCorpus corpus_of(double sigma, int labeled, int unlabeled, int test, std::uint64_t seed = 0) {
  SynthCorpusSpec spec;
  spec.sigma = sigma;
  spec.labeled = labeled;
  spec.unlabeled = unlabeled;
  spec.test = test;
  spec.seed = seed;
  return make_synth_corpus(spec);
}

/// The desk model used by the learnability and generation checks.
ModelConfig desk_model(int vocab, int max_len) {
  ModelConfig mc;
  mc.vocab_size = vocab;
  mc.max_len = max_len;
  mc.embed = 16;
  mc.g_backbone.hidden = 32;
  mc.dc_backbone.hidden = 32;
  mc.g_backbone.max_positions = mc.dc_backbone.max_positions = max_len;
  mc.init_std = 0.1;
  return mc;
}

TrainSchedule only(int pg, int pd, int pc, int pcrit, int training) {
  TrainSchedule s;
  s.pretrain_g_epochs = pg;
  s.pretrain_d_epochs = pd;
  s.pretrain_c_epochs = pc;
  s.pretrain_critic_epochs = pcrit;
  s.training_epochs = training;
  s.c_opt.learning_rate = 1e-3;
  s.d_opt.learning_rate = 1e-3;
  return s;
}

void labeled_split(std::span<const LabeledExample> xs, std::vector<TokenSequence>& seqs, std::vector<ClassLabel>& cls) {
  for (const auto& e : xs) {
    seqs.push_back(e.seq);
    cls.push_back(e.label);
  }
}

// ---- 1 -------------------------------------------------------------------------

Outcome formula_suite() {
  Outcome o;
  o.require(std::abs(blend(0.8, 0.4) - 8.0 / 15) <= 1e-12, "blend(0.8,0.4)=" + fmt("%.6f", blend(0.8, 0.4)));

  const std::vector<double> d{0.6, 0.3, 0.1};
  const auto f = top_p_filter(d, 0.9).probs;
  o.require(std::abs(f[0] - 2.0 / 3) <= 1e-12 && std::abs(f[1] - 1.0 / 3) <= 1e-12 && f[2] == 0.0,
            "top_p=[" + fmt("%.4f", f[0]) + "," + fmt("%.4f", f[1]) + "," + fmt("%.4f", f[2]) + "]");

  const std::vector<double> s{0.9};
  const double cf = c_loss_fake(s, 1.0);
  o.require(std::abs(cf + 0.2197) <= 1e-4, "c_loss_fake=" + fmt("%.5f", cf));

  const std::vector<double> half{0.5};
  const double dl = d_loss(half, half);
  o.require(std::abs(dl - 2 * std::log(2.0)) <= 1e-6, "d_loss=" + fmt("%.6f", dl));

  Generator<double> gen(tiny_generator(BackboneKind::Recurrent, 10));
  ParamSet<double> params(1);
  std::mt19937_64 rng(1);
  gen.init(params, rng, 0.5);
  params.at("g/out/w").value.setZero();
  params.at("g/out/b").value.setZero();
  const std::vector<TokenSequence> seqs{{{kStart, 4, 5, kEnd}, 4}, {{kStart, 6, kEnd, kPad}, 3}};
  const std::vector<ClassLabel> cls{ClassLabel::Spam, ClassLabel::NonSpam};
  const double ppl = perplexity(params, gen, seqs, cls, std::mt19937_64(2));
  o.require(std::abs(ppl - 10.0) <= 1e-4, "uniform ppl=" + fmt("%.6f", ppl));

  StepTraceD dt{std::vector<double>(5, 0.5), std::vector<double>(5, 0.5), std::vector<std::uint8_t>(5, 1)};
  StepTraceC ct;
  for (auto& q : ct.q) q.assign(5, 0.5);
  for (auto& v : ct.v) v.assign(5, 0.5);
  ct.mask.assign(5, 1);
  const auto alpha = step_blends(dt, ct, ClassLabel::Spam).alpha;
  o.require(alpha == std::vector<double>{4, 3, 2, 1, 0}, "alpha(T_eff=5)=[4,3,2,1,0]");
  return o;
}

// ---- 2 -------------------------------------------------------------------------

Outcome gradient_oracles() {
  Outcome o;
  const auto seqs = tiny_batch();  // vocab 5, T = 4
  const auto labels = tiny_classes();
  const std::vector<TokenSequence> fakes{{{kStart, 4, kUnk, kEnd}, 4}, {{kStart, 4, 4, kEnd}, 4}, {{kStart, kEnd, kPad, kPad}, 2}};
  const auto z = tiny_noise(3);
  double worst = 0.0;
  std::string worst_name;
  auto check = [&](const std::string& name, const LossBuilder& fn, ParamSet<double>& p,
                   std::vector<std::string> names = {}) {
    const auto r = grad_check(fn, p, 1e-4, std::move(names));
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_name = name + " " + r.worst_parameter;
    }
  };
  for (auto kind : kAllKinds) {
    const std::string k = backbone_kind_name(kind);
    std::mt19937_64 rng(11);
    Generator<double> gen(tiny_generator(kind));
    ParamSet<double> gp(1);
    gen.init(gp, rng, 0.5);
    check(k + " mle", [&](Graph<double>& g, ParamSet<double>& p) { return mle_loss(g, p, gen, seqs, labels, z); }, gp);

    std::vector<BlendTrace> blends;
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (const auto& s : fakes) {
      const int L = s.max_length() - 1;
      StepTraceD dt;
      StepTraceC ct;
      for (int t = 0; t < L; ++t) {
        const std::uint8_t m = s.ids[std::size_t(t + 1)] != kPad;
        dt.q.push_back(u(rng));
        dt.v.push_back(u(rng));
        dt.mask.push_back(m);
        const double q = u(rng), v = u(rng);
        ct.q[0].push_back(1 - q);
        ct.q[1].push_back(q);
        ct.v[0].push_back(1 - v);
        ct.v[1].push_back(v);
        ct.mask.push_back(m);
      }
      blends.push_back(step_blends(dt, ct, ClassLabel::Spam, true));
    }
    check(k + " surrogate", [&](Graph<double>& g, ParamSet<double>& p) {
      auto lp = step_log_probs(g, p, gen, std::span<const TokenSequence>(fakes), std::span<const TokenSequence>(fakes),
                               std::span<const ClassLabel>(labels), z, Mode::Eval, nullptr);
      return policy_surrogate_loss(lp.values, std::span<const BlendTrace>(blends));
    }, gp);

    Discriminator<double> d(tiny_scorer(kind));
    ParamSet<double> dp(2);
    d.init(dp, rng, 0.5);
    check(k + " d", [&](Graph<double>& g, ParamSet<double>& p) {
      return d_loss(sentence_scores(d.forward(g, p, seqs)), sentence_scores(d.forward(g, p, fakes)));
    }, dp);
    // The critic target is a constant, so only the critic's own coordinates
    // are differentiable inputs of this loss.
    check(k + " d-critic", [&](Graph<double>& g, ParamSet<double>& p) { return d_critic_loss(d.forward(g, p, fakes)); },
          dp, dp.names("dcrit/"));

    Classifier<double> c(tiny_scorer(kind));
    ParamSet<double> cp(3);
    c.init(cp, rng, 0.5);
    check(k + " c-real", [&](Graph<double>& g, ParamSet<double>& p) {
      return c_loss_real(sentence_scores(c.forward(g, p, seqs)), std::span<const ClassLabel>(labels));
    }, cp);
    check(k + " c-fake", [&](Graph<double>& g, ParamSet<double>& p) {
      return c_loss_fake(sentence_scores(c.forward(g, p, fakes)), std::span<const ClassLabel>(labels), 1.0,
                         EntropySign::Paper);
    }, cp);
    check(k + " c-critic", [&](Graph<double>& g, ParamSet<double>& p) {
      return c_critic_loss(c.forward(g, p, fakes), std::span<const ClassLabel>(labels));
    }, cp, cp.names("ccrit/"));
  }
  o.require(worst <= 1e-5, "7 losses x 3 backbones, worst relative error " + fmt("%.2e", worst) + " (" + worst_name + ")");
  return o;
}

// ---- 3 -------------------------------------------------------------------------

Outcome partition_suite() {
  Outcome o;
  const auto c = corpus_of(1.0, 16, 0, 0);
  const auto data = to_dataset(c.labeled, c.unlabeled, c.vocab, 8);
  ModelConfig mc = desk_model(int(c.vocab.size()), 8);
  mc.g_backbone.hidden = mc.dc_backbone.hidden = 8;
  mc.noise.dim = 2;
  for (auto kind : {BackboneKind::Recurrent, BackboneKind::AttentionMasked}) {
    mc.g_backbone.kind = mc.dc_backbone.kind = kind;
    SpamGanModel m(mc, 1);
    Trainer trainer(m, only(0, 0, 0, 0, 0), 1);
    std::vector<TokenSequence> real;
    std::vector<ClassLabel> labels;
    labeled_split(std::span<const LabeledExample>(data.labeled).first(4), real, labels);
    std::mt19937_64 rng(3);
    const auto fb = trainer.make_fakes(real, 4, rng);
    auto& p = m.params;

    using Builder = std::function<Var<float>(Graph<float>&)>;
    const std::vector<std::tuple<std::string, Builder, std::string>> losses = {
        {"mle", [&](Graph<float>& g) { return mle_loss(g, p, m.generator, real, labels, fb.z); }, "g/"},
        {"d", [&](Graph<float>& g) {
           return d_loss(sentence_scores(m.discriminator.forward(g, p, real)),
                         sentence_scores(m.discriminator.forward(g, p, fb.seqs)));
         }, "d/"},
        {"d-critic", [&](Graph<float>& g) { return d_critic_loss(m.discriminator.forward(g, p, fb.seqs)); }, "dcrit/"},
        {"c-real", [&](Graph<float>& g) {
           return c_loss_real(sentence_scores(m.classifier.forward(g, p, real)), std::span<const ClassLabel>(labels));
         }, "c/"},
        {"c-fake", [&](Graph<float>& g) {
           return c_loss_fake(sentence_scores(m.classifier.forward(g, p, fb.seqs)),
                              std::span<const ClassLabel>(fb.classes), 1.0, EntropySign::Paper);
         }, "c/"},
        {"c-critic", [&](Graph<float>& g) {
           return c_critic_loss(m.classifier.forward(g, p, fb.seqs), std::span<const ClassLabel>(fb.classes));
         }, "ccrit/"},
        {"surrogate", [&](Graph<float>& g) {
           Graph<float> s;
           const auto dt = traces(m.discriminator.forward(s, p, fb.seqs));
           const auto ct = traces(m.classifier.forward(s, p, fb.seqs));
           std::vector<BlendTrace> blends;
           for (std::size_t b = 0; b < fb.seqs.size(); ++b) blends.push_back(step_blends(dt[b], ct[b], fb.classes[b]));
           auto lp = step_log_probs(g, p, m.generator, fb.contexts, fb.seqs, std::span<const ClassLabel>(fb.classes),
                                    fb.z, Mode::Eval, nullptr);
           return policy_surrogate_loss(lp.values, std::span<const BlendTrace>(blends));
         }, "g/"},
    };
    for (const auto& [name, build, group] : losses) {
      std::map<std::string, Matrix<float>> before;
      for (const auto& [n, t] : p) before[n] = t.value;
      // Every group gets an optimizer step after each loss; untouched groups must not move.
      OptimState<float> opt(p, p.names(), AdamConfig{1e-2, 0.0});
      Graph<float> g;
      auto loss = build(g);
      p.zero_grad();
      g.backward(loss);
      clip_and_step(p, opt);
      std::set<std::string> moved;
      for (const auto& [n, t] : p) {
        if (t.value == before[n]) continue;
        for (const char* prefix : kParamGroups) {
          if (n.rfind(prefix, 0) == 0) moved.insert(prefix);
        }
      }
      const bool ok = moved == std::set<std::string>{group};
      if (!ok) o.require(false, std::string(backbone_kind_name(kind)) + " " + name + " moved other groups");
    }
  }
  o.require(o.pass, "7 losses x 2 backbones each moved exactly their own group");
  return o;
}

// ---- 4 -------------------------------------------------------------------------

Outcome generator_learnability() {
  Outcome o;
  const auto c = corpus_of(1.0, 2000, 0, 400);
  const int T = 20;
  const auto data = to_dataset(c.labeled, c.unlabeled, c.vocab, T);
  const auto test = encode_labeled(c.test, c.vocab, T);
  std::vector<TokenSequence> seqs;
  std::vector<ClassLabel> cls;
  labeled_split(test, seqs, cls);
  SpamGanModel m(desk_model(int(c.vocab.size()), T), 0);
  const double before = perplexity(m.params, m.generator, seqs, cls, std::mt19937_64(1));
  auto s = only(30, 0, 0, 0, 0);
  s.validation_fraction = 0.0;
  Trainer trainer(m, s, 0);
  trainer.train(data);
  const double after = perplexity(m.params, m.generator, seqs, cls, std::mt19937_64(1));
  o.require(std::abs(before - 50.0) <= 5.0, "initial ppl " + fmt("%.2f", before));
  o.require(after <= 30.0, "after 30 epochs ppl " + fmt("%.2f", after));
  return o;
}

// ---- 5 -------------------------------------------------------------------------

Outcome classifier_learnability() {
  Outcome o;
  const auto c = corpus_of(1.0, 2000, 0, 400);
  const int T = 20;
  const auto data = to_dataset(c.labeled, c.unlabeled, c.vocab, T);
  const auto test = encode_labeled(c.test, c.vocab, T);
  SpamGanModel m(desk_model(int(c.vocab.size()), T), 0);
  auto s = only(0, 0, 20, 0, 0);
  s.validation_fraction = 0.0;
  Trainer trainer(m, s, 0);
  trainer.train(data);
  const double acc = evaluate(m, test, 1, false).accuracy;
  o.require(acc >= 0.95, "held-out accuracy after 20 epochs " + fmt("%.4f", acc));
  return o;
}

// ---- 6 -------------------------------------------------------------------------

Outcome semi_supervised_effect() {
  Outcome o;
  SweepSpec sp;
  sp.corpus.sigma = 0.8;
  sp.corpus.labeled = 40;
  sp.corpus.unlabeled = 2000;
  sp.corpus.test = 400;
  sp.model = desk_model(sp.corpus.vocab_size, sp.corpus.max_len);
  sp.schedule = only(10, 3, 30, 3, 10);
  sp.labeled_fractions = {1.0};
  sp.unlabeled_fractions = {1.0};
  sp.seeds = {0, 1, 2, 3, 4};
  const auto r = sweep(sp);
  const auto& base = r.rows.at(0);
  const auto& full = r.rows.at(1);
  std::string per_seed;
  for (std::size_t i = 0; i + 1 < r.cells.size(); i += 2) {
    per_seed += (per_seed.empty() ? "" : " ") + fmt("%.3f", r.cells[i].report.accuracy) + "/" +
                fmt("%.3f", r.cells[i + 1].report.accuracy);
  }
  const double diff = full.accuracy_mean - base.accuracy_mean;
  o.require(diff >= 0.0, "base " + fmt("%.4f", base.accuracy_mean) + " full " + fmt("%.4f", full.accuracy_mean) +
                             " diff " + fmt("%+.4f", diff) + " (per seed base/full: " + per_seed + ")");
  return o;
}

// ---- 7 -------------------------------------------------------------------------

Outcome conditional_generation() {
  Outcome o;
  const auto c = corpus_of(1.0, 2000, 0, 400);
  const int T = 20;
  const auto data = to_dataset(c.labeled, c.unlabeled, c.vocab, T);
  const auto mc = desk_model(int(c.vocab.size()), T);
  SpamGanModel m(mc, 0);
  Trainer trainer(m, only(20, 2, 10, 2, 10), 0);
  trainer.train(data);
  std::mt19937_64 rng(derive_seed(0, "acceptance/generate"));
  for (auto cls : {ClassLabel::Spam, ClassLabel::NonSpam}) {
    const std::vector<ClassLabel> classes(200, cls);
    const auto z = sample_noise(mc.noise, 200, rng);
    DecodeStrategy d;
    d.max_length = T;
    const auto res = sample_free(next_token_fn(m.params, m.generator, classes, z), 200, d, rng);
    int agree = 0;
    for (auto p : m.classify(res.seqs)) agree += p == cls;
    o.require(agree >= 160, std::string(label_name(cls)) + " agreement " + fmt("%.3f", agree / 200.0));
  }
  return o;
}

// ---- 8 -------------------------------------------------------------------------

Outcome critic_convergence() {
  Outcome o;
  const auto c = corpus_of(1.0, 64, 0, 0);
  const int T = 20;
  const auto data = to_dataset(c.labeled, c.unlabeled, c.vocab, T);
  SpamGanModel m(desk_model(int(c.vocab.size()), T), 0);
  Trainer trainer(m, only(0, 0, 0, 0, 0), 0);
  std::vector<TokenSequence> anchors;
  std::vector<ClassLabel> unused;
  labeled_split(data.labeled, anchors, unused);
  std::mt19937_64 rng(4);
  const auto fb = trainer.make_fakes(anchors, 32, rng);
  AdamConfig cfg{1e-2, 0.0};
  OptimState<float> dopt(m.params, m.params.names("dcrit/"), cfg);
  OptimState<float> copt(m.params, m.params.names("ccrit/"), cfg);
  const auto frozen = m.params.names("d/");
  std::map<std::string, Matrix<float>> before;
  for (const auto& n : m.params.names()) before[n] = m.params.at(n).value;

  double d0 = 0, d1 = 0, c0 = 0, c1 = 0;
  for (int step = 0; step <= 200; ++step) {
    Graph<float> g;
    auto dl = d_critic_loss(m.discriminator.forward(g, m.params, fb.seqs));
    auto cl = c_critic_loss(m.classifier.forward(g, m.params, fb.seqs), std::span<const ClassLabel>(fb.classes));
    if (step == 0) d0 = dl.item(), c0 = cl.item();
    d1 = dl.item();
    c1 = cl.item();
    if (step == 200) break;
    m.params.zero_grad();
    g.backward(dl + cl);
    clip_and_step(m.params, dopt);
    clip_and_step(m.params, copt);
  }
  bool scorers_frozen = true;
  for (const auto& n : m.params.names()) {
    const bool critic = n.rfind("dcrit/", 0) == 0 || n.rfind("ccrit/", 0) == 0;
    if (!critic && m.params.at(n).value != before[n]) scorers_frozen = false;
  }
  o.require(scorers_frozen, "scorers frozen");
  o.require(d1 <= 0.2 * d0, "D critic " + fmt("%.4f", d0) + " -> " + fmt("%.4f", d1) + " (" + fmt("%.1f", 100 * d1 / d0) + "%)");
  o.require(c1 <= 0.2 * c0, "C critic " + fmt("%.4f", c0) + " -> " + fmt("%.4f", c1) + " (" + fmt("%.1f", 100 * c1 / c0) + "%)");
  return o;
}

// ---- 9 -------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Outcome determinism_persistence() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "spamgan_acceptance_c9";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const nlohmann::json cfg{{"seed", 3},          {"vocab_size", 50},        {"max_len", 20},
                           {"layers", 1},        {"hidden", 32},            {"embed", 16},
                           {"init_std", 0.1},    {"pretrain_g_epochs", 2},  {"pretrain_d_epochs", 1},
                           {"pretrain_c_epochs", 2}, {"pretrain_critic_epochs", 1}, {"training_epochs", 2},
                           {"synth_labeled", 200}, {"synth_unlabeled", 200}, {"synth_test", 100},
                           {"labeled_path", "data/labeled.jsonl"}, {"unlabeled_path", "data/unlabeled.jsonl"}};
  const auto config = (dir / "run.json").string();
  std::ofstream(config) << cfg.dump(2);
  std::ostringstream out, err;
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "spamgan");
    return run_cli(args, out, err);
  };
  int code = run({"--config", config, "--out", (dir / "data").string(), "synth-data"});
  code |= run({"--config", config, "--out", (dir / "a").string(), "train"});
  code |= run({"--config", config, "--out", (dir / "b").string(), "train"});
  o.require(code == 0, "cli runs succeeded" + (code ? ": " + err.str() : std::string()));
  const auto ma = slurp(dir / "a" / "metrics.jsonl");
  o.require(!ma.empty() && ma == slurp(dir / "b" / "metrics.jsonl"), "metrics files bitwise identical");

  // Pre-save report from an in-memory model, then the same after a round trip.
  auto loaded = load_checkpoint((dir / "a" / "spamgan.ckpt").string());
  const auto records = read_records((dir / "data" / "test.jsonl").string(), LabelPolicy::Require);
  const auto test = encode_labeled(records, loaded.vocab, loaded.model.config.max_len);
  const auto before = evaluate(loaded.model, test, 17);
  const auto path = (dir / "resaved.ckpt").string();
  save_checkpoint(path, loaded.model, loaded.vocab, loaded.root_seed, loaded.schedule, loaded.config);
  auto again = load_checkpoint(path);
  const auto after = evaluate(again.model, test, 17);
  o.require(before == after, "EvalReport identical after save/load (acc " + fmt("%.4f", after.accuracy) + ", ppl " +
                                 fmt("%.3f", after.perplexity) + ")");
  fs::remove_all(dir);
  return o;
}

// ---- 10 ------------------------------------------------------------------------

Outcome algorithm_order() {
  Outcome o;
  const auto c = corpus_of(1.0, 24, 8, 0);
  const auto data = to_dataset(c.labeled, c.unlabeled, c.vocab, 10);
  ModelConfig mc = desk_model(int(c.vocab.size()), 10);
  mc.g_backbone.hidden = mc.dc_backbone.hidden = 8;
  SpamGanModel m(mc, 0);
  auto s = only(1, 1, 1, 1, 2);
  s.g_adv_epochs = s.g_mle_epochs = s.d_epochs = s.c_epochs = 1;
  Trainer trainer(m, s, 0);
  trainer.train(data);
  const std::vector<std::string> expected{
      "pretrain-g[0]",   "pretrain-d[0]",   "pretrain-c[0]", "pretrain-critic[0]",
      "adv[0]/g-adv[0]", "adv[0]/g-mle[0]", "adv[0]/d[0]",   "adv[0]/c[0]",
      "adv[1]/g-adv[0]", "adv[1]/g-mle[0]", "adv[1]/d[0]",   "adv[1]/c[0]"};
  std::string log;
  for (const auto& e : trainer.phase_log()) log += (log.empty() ? "" : " ") + e;
  o.require(trainer.phase_log() == expected, log);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"formula suite", formula_suite},
      {"gradient oracles", gradient_oracles},
      {"parameter partition", partition_suite},
      {"generator learnability", generator_learnability},
      {"classifier learnability", classifier_learnability},
      {"semi-supervised direction of effect", semi_supervised_effect},
      {"conditional generation", conditional_generation},
      {"critic convergence", critic_convergence},
      {"determinism and persistence", determinism_persistence},
      {"phase order", algorithm_order},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += r.pass ? 0 : 1;
    std::printf("[PRIMARY] C%d %s: %s (%s; %.1fs)\n", id, criteria[i].first.c_str(), r.pass ? "PASS" : "FAIL",
                r.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
