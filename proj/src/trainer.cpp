#include "spamgan/trainer.hpp"

#include "spamgan/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spamgan {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string bracket(const std::string& phase, int i) { return phase + "[" + std::to_string(i) + "]"; }

}  // namespace

// ---- model ---------------------------------------------------------------------

SpamGanModel::SpamGanModel(ModelConfig cfg, std::uint64_t seed)
    : config(cfg),
      params(seed),
      generator(GeneratorConfig{cfg.vocab_size, cfg.embed, cfg.noise, cfg.g_backbone}),
      discriminator(ScorerConfig{cfg.vocab_size, cfg.embed, cfg.dc_backbone}),
      classifier(ScorerConfig{cfg.vocab_size, cfg.embed, cfg.dc_backbone}) {
  if (cfg.max_len < 3) throw std::invalid_argument("sequence length must be at least 3");
  if (cfg.g_backbone.max_positions < cfg.max_len || cfg.dc_backbone.max_positions < cfg.max_len) {
    throw std::invalid_argument("backbone max positions must be at least the sequence length");
  }
  const RngStreams streams(seed);
  auto rg = streams.stream("init/g");
  generator.init(params, rg, cfg.init_std);
  auto rd = streams.stream("init/d");
  discriminator.init(params, rd, cfg.init_std);
  auto rc = streams.stream("init/c");
  classifier.init(params, rc, cfg.init_std);

  if (cfg.shared_init) {
    for (const auto& name : params.names("g/")) {
      const auto leaf = name.substr(2);
      const auto& src = params.at(name).value;
      for (const char* prefix : {"d/", "c/"}) {
        const std::string target = prefix + leaf;
        if (!params.contains(target)) continue;
        auto& dst = params.at(target).value;
        if (dst.rows() == src.rows() && dst.cols() == src.cols()) dst = src;
      }
    }
  }
}

std::vector<double> SpamGanModel::spam_scores(std::span<const TokenSequence> seqs, int batch_size) {
  std::vector<double> out;
  out.reserve(seqs.size());
  for (std::size_t start = 0; start < seqs.size(); start += batch_size) {
    const auto n = std::min<std::size_t>(batch_size, seqs.size() - start);
    Graph<float> g;
    auto s = sentence_scores(classifier.forward(g, params, seqs.subspan(start, n), Mode::Eval, nullptr));
    for (Index b = 0; b < s.rows(); ++b) out.push_back(static_cast<double>(s.value()(b, class_index(ClassLabel::Spam))));
  }
  return out;
}

std::vector<ClassLabel> SpamGanModel::classify(std::span<const TokenSequence> seqs, int batch_size) {
  std::vector<ClassLabel> out;
  for (double s : spam_scores(seqs, batch_size)) out.push_back(predict(s));
  return out;
}

// ---- schedule and records ------------------------------------------------------

void TrainSchedule::validate() const {
  for (int n : {pretrain_g_epochs, pretrain_d_epochs, pretrain_c_epochs, pretrain_critic_epochs, training_epochs,
                g_adv_epochs, g_mle_epochs, d_epochs, c_epochs, max_batches_per_epoch}) {
    if (n < 0) throw std::invalid_argument("epoch counts must be non-negative");
  }
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (!(decode.p > 0.0 && decode.p <= 1.0)) throw std::invalid_argument("top-p threshold must lie in (0, 1]");
  if (prior.spam < 0.0 || prior.spam > 1.0) throw std::invalid_argument("class prior must lie in [0, 1]");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
}

nlohmann::json to_json(const MetricsRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return nlohmann::json{{"phase", r.phase},
                        {"epoch", r.epoch},
                        {"mle_loss", opt(r.mle_loss)},
                        {"d_loss", opt(r.d_loss)},
                        {"d_critic_loss", opt(r.d_critic_loss)},
                        {"c_real_loss", opt(r.c_real_loss)},
                        {"c_fake_loss", opt(r.c_fake_loss)},
                        {"c_critic_loss", opt(r.c_critic_loss)},
                        {"surrogate_loss", opt(r.surrogate_loss)},
                        {"mean_reward", opt(r.mean_reward)},
                        {"mean_advantage", opt(r.mean_advantage)},
                        {"val_accuracy", opt(r.val_accuracy)},
                        {"val_f1", opt(r.val_f1)},
                        {"val_perplexity", opt(r.val_perplexity)},
                        {"wall_clock_s", opt(r.wall_clock_s)}};
}

Dataset split_validation(Dataset& data, double fraction, std::uint64_t seed) {
  Dataset val;
  const std::size_t n = data.labeled.size();
  auto take = static_cast<std::size_t>(std::floor(fraction * double(n) + 0.5));
  if (n < 2 || take == 0) return val;
  take = std::min(take, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::uint8_t> held(n, 0);
  for (std::size_t i = 0; i < take; ++i) held[order[i]] = 1;
  std::vector<LabeledExample> keep;
  for (std::size_t i = 0; i < n; ++i) (held[i] ? val.labeled : keep).push_back(std::move(data.labeled[i]));
  data.labeled = std::move(keep);
  return val;
}

// ---- trainer -------------------------------------------------------------------

Trainer::Trainer(SpamGanModel& model, TrainSchedule schedule, std::uint64_t seed)
    : model_(model),
      schedule_(schedule),
      streams_(seed),
      g_opt_(model.params, model.params.names("g/"), schedule.g_opt),
      d_opt_(model.params, model.params.names("d/"), schedule.d_opt),
      dcrit_opt_(model.params, model.params.names("dcrit/"), schedule.critic_opt),
      c_opt_(model.params, model.params.names("c/"), schedule.c_opt),
      ccrit_opt_(model.params, model.params.names("ccrit/"), schedule.critic_opt),
      started_(now_seconds()) {
  schedule_.validate();
  schedule_.decode.max_length = model.config.max_len;
}

void Trainer::train(const Dataset& data) {
  Dataset train = data;
  validation_ = split_validation(train, schedule_.validation_fraction, derive_seed(streams_.root(), "validation"));
  pretrain(train);
  adversarial_train(train);
}

void Trainer::emit(MetricsRecord rec) {
  if (schedule_.metrics_wall_clock) rec.wall_clock_s = now_seconds() - started_;
  if (metrics_out_ != nullptr) *metrics_out_ << to_json(rec).dump() << '\n' << std::flush;
  records_.push_back(std::move(rec));
}

void Trainer::fill_validation(MetricsRecord& rec) {
  if (validation_.labeled.empty()) return;
  std::vector<TokenSequence> seqs;
  std::vector<ClassLabel> truth;
  for (const auto& ex : validation_.labeled) {
    seqs.push_back(ex.seq);
    truth.push_back(ex.label);
  }
  const auto report = accuracy_f1(model_.classify(seqs), truth);
  rec.val_accuracy = report.accuracy;
  rec.val_f1 = report.f1;
  rec.val_perplexity = perplexity(model_.params, model_.generator, seqs, truth, stream("validation/noise"));
}

std::vector<Batch> Trainer::batches(const Dataset& data, Pool pool, const std::string& tag) const {
  auto out = make_batches(data, pool, static_cast<std::size_t>(schedule_.batch_size),
                          derive_seed(streams_.root(), tag + "/shuffle"), schedule_.prior);
  if (schedule_.max_batches_per_epoch > 0 && out.size() > std::size_t(schedule_.max_batches_per_epoch)) {
    out.resize(std::size_t(schedule_.max_batches_per_epoch));
  }
  return out;
}

double Trainer::step(Graph<float>& g, Var<float> loss, std::initializer_list<OptimState<float>*> groups,
                     const std::string& tag) {
  const double value = loss.item();
  if (!std::isfinite(value)) throw NonFiniteLossError("non-finite loss in " + tag);
  model_.params.zero_grad();
  g.backward(loss);
  for (auto* s : groups) clip_and_step(model_.params, *s);
  return value;
}

FakeBatch Trainer::make_fakes(std::span<const TokenSequence> anchors, std::size_t count, std::mt19937_64& rng) {
  const bool teacher = schedule_.decode.kind == DecodeKind::TopPTeacher;
  if (teacher) count = std::min(count, anchors.size());
  FakeBatch fb;
  if (count == 0) return fb;
  for (std::size_t i = 0; i < count; ++i) fb.classes.push_back(sample_class(schedule_.prior, rng));
  fb.z = sample_noise(model_.config.noise, static_cast<int>(count), rng);
  const auto fn = next_token_fn(model_.params, model_.generator, fb.classes, fb.z);
  SampleResult s;
  if (teacher) {
    fb.contexts.assign(anchors.begin(), anchors.begin() + static_cast<std::ptrdiff_t>(count));
    s = teacher_forced_sample(fn, fb.contexts, schedule_.decode.p, rng);
  } else {
    s = sample_free(fn, static_cast<int>(count), schedule_.decode, rng);
  }
  fb.seqs = std::move(s.seqs);
  fb.log_probs = std::move(s.log_probs);
  if (!teacher) fb.contexts = fb.seqs;
  return fb;
}

double Trainer::epoch_g_mle(const Dataset& data, const std::string& tag) {
  double total = 0.0;
  const auto bs = batches(data, Pool::Union, tag);
  for (std::size_t k = 0; k < bs.size(); ++k) {
    auto rng = stream(tag + "/" + std::to_string(k));
    const auto z = sample_noise(model_.config.noise, static_cast<int>(bs[k].size()), rng);
    Graph<float> g;
    auto loss = mle_loss(g, model_.params, model_.generator, bs[k].seqs, bs[k].labels, z, Mode::Train, &rng);
    total += step(g, loss, {&g_opt_}, tag);
  }
  return bs.empty() ? 0.0 : total / bs.size();
}

double Trainer::epoch_d(const Dataset& data, const std::string& tag, bool with_critic, double* critic_loss) {
  double total = 0.0;
  double critic_total = 0.0;
  const auto bs = batches(data, Pool::Union, tag);
  for (std::size_t k = 0; k < bs.size(); ++k) {
    auto rng = stream(tag + "/" + std::to_string(k));
    const auto fb = make_fakes(bs[k].seqs, bs[k].size(), rng);
    {
      Graph<float> g;
      auto real = sentence_scores(model_.discriminator.forward(g, model_.params, bs[k].seqs, Mode::Train, &rng));
      auto fake = sentence_scores(model_.discriminator.forward(g, model_.params, fb.seqs, Mode::Train, &rng));
      total += step(g, d_loss(real, fake), {&d_opt_}, tag);
    }
    if (with_critic) {
      Graph<float> g;
      auto out = model_.discriminator.forward(g, model_.params, fb.seqs, Mode::Eval, nullptr);
      critic_total += step(g, d_critic_loss(out), {&dcrit_opt_}, tag);
    }
  }
  if (critic_loss != nullptr) *critic_loss = bs.empty() ? 0.0 : critic_total / bs.size();
  return bs.empty() ? 0.0 : total / bs.size();
}

double Trainer::epoch_c_real(const Dataset& data, const std::string& tag) {
  double total = 0.0;
  const auto bs = batches(data, Pool::Labeled, tag);
  for (std::size_t k = 0; k < bs.size(); ++k) {
    auto rng = stream(tag + "/" + std::to_string(k));
    Graph<float> g;
    auto scores = sentence_scores(model_.classifier.forward(g, model_.params, bs[k].seqs, Mode::Train, &rng));
    total += step(g, c_loss_real(scores, std::span<const ClassLabel>(bs[k].labels)), {&c_opt_}, tag);
  }
  return bs.empty() ? 0.0 : total / bs.size();
}

void Trainer::epoch_c_adv(const Dataset& data, const std::string& tag, MetricsRecord& rec) {
  const auto bs = batches(data, Pool::Labeled, tag);
  const auto anchors = batches(data, Pool::Union, tag + "/anchors");
  double real_total = 0.0, fake_total = 0.0, critic_total = 0.0;
  for (std::size_t k = 0; k < bs.size(); ++k) {
    auto rng = stream(tag + "/" + std::to_string(k));
    const auto fb = make_fakes(anchors[k % anchors.size()].seqs, bs[k].size(), rng);
    {
      Graph<float> g;
      auto real = c_loss_real(sentence_scores(model_.classifier.forward(g, model_.params, bs[k].seqs, Mode::Train, &rng)),
                              std::span<const ClassLabel>(bs[k].labels));
      auto fake = c_loss_fake(sentence_scores(model_.classifier.forward(g, model_.params, fb.seqs, Mode::Train, &rng)),
                              std::span<const ClassLabel>(fb.classes), schedule_.beta, schedule_.entropy_sign);
      real_total += real.item();
      fake_total += fake.item();
      step(g, real + fake, {&c_opt_}, tag);
    }
    Graph<float> g;
    auto out = model_.classifier.forward(g, model_.params, fb.seqs, Mode::Eval, nullptr);
    critic_total += step(g, c_critic_loss(out, std::span<const ClassLabel>(fb.classes)), {&ccrit_opt_}, tag);
  }
  if (bs.empty()) return;
  rec.c_real_loss = real_total / bs.size();
  rec.c_fake_loss = fake_total / bs.size();
  rec.c_critic_loss = critic_total / bs.size();
}

void Trainer::epoch_critics(const Dataset& data, const std::string& tag, MetricsRecord& rec) {
  const auto bs = batches(data, Pool::Union, tag);
  double d_total = 0.0, c_total = 0.0;
  for (std::size_t k = 0; k < bs.size(); ++k) {
    auto rng = stream(tag + "/" + std::to_string(k));
    const auto fb = make_fakes(bs[k].seqs, bs[k].size(), rng);
    Graph<float> g;
    auto dl = d_critic_loss(model_.discriminator.forward(g, model_.params, fb.seqs, Mode::Eval, nullptr));
    auto cl = c_critic_loss(model_.classifier.forward(g, model_.params, fb.seqs, Mode::Eval, nullptr),
                            std::span<const ClassLabel>(fb.classes));
    d_total += dl.item();
    c_total += cl.item();
    step(g, dl + cl, {&dcrit_opt_, &ccrit_opt_}, tag);
  }
  if (bs.empty()) return;
  rec.d_critic_loss = d_total / bs.size();
  rec.c_critic_loss = c_total / bs.size();
}

void Trainer::epoch_g_adv(const Dataset& data, const std::string& tag, MetricsRecord& rec) {
  const auto bs = batches(data, Pool::Union, tag);
  double loss_total = 0.0, reward_total = 0.0, adv_total = 0.0;
  long sequences = 0, steps = 0;
  for (std::size_t k = 0; k < bs.size(); ++k) {
    auto rng = stream(tag + "/" + std::to_string(k));
    const auto fb = make_fakes(bs[k].seqs, bs[k].size(), rng);
    std::vector<BlendTrace> blends;
    {
      Graph<float> g;
      const auto dt = traces(model_.discriminator.forward(g, model_.params, fb.seqs, Mode::Eval, nullptr));
      const auto ct = traces(model_.classifier.forward(g, model_.params, fb.seqs, Mode::Eval, nullptr));
      for (std::size_t b = 0; b < fb.seqs.size(); ++b) {
        blends.push_back(step_blends(dt[b], ct[b], fb.classes[b], schedule_.alpha_offset));
        reward_total += blends.back().reward;
        ++sequences;
        for (std::size_t t = 0; t < blends.back().mask.size(); ++t) {
          if (!blends.back().mask[t]) continue;
          adv_total += blends.back().advantage[t];
          ++steps;
        }
      }
    }
    Graph<float> g;
    auto lp = step_log_probs(g, model_.params, model_.generator, fb.contexts, fb.seqs,
                             std::span<const ClassLabel>(fb.classes), fb.z, Mode::Train, &rng);
    loss_total += step(g, policy_surrogate_loss(lp.values, std::span<const BlendTrace>(blends)), {&g_opt_}, tag);
  }
  if (bs.empty()) return;
  rec.surrogate_loss = loss_total / bs.size();
  rec.mean_reward = reward_total / std::max(1L, sequences);
  rec.mean_advantage = adv_total / std::max(1L, steps);
}

void Trainer::pretrain(const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("pretraining needs a non-empty dataset");
  const auto& s = schedule_;
  for (int e = 0; e < s.pretrain_g_epochs; ++e) {
    phase_log_.push_back(bracket("pretrain-g", e));
    MetricsRecord rec{"pretrain-g", e};
    rec.mle_loss = epoch_g_mle(data, "pretrain-g/" + std::to_string(e));
    fill_validation(rec);
    emit(std::move(rec));
  }
  for (int e = 0; e < s.pretrain_d_epochs; ++e) {
    phase_log_.push_back(bracket("pretrain-d", e));
    MetricsRecord rec{"pretrain-d", e};
    rec.d_loss = epoch_d(data, "pretrain-d/" + std::to_string(e), false);
    fill_validation(rec);
    emit(std::move(rec));
  }
  if (s.pretrain_c_epochs > 0 && data.labeled.empty()) {
    throw std::invalid_argument("classifier pretraining needs labeled data");
  }
  for (int e = 0; e < s.pretrain_c_epochs; ++e) {
    phase_log_.push_back(bracket("pretrain-c", e));
    MetricsRecord rec{"pretrain-c", e};
    rec.c_real_loss = epoch_c_real(data, "pretrain-c/" + std::to_string(e));
    fill_validation(rec);
    emit(std::move(rec));
  }
  for (int e = 0; e < s.pretrain_critic_epochs; ++e) {
    phase_log_.push_back(bracket("pretrain-critic", e));
    MetricsRecord rec{"pretrain-critic", e};
    epoch_critics(data, "pretrain-critic/" + std::to_string(e), rec);
    fill_validation(rec);
    emit(std::move(rec));
  }
}

void Trainer::adversarial_train(const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("adversarial training needs a non-empty dataset");
  const auto& s = schedule_;
  if (s.c_epochs > 0 && s.training_epochs > 0 && data.labeled.empty()) {
    throw std::invalid_argument("classifier updates need labeled data");
  }
  for (int i = 0; i < s.training_epochs; ++i) {
    const std::string outer = bracket("adv", i);
    const std::string base = "adv/" + std::to_string(i) + "/";
    MetricsRecord rec{"adv", i};
    for (int j = 0; j < s.g_adv_epochs; ++j) {
      phase_log_.push_back(outer + "/" + bracket("g-adv", j));
      epoch_g_adv(data, base + "g-adv/" + std::to_string(j), rec);
    }
    for (int j = 0; j < s.g_mle_epochs; ++j) {
      phase_log_.push_back(outer + "/" + bracket("g-mle", j));
      rec.mle_loss = epoch_g_mle(data, base + "g-mle/" + std::to_string(j));
    }
    for (int j = 0; j < s.d_epochs; ++j) {
      phase_log_.push_back(outer + "/" + bracket("d", j));
      double critic = 0.0;
      rec.d_loss = epoch_d(data, base + "d/" + std::to_string(j), true, &critic);
      rec.d_critic_loss = critic;
    }
    for (int j = 0; j < s.c_epochs; ++j) {
      phase_log_.push_back(outer + "/" + bracket("c", j));
      epoch_c_adv(data, base + "c/" + std::to_string(j), rec);
    }
    fill_validation(rec);
    emit(std::move(rec));
  }
}

}  // namespace spamgan
