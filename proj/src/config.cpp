#include "spamgan/config.hpp"

#include "spamgan/errors.hpp"

#include <fstream>
#include <functional>
#include <type_traits>

namespace spamgan {

namespace {

using nlohmann::json;

struct Field {
  const char* name;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

template <typename T>
Field field(const char* name, T RunConfig::*member) {
  auto set = [name, member](RunConfig& c, const json& v) {
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      ok = v.is_number_unsigned();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else {
      ok = v.is_string();
    }
    if (!ok) throw ConfigError("config key \"" + std::string(name) + "\" has the wrong type");
    c.*member = v.get<T>();
  };
  return {name, [member](const RunConfig& c) { return json(c.*member); }, set};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("seed", &RunConfig::seed),
      field("vocab_size", &RunConfig::vocab_size),
      field("max_len", &RunConfig::max_len),
      field("backbone", &RunConfig::backbone),
      field("layers", &RunConfig::layers),
      field("hidden", &RunConfig::hidden),
      field("heads", &RunConfig::heads),
      field("ffn", &RunConfig::ffn),
      field("embed", &RunConfig::embed),
      field("dropout_embed_g", &RunConfig::dropout_embed_g),
      field("dropout_core_g", &RunConfig::dropout_core_g),
      field("dropout_head_g", &RunConfig::dropout_head_g),
      field("dropout_embed_dc", &RunConfig::dropout_embed_dc),
      field("dropout_core_dc", &RunConfig::dropout_core_dc),
      field("dropout_head_dc", &RunConfig::dropout_head_dc),
      field("init_std", &RunConfig::init_std),
      field("shared_init", &RunConfig::shared_init),
      field("d_z", &RunConfig::d_z),
      field("decode", &RunConfig::decode),
      field("top_p", &RunConfig::top_p),
      field("beta", &RunConfig::beta),
      field("entropy_sign", &RunConfig::entropy_sign),
      field("alpha_offset", &RunConfig::alpha_offset),
      field("class_prior", &RunConfig::class_prior),
      field("pretrain_g_epochs", &RunConfig::pretrain_g_epochs),
      field("pretrain_d_epochs", &RunConfig::pretrain_d_epochs),
      field("pretrain_c_epochs", &RunConfig::pretrain_c_epochs),
      field("pretrain_critic_epochs", &RunConfig::pretrain_critic_epochs),
      field("training_epochs", &RunConfig::training_epochs),
      field("g_adv_epochs", &RunConfig::g_adv_epochs),
      field("g_mle_epochs", &RunConfig::g_mle_epochs),
      field("d_epochs", &RunConfig::d_epochs),
      field("c_epochs", &RunConfig::c_epochs),
      field("batch_size", &RunConfig::batch_size),
      field("max_batches_per_epoch", &RunConfig::max_batches_per_epoch),
      field("lr_g", &RunConfig::lr_g),
      field("lr_d", &RunConfig::lr_d),
      field("lr_c", &RunConfig::lr_c),
      field("lr_critic", &RunConfig::lr_critic),
      field("wd_g", &RunConfig::wd_g),
      field("wd_d", &RunConfig::wd_d),
      field("wd_c", &RunConfig::wd_c),
      field("clip_norm", &RunConfig::clip_norm),
      field("validation_fraction", &RunConfig::validation_fraction),
      field("labeled_path", &RunConfig::labeled_path),
      field("unlabeled_path", &RunConfig::unlabeled_path),
      field("checkpoint_path", &RunConfig::checkpoint_path),
      field("metrics_path", &RunConfig::metrics_path),
      field("metrics_wall_clock", &RunConfig::metrics_wall_clock),
      field("synth_sigma", &RunConfig::synth_sigma),
      field("synth_labeled", &RunConfig::synth_labeled),
      field("synth_unlabeled", &RunConfig::synth_unlabeled),
      field("synth_test", &RunConfig::synth_test),
      field("synth_keywords_per_class", &RunConfig::synth_keywords_per_class),
      field("synth_keyword_rate", &RunConfig::synth_keyword_rate),
      field("synth_min_words", &RunConfig::synth_min_words),
      field("synth_zipf_exponent", &RunConfig::synth_zipf_exponent),
  };
  return table;
}

BackboneConfig backbone(const RunConfig& c, BackboneKind kind, double de, double dc, double dh) {
  BackboneConfig b;
  b.kind = kind;
  b.layers = c.layers;
  b.hidden = c.hidden;
  b.heads = c.heads;
  b.ffn = c.ffn;
  b.max_positions = c.max_len;
  b.dropout_embed = de;
  b.dropout_core = dc;
  b.dropout_head = dh;
  return b;
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.max_len = max_len;
  m.embed = embed;
  m.noise.dim = d_z;
  const bool attention = backbone == "attention";
  m.g_backbone = spamgan::backbone(*this, attention ? BackboneKind::AttentionMasked : BackboneKind::Recurrent,
                                   dropout_embed_g, dropout_core_g, dropout_head_g);
  m.dc_backbone = spamgan::backbone(*this, attention ? BackboneKind::AttentionUnmasked : BackboneKind::Recurrent,
                                    dropout_embed_dc, dropout_core_dc, dropout_head_dc);
  m.init_std = init_std;
  m.shared_init = shared_init;
  return m;
}

TrainSchedule RunConfig::schedule() const {
  TrainSchedule s;
  s.pretrain_g_epochs = pretrain_g_epochs;
  s.pretrain_d_epochs = pretrain_d_epochs;
  s.pretrain_c_epochs = pretrain_c_epochs;
  s.pretrain_critic_epochs = pretrain_critic_epochs;
  s.training_epochs = training_epochs;
  s.g_adv_epochs = g_adv_epochs;
  s.g_mle_epochs = g_mle_epochs;
  s.d_epochs = d_epochs;
  s.c_epochs = c_epochs;
  s.batch_size = batch_size;
  s.max_batches_per_epoch = max_batches_per_epoch;
  s.g_opt = AdamConfig{lr_g, wd_g};
  s.d_opt = AdamConfig{lr_d, wd_d};
  s.c_opt = AdamConfig{lr_c, wd_c};
  s.critic_opt = AdamConfig{lr_critic, 0.0};
  for (auto* o : {&s.g_opt, &s.d_opt, &s.c_opt, &s.critic_opt}) o->clip_norm = clip_norm;
  s.decode.kind = parse_decode_kind(decode);
  s.decode.p = top_p;
  s.decode.max_length = max_len;
  s.beta = beta;
  s.entropy_sign = parse_entropy_sign(entropy_sign);
  s.alpha_offset = alpha_offset;
  s.prior.spam = class_prior;
  s.validation_fraction = validation_fraction;
  s.metrics_wall_clock = metrics_wall_clock;
  return s;
}

SynthCorpusSpec RunConfig::synth_spec() const {
  SynthCorpusSpec s;
  s.vocab_size = vocab_size;
  s.max_len = max_len;
  s.min_words = synth_min_words;
  s.keywords_per_class = synth_keywords_per_class;
  s.keyword_rate = synth_keyword_rate;
  s.zipf_exponent = synth_zipf_exponent;
  s.sigma = synth_sigma;
  s.spam_prior = class_prior;
  s.labeled = synth_labeled;
  s.unlabeled = synth_unlabeled;
  s.test = synth_test;
  s.seed = seed;
  return s;
}

void RunConfig::validate() const {
  try {
    if (backbone != "recurrent" && backbone != "attention") {
      throw std::invalid_argument("backbone must be \"recurrent\" or \"attention\"");
    }
    if (vocab_size <= kNumSpecialTokens) throw std::invalid_argument("vocab_size must exceed the special tokens");
    if (embed < 1 || d_z < 0) throw std::invalid_argument("embed must be positive and d_z non-negative");
    if (!(init_std > 0.0)) throw std::invalid_argument("init_std must be positive");
    if (!(lr_g > 0.0 && lr_d > 0.0 && lr_c > 0.0 && lr_critic > 0.0)) {
      throw std::invalid_argument("learning rates must be positive");
    }
    if (wd_g < 0.0 || wd_d < 0.0 || wd_c < 0.0) throw std::invalid_argument("weight decays must be non-negative");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
    const auto m = model_config();
    m.g_backbone.validate();
    m.dc_backbone.validate();
    if (max_len < 3) throw std::invalid_argument("max_len must be at least 3");
    schedule().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a key/value object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    const Field* f = nullptr;
    for (const auto& candidate : fields()) {
      if (key == candidate.name) f = &candidate;
    }
    if (f == nullptr) throw ConfigError("unknown config key \"" + key + "\"");
    f->set(c, value);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& f : fields()) j[f.name] = f.get(cfg);
  return j;
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "desk") return c;
  if (name == "gpt2") {
    c.backbone = "attention";
    c.decode = "teacher";
    c.lr_g = c.lr_d = c.lr_c = 6.25e-5;
    c.wd_g = 1e-7;
    c.wd_d = c.wd_c = 1e-5;
    c.dropout_embed_g = 0.2, c.dropout_core_g = 0.1, c.dropout_head_g = 0.2;
    c.dropout_embed_dc = 0.4, c.dropout_core_dc = 0.1, c.dropout_head_dc = 0.4;
    return c;
  }
  throw ConfigError("unknown preset \"" + name + "\" (expected desk or gpt2)");
}

}  // namespace spamgan
