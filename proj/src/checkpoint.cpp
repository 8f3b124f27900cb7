#include "spamgan/trainer.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace spamgan {

namespace {

using Kind = CheckpointError::Kind;
constexpr char kMagic[4] = {'S', 'G', 'C', 'K'};

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

nlohmann::json backbone_json(const BackboneConfig& b) {
  return {{"kind", backbone_kind_name(b.kind)},
          {"layers", b.layers},
          {"hidden", b.hidden},
          {"heads", b.heads},
          {"ffn", b.ffn},
          {"max_positions", b.max_positions},
          {"dropout_embed", b.dropout_embed},
          {"dropout_core", b.dropout_core},
          {"dropout_head", b.dropout_head}};
}

BackboneConfig backbone_from_json(const nlohmann::json& j) {
  BackboneConfig b;
  b.kind = parse_backbone_kind(j.at("kind").get<std::string>());
  b.layers = j.at("layers").get<int>();
  b.hidden = j.at("hidden").get<int>();
  b.heads = j.at("heads").get<int>();
  b.ffn = j.at("ffn").get<int>();
  b.max_positions = j.at("max_positions").get<int>();
  b.dropout_embed = j.at("dropout_embed").get<double>();
  b.dropout_core = j.at("dropout_core").get<double>();
  b.dropout_head = j.at("dropout_head").get<double>();
  return b;
}

}  // namespace

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"vocab_size", cfg.vocab_size},   {"max_len", cfg.max_len},
          {"embed", cfg.embed},             {"d_z", cfg.noise.dim},
          {"init_std", cfg.init_std},       {"shared_init", cfg.shared_init},
          {"g_backbone", backbone_json(cfg.g_backbone)}, {"dc_backbone", backbone_json(cfg.dc_backbone)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.embed = j.at("embed").get<int>();
  cfg.noise.dim = j.at("d_z").get<int>();
  cfg.init_std = j.at("init_std").get<double>();
  cfg.shared_init = j.at("shared_init").get<bool>();
  cfg.g_backbone = backbone_from_json(j.at("g_backbone"));
  cfg.dc_backbone = backbone_from_json(j.at("dc_backbone"));
  return cfg;
}

void save_checkpoint(const std::string& path, const SpamGanModel& model, const Vocab& vocab, std::uint64_t root_seed,
                     const nlohmann::json& schedule, const nlohmann::json& config) {
  nlohmann::json entries = nlohmann::json::array();
  std::string payload;
  for (const auto& [name, t] : model.params) {
    entries.push_back({{"name", name},
                       {"shape", {t.rows(), t.cols()}},
                       {"dtype", "f32"},
                       {"offset", payload.size()}});
    for (Index i = 0; i < t.value.size(); ++i) put_le(payload, std::bit_cast<std::uint32_t>(t.value.data()[i]));
  }
  const nlohmann::json manifest{{"format_version", kCheckpointVersion},
                                {"root_seed", root_seed},
                                {"model", to_json(model.config)},
                                {"schedule", schedule},
                                {"config", config},
                                {"vocab", vocab.tokens()},
                                {"params", entries}};
  const std::string text = manifest.dump();

  std::string bytes(kMagic, sizeof(kMagic));
  put_le(bytes, kCheckpointVersion);
  put_le(bytes, static_cast<std::uint64_t>(text.size()));
  bytes += text;
  bytes += payload;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::Io, "cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::Io, "failed writing checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::Io, "cannot open checkpoint " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(Kind::Unrecognized, "unrecognized checkpoint: " + path);
  }
  constexpr std::size_t kHeader = sizeof(kMagic) + 4 + 8;
  if (bytes.size() < kHeader) throw CheckpointError(Kind::Truncated, "truncated checkpoint header: " + path);
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::VersionMismatch, "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                                     std::to_string(kCheckpointVersion) + ")");
  }
  const auto length = get_le<std::uint64_t>(bytes.data() + 8);
  if (length > bytes.size() - kHeader) throw CheckpointError(Kind::Truncated, "truncated checkpoint manifest: " + path);

  nlohmann::json manifest;
  ModelConfig cfg;
  std::vector<std::string> tokens;
  std::uint64_t seed = 0;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + kHeader, bytes.begin() + static_cast<std::ptrdiff_t>(kHeader + length));
    if (manifest.at("format_version").get<std::uint32_t>() != kCheckpointVersion) {
      throw CheckpointError(Kind::VersionMismatch, "checkpoint manifest version mismatch");
    }
    cfg = model_config_from_json(manifest.at("model"));
    tokens = manifest.at("vocab").get<std::vector<std::string>>();
    seed = manifest.at("root_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::CorruptHeader, std::string("corrupt checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::CorruptHeader, std::string("corrupt checkpoint header: ") + e.what());
  }

  LoadedCheckpoint out{SpamGanModel(cfg, seed), Vocab::from_tokens(tokens), seed, manifest.value("schedule", nlohmann::json()),
                       manifest.value("config", nlohmann::json())};
  const char* payload = bytes.data() + kHeader + length;
  const std::size_t payload_size = bytes.size() - kHeader - length;

  if (!manifest.contains("params")) throw CheckpointError(Kind::CorruptHeader, "checkpoint manifest lists no parameters");
  const auto& entries = manifest["params"];
  if (!entries.is_array() || entries.size() != out.model.params.size()) {
    throw CheckpointError(Kind::CorruptHeader, "checkpoint parameter list does not match the model");
  }
  std::size_t expected_offset = 0;
  for (const auto& e : entries) {
    std::string name;
    Index rows = 0, cols = 0;
    std::size_t offset = 0;
    try {
      name = e.at("name").get<std::string>();
      rows = e.at("shape").at(0).get<Index>();
      cols = e.at("shape").at(1).get<Index>();
      offset = e.at("offset").get<std::size_t>();
      if (e.at("dtype").get<std::string>() != "f32") throw CheckpointError(Kind::CorruptHeader, "unsupported dtype for " + name);
    } catch (const nlohmann::json::exception& ex) {
      throw CheckpointError(Kind::CorruptHeader, std::string("corrupt parameter entry: ") + ex.what());
    }
    if (!out.model.params.contains(name)) throw CheckpointError(Kind::CorruptHeader, "unknown parameter " + name);
    auto& t = out.model.params.at(name);
    if (rows != t.rows() || cols != t.cols()) {
      throw CheckpointError(Kind::ShapeMismatch, "shape mismatch for parameter " + name + ": checkpoint " + std::to_string(rows) + "x" +
                                                     std::to_string(cols) + ", model " + std::to_string(t.rows()) + "x" +
                                                     std::to_string(t.cols()));
    }
    if (offset != expected_offset) throw CheckpointError(Kind::CorruptHeader, "bad payload offset for parameter " + name);
    const std::size_t n = static_cast<std::size_t>(rows * cols);
    if (offset + 4 * n > payload_size) throw CheckpointError(Kind::Truncated, "truncated checkpoint payload at " + name);
    for (std::size_t i = 0; i < n; ++i) {
      t.value.data()[i] = std::bit_cast<float>(get_le<std::uint32_t>(payload + offset + 4 * i));
    }
    expected_offset = offset + 4 * n;
  }
  if (expected_offset != payload_size) throw CheckpointError(Kind::CorruptHeader, "trailing bytes after checkpoint payload");
  return out;
}

}  // namespace spamgan
