#pragma once

// Tiny models and batches shared by the unit tests.

#include "spamgan/backbone.hpp"
#include "spamgan/classifier.hpp"
#include "spamgan/corpus.hpp"
#include "spamgan/discriminator.hpp"
#include "spamgan/generator.hpp"

#include <random>
#include <vector>

namespace fixtures {

using namespace spamgan;

inline BackboneConfig tiny_backbone(BackboneKind kind, int max_positions = 8) {
  BackboneConfig cfg;
  cfg.kind = kind;
  cfg.layers = 2;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.ffn = 8;
  cfg.max_positions = max_positions;
  return cfg;
}

inline GeneratorConfig tiny_generator(BackboneKind kind, int vocab = 5) {
  GeneratorConfig cfg;
  cfg.vocab_size = vocab;
  cfg.embed = 3;
  cfg.noise.dim = 2;
  cfg.backbone = tiny_backbone(kind);
  return cfg;
}

inline ScorerConfig tiny_scorer(BackboneKind kind, int vocab = 5) {
  ScorerConfig cfg;
  cfg.vocab_size = vocab;
  cfg.embed = 3;
  cfg.backbone = tiny_backbone(kind);
  return cfg;
}

/// Encoded sentences of length T = 4 over a 5-token vocabulary (one word id
/// 4), mixing full-length, <end>-terminated and padded shapes.
inline std::vector<TokenSequence> tiny_batch() {
  return {
      {{kStart, 4, 4, 4}, 4},
      {{kStart, 4, kEnd, kPad}, 3},
      {{kStart, kUnk, 4, kEnd}, 4},
  };
}

inline std::vector<ClassLabel> tiny_classes() { return {ClassLabel::Spam, ClassLabel::NonSpam, ClassLabel::Spam}; }

inline Matrix<double> tiny_noise(int batch = 3, int dim = 2, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  return sample_noise(NoiseSpec{dim}, batch, rng);
}

inline const BackboneKind kAllKinds[] = {BackboneKind::Recurrent, BackboneKind::AttentionMasked,
                                         BackboneKind::AttentionUnmasked};

}  // namespace fixtures
