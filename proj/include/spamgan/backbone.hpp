#pragma once

#include "spamgan/corpus.hpp"
#include "spamgan/numcore.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace spamgan {

enum class BackboneKind { Recurrent, AttentionMasked, AttentionUnmasked };

std::string backbone_kind_name(BackboneKind k);
BackboneKind parse_backbone_kind(const std::string& s);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::Recurrent;
  int layers = 1;
  int hidden = 64;
  int heads = 2;  // attention kinds only
  int ffn = 256;  // attention kinds only
  int max_positions = 32;
  double dropout_embed = 0.0;
  double dropout_core = 0.0;
  double dropout_head = 0.0;

  bool causal() const { return kind != BackboneKind::AttentionUnmasked; }
  void validate() const;
};

enum class Mode { Train, Eval };

/// Shape of a time-major batch: row t * batch + b. `valid` marks non-pad rows.
struct SequenceLayout {
  int batch = 0;
  int length = 0;
  std::vector<std::uint8_t> valid;

  Index rows() const { return Index(batch) * length; }
};

/// Token ids seqs[b].ids[first + t] at row t * batch + b, and the matching
/// layout (pad tokens invalid).
std::vector<int> time_major_ids(std::span<const TokenSequence> seqs, int first, int length);
SequenceLayout make_layout(std::span<const int> ids, int batch, int length);

/// Sequence feature extractor: a stack of gated recurrent units, or a stack of
/// pre-norm transformer blocks with a causal (decoder) or full (encoder) mask.
template <typename Scalar>
class Backbone {
 public:
  Backbone() = default;
  Backbone(BackboneConfig cfg, std::string prefix, int input_width);

  void init(ParamSet<Scalar>& params, std::mt19937_64& rng, double init_std) const;

  /// `inputs` is (T*B) x input_width in time-major order; returns (T*B) x hidden.
  /// Dropout is active only in Train mode with a non-null rng.
  Var<Scalar> forward(Graph<Scalar>& g, ParamSet<Scalar>& params, Var<Scalar> inputs, const SequenceLayout& layout,
                      Mode mode, std::mt19937_64* rng) const;

  const BackboneConfig& config() const { return cfg_; }
  int input_width() const { return input_width_; }
  const std::string& prefix() const { return prefix_; }

 private:
  Var<Scalar> forward_recurrent(Graph<Scalar>& g, ParamSet<Scalar>& params, Var<Scalar> x, const SequenceLayout& layout,
                                std::mt19937_64* rng) const;
  Var<Scalar> forward_attention(Graph<Scalar>& g, ParamSet<Scalar>& params, Var<Scalar> x, const SequenceLayout& layout,
                                std::mt19937_64* rng) const;
  std::string name(const std::string& leaf) const { return prefix_ + leaf; }

  BackboneConfig cfg_;
  std::string prefix_;
  int input_width_ = 0;
};

/// Seeded N(0, std^2) matrix.
template <typename Scalar>
Matrix<Scalar> gaussian(Index rows, Index cols, double std, std::mt19937_64& rng);

}  // namespace spamgan
