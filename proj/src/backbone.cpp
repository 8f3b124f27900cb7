#include "spamgan/backbone.hpp"

#include <stdexcept>

namespace spamgan {

std::string backbone_kind_name(BackboneKind k) {
  switch (k) {
    case BackboneKind::Recurrent: return "recurrent";
    case BackboneKind::AttentionMasked: return "attention-masked";
    case BackboneKind::AttentionUnmasked: return "attention-unmasked";
  }
  return "recurrent";
}

BackboneKind parse_backbone_kind(const std::string& s) {
  if (s == "recurrent") return BackboneKind::Recurrent;
  if (s == "attention-masked") return BackboneKind::AttentionMasked;
  if (s == "attention-unmasked") return BackboneKind::AttentionUnmasked;
  throw std::invalid_argument("unknown backbone kind '" + s + "'");
}

void BackboneConfig::validate() const {
  if (layers < 1 || hidden < 1 || max_positions < 1) throw std::invalid_argument("backbone: sizes must be positive");
  if (kind != BackboneKind::Recurrent) {
    if (heads < 1 || hidden % heads != 0) throw std::invalid_argument("backbone: hidden width must be divisible by heads");
    if (ffn < 1) throw std::invalid_argument("backbone: feedforward width must be positive");
  }
  for (double r : {dropout_embed, dropout_core, dropout_head}) {
    if (r < 0.0 || r >= 1.0) throw std::invalid_argument("backbone: dropout rates must lie in [0, 1)");
  }
}

std::vector<int> time_major_ids(std::span<const TokenSequence> seqs, int first, int length) {
  const int B = static_cast<int>(seqs.size());
  std::vector<int> ids(static_cast<std::size_t>(B) * length);
  for (int b = 0; b < B; ++b) {
    if (first + length > seqs[b].max_length()) throw std::out_of_range("time_major_ids: window exceeds sequence");
    for (int t = 0; t < length; ++t) ids[static_cast<std::size_t>(t * B + b)] = seqs[b].ids[first + t];
  }
  return ids;
}

SequenceLayout make_layout(std::span<const int> ids, int batch, int length) {
  SequenceLayout layout{batch, length, {}};
  layout.valid.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) layout.valid[i] = ids[i] != kPad;
  return layout;
}

template <typename Scalar>
Matrix<Scalar> gaussian(Index rows, Index cols, double std, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, std);
  Matrix<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(n(rng));
  return m;
}

template <typename Scalar>
Backbone<Scalar>::Backbone(BackboneConfig cfg, std::string prefix, int input_width)
    : cfg_(cfg), prefix_(std::move(prefix)), input_width_(input_width) {
  cfg_.validate();
  if (input_width_ < 1) throw std::invalid_argument("backbone: input width must be positive");
}

template <typename Scalar>
void Backbone<Scalar>::init(ParamSet<Scalar>& params, std::mt19937_64& rng, double init_std) const {
  const Index H = cfg_.hidden;
  auto zeros = [](Index r, Index c) { return Matrix<Scalar>::Zero(r, c); };
  if (cfg_.kind == BackboneKind::Recurrent) {
    for (int l = 0; l < cfg_.layers; ++l) {
      const Index in = l == 0 ? input_width_ : H;
      const std::string p = "gru" + std::to_string(l) + "/";
      params.add(name(p + "w"), gaussian<Scalar>(in, 3 * H, init_std, rng));
      params.add(name(p + "u_zr"), gaussian<Scalar>(H, 2 * H, init_std, rng));
      params.add(name(p + "u_n"), gaussian<Scalar>(H, H, init_std, rng));
      params.add(name(p + "b"), zeros(1, 3 * H));
    }
    return;
  }
  params.add(name("in/w"), gaussian<Scalar>(input_width_, H, init_std, rng));
  params.add(name("in/b"), zeros(1, H));
  params.add(name("pos"), gaussian<Scalar>(cfg_.max_positions, H, init_std, rng));
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "block" + std::to_string(l) + "/";
    params.add(name(p + "ln1/g"), Matrix<Scalar>::Ones(1, H));
    params.add(name(p + "ln1/b"), zeros(1, H));
    params.add(name(p + "attn/w_qkv"), gaussian<Scalar>(H, 3 * H, init_std, rng));
    params.add(name(p + "attn/b_q"), zeros(1, H));
    params.add(name(p + "attn/b_v"), zeros(1, H));
    params.add(name(p + "attn/w_o"), gaussian<Scalar>(H, H, init_std, rng));
    params.add(name(p + "attn/b_o"), zeros(1, H));
    params.add(name(p + "ln2/g"), Matrix<Scalar>::Ones(1, H));
    params.add(name(p + "ln2/b"), zeros(1, H));
    params.add(name(p + "ffn/w1"), gaussian<Scalar>(H, cfg_.ffn, init_std, rng));
    params.add(name(p + "ffn/b1"), zeros(1, cfg_.ffn));
    params.add(name(p + "ffn/w2"), gaussian<Scalar>(cfg_.ffn, H, init_std, rng));
    params.add(name(p + "ffn/b2"), zeros(1, H));
  }
  params.add(name("ln_f/g"), Matrix<Scalar>::Ones(1, H));
  params.add(name("ln_f/b"), zeros(1, H));
}

template <typename Scalar>
Var<Scalar> Backbone<Scalar>::forward(Graph<Scalar>& g, ParamSet<Scalar>& params, Var<Scalar> inputs,
                                      const SequenceLayout& layout, Mode mode, std::mt19937_64* rng) const {
  if (layout.length > cfg_.max_positions) {
    throw std::length_error("sequence length " + std::to_string(layout.length) + " exceeds the backbone limit of " +
                            std::to_string(cfg_.max_positions) + " positions");
  }
  if (inputs.rows() != layout.rows() || inputs.cols() != input_width_) {
    throw std::invalid_argument("backbone: input shape does not match layout");
  }
  if (static_cast<Index>(layout.valid.size()) != layout.rows()) throw std::invalid_argument("backbone: mask size");
  std::mt19937_64* drop = mode == Mode::Train ? rng : nullptr;
  return cfg_.kind == BackboneKind::Recurrent ? forward_recurrent(g, params, inputs, layout, drop)
                                              : forward_attention(g, params, inputs, layout, drop);
}

template <typename Scalar>
Var<Scalar> Backbone<Scalar>::forward_recurrent(Graph<Scalar>& g, ParamSet<Scalar>& params, Var<Scalar> x,
                                                const SequenceLayout& layout, std::mt19937_64* rng) const {
  const Index H = cfg_.hidden;
  const Index B = layout.batch;
  x = dropout(x, cfg_.dropout_embed, rng);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "gru" + std::to_string(l) + "/";
    auto w = g.parameter(params.at(name(p + "w")));
    auto u_zr = g.parameter(params.at(name(p + "u_zr")));
    auto u_n = g.parameter(params.at(name(p + "u_n")));
    auto b = g.parameter(params.at(name(p + "b")));

    auto xw = add_bias(matmul(x, w), b);
    auto h = g.constant(Matrix<Scalar>::Zero(B, H));
    std::vector<Var<Scalar>> states;
    states.reserve(static_cast<std::size_t>(layout.length));
    for (int t = 0; t < layout.length; ++t) {
      auto xt = slice_rows(xw, t * B, B);
      auto zr = sigmoid(slice_cols(xt, 0, 2 * H) + matmul(h, u_zr));
      auto z = slice_cols(zr, 0, H);
      auto r = slice_cols(zr, H, H);
      auto n = tanh(slice_cols(xt, 2 * H, H) + matmul(hadamard(r, h), u_n));
      // (1 - z) * n + z * h
      h = n + hadamard(z, h - n);
      states.push_back(h);
    }
    x = concat_rows<Scalar>(states);
    if (l + 1 < cfg_.layers) x = dropout(x, cfg_.dropout_core, rng);
  }
  return x;
}

template <typename Scalar>
Var<Scalar> Backbone<Scalar>::forward_attention(Graph<Scalar>& g, ParamSet<Scalar>& params, Var<Scalar> x,
                                                const SequenceLayout& layout, std::mt19937_64* rng) const {
  const int B = layout.batch;
  const int T = layout.length;
  auto P = [&](const std::string& leaf) { return g.parameter(params.at(name(leaf))); };

  std::vector<int> positions(static_cast<std::size_t>(B) * T);
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) positions[static_cast<std::size_t>(t * B + b)] = t;
  }
  x = add_bias(matmul(x, P("in/w")), P("in/b"));
  x = x + gather_rows(P("pos"), positions);
  x = dropout(x, cfg_.dropout_embed, rng);

  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "block" + std::to_string(l) + "/";
    auto a = layer_norm(x, P(p + "ln1/g"), P(p + "ln1/b"));
    // A key bias would shift every score in a row equally, so keys carry none.
    const Var<Scalar> bias[] = {P(p + "attn/b_q"), g.constant(Matrix<Scalar>::Zero(1, cfg_.hidden)), P(p + "attn/b_v")};
    auto qkv = add_bias(matmul(a, P(p + "attn/w_qkv")), concat_cols<Scalar>(bias));
    auto att = attention(qkv, B, T, cfg_.heads, cfg_.causal(), layout.valid);
    x = x + dropout(add_bias(matmul(att, P(p + "attn/w_o")), P(p + "attn/b_o")), cfg_.dropout_core, rng);
    auto m = layer_norm(x, P(p + "ln2/g"), P(p + "ln2/b"));
    auto f = gelu(add_bias(matmul(m, P(p + "ffn/w1")), P(p + "ffn/b1")));
    f = add_bias(matmul(f, P(p + "ffn/w2")), P(p + "ffn/b2"));
    x = x + dropout(f, cfg_.dropout_core, rng);
  }
  return layer_norm(x, P("ln_f/g"), P("ln_f/b"));
}

template class Backbone<float>;
template class Backbone<double>;
template Matrix<float> gaussian<float>(Index, Index, double, std::mt19937_64&);
template Matrix<double> gaussian<double>(Index, Index, double, std::mt19937_64&);

}  // namespace spamgan
