#include "spamgan/scorer.hpp"

#include <stdexcept>

namespace spamgan {

template <typename Scalar>
SequenceScorer<Scalar>::SequenceScorer(ScorerConfig cfg, std::string prefix, std::string critic_prefix, int outputs)
    : cfg_(cfg),
      prefix_(std::move(prefix)),
      critic_prefix_(std::move(critic_prefix)),
      outputs_(outputs),
      backbone_(cfg.backbone, prefix_ + "backbone/", cfg.embed) {
  if (cfg_.vocab_size <= kNumSpecialTokens) throw std::invalid_argument("scorer: vocabulary too small");
  if (outputs_ < 1) throw std::invalid_argument("scorer: head width must be positive");
}

template <typename Scalar>
void SequenceScorer<Scalar>::init(ParamSet<Scalar>& params, std::mt19937_64& rng, double init_std) const {
  const Index H = cfg_.backbone.hidden;
  params.add(prefix_ + "embed", gaussian<Scalar>(cfg_.vocab_size, cfg_.embed, init_std, rng));
  backbone_.init(params, rng, init_std);
  params.add(prefix_ + "head/w", gaussian<Scalar>(H, outputs_, init_std, rng));
  params.add(prefix_ + "head/b", Matrix<Scalar>::Zero(1, outputs_));
  params.add(critic_prefix_ + "w", gaussian<Scalar>(H, outputs_, init_std, rng));
  params.add(critic_prefix_ + "b", Matrix<Scalar>::Zero(1, outputs_));
}

template <typename Scalar>
StepOutputs<Scalar> SequenceScorer<Scalar>::forward(Graph<Scalar>& g, ParamSet<Scalar>& params,
                                                    std::span<const TokenSequence> seqs, Mode mode,
                                                    std::mt19937_64* rng) const {
  if (seqs.empty()) throw std::invalid_argument("scorer: empty batch");
  const int B = static_cast<int>(seqs.size());
  const int T = seqs[0].max_length();
  if (T < 2) throw std::invalid_argument("scorer: sequences need at least two positions");
  const auto ids = time_major_ids(seqs, 0, T);
  auto x = gather_rows(g.parameter(params.at(prefix_ + "embed")), std::span<const int>(ids));
  auto h = backbone_.forward(g, params, x, make_layout(ids, B, T), mode, rng);

  StepOutputs<Scalar> out;
  out.batch = B;
  out.length = T - 1;
  out.mask.assign(ids.begin() + B, ids.end());
  for (auto& m : out.mask) m = m != kPad;

  std::mt19937_64* drop = mode == Mode::Train ? rng : nullptr;
  auto after = dropout(slice_rows(h, B, Index(B) * (T - 1)), cfg_.backbone.dropout_head, drop);
  out.head = add_bias(matmul(after, g.parameter(params.at(prefix_ + "head/w"))),
                      g.parameter(params.at(prefix_ + "head/b")));
  auto before = slice_rows(detach(h), 0, Index(B) * (T - 1));
  out.critic = add_bias(matmul(before, g.parameter(params.at(critic_prefix_ + "w"))),
                        g.parameter(params.at(critic_prefix_ + "b")));
  return out;
}

template <typename Scalar>
Var<Scalar> average_steps(Var<Scalar> per_step, std::span<const std::uint8_t> mask, int batch) {
  const Index rows = per_step.rows();
  if (Index(mask.size()) != rows || rows % batch != 0) throw std::invalid_argument("average_steps: shape mismatch");
  std::vector<int> counts(batch, 0);
  for (Index r = 0; r < rows; ++r) counts[r % batch] += mask[r] ? 1 : 0;
  Matrix<Scalar> avg = Matrix<Scalar>::Zero(batch, rows);
  for (Index r = 0; r < rows; ++r) {
    const int b = static_cast<int>(r % batch);
    if (counts[b] == 0) throw std::invalid_argument("sentence score of a fully masked sequence");
    if (mask[r]) avg(b, r) = Scalar(1) / Scalar(counts[b]);
  }
  return matmul(per_step.graph->constant(std::move(avg)), per_step);
}

template <typename Scalar>
Var<Scalar> masked_regression_loss(Var<Scalar> target, Var<Scalar> estimate, std::span<const std::uint8_t> mask,
                                   int batch) {
  Matrix<Scalar> w(static_cast<Index>(mask.size()), 1);
  for (std::size_t i = 0; i < mask.size(); ++i) w(Index(i), 0) = mask[i] ? Scalar(1) / Scalar(batch) : Scalar(0);
  auto sq = square(detach(target) - estimate);
  return sum(hadamard(sq, estimate.graph->constant(std::move(w))));
}

#define SPAMGAN_INSTANTIATE_SCORER(S)                                                                      \
  template class SequenceScorer<S>;                                                                       \
  template Var<S> average_steps<S>(Var<S>, std::span<const std::uint8_t>, int);                           \
  template Var<S> masked_regression_loss<S>(Var<S>, Var<S>, std::span<const std::uint8_t>, int);

SPAMGAN_INSTANTIATE_SCORER(float)
SPAMGAN_INSTANTIATE_SCORER(double)

}  // namespace spamgan
