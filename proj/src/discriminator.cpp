#include "spamgan/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spamgan {

template <typename Scalar>
DiscriminatorOutput<Scalar> Discriminator<Scalar>::forward(Graph<Scalar>& g, ParamSet<Scalar>& params,
                                                           std::span<const TokenSequence> seqs, Mode mode,
                                                           std::mt19937_64* rng) const {
  auto s = scorer_.forward(g, params, seqs, mode, rng);
  return {sigmoid(s.head), s.critic, std::move(s.mask), s.batch, s.length};
}

template <typename Scalar>
Var<Scalar> sentence_scores(const DiscriminatorOutput<Scalar>& out) {
  return average_steps(out.q, out.mask, out.batch);
}

template <typename Scalar>
Var<Scalar> d_loss(Var<Scalar> real_scores, Var<Scalar> fake_scores) {
  auto real = mean(safe_log(real_scores));
  auto fake = mean(safe_log(affine(fake_scores, Scalar(-1), Scalar(1))));
  return (real + fake) * Scalar(-1);
}

template <typename Scalar>
Var<Scalar> d_critic_loss(const DiscriminatorOutput<Scalar>& out) {
  return masked_regression_loss(out.q, out.v, out.mask, out.batch);
}

template <typename Scalar>
std::vector<StepTraceD> traces(const DiscriminatorOutput<Scalar>& out) {
  const auto& q = out.q.value();
  const auto& v = out.v.value();
  std::vector<StepTraceD> tr(out.batch);
  for (int b = 0; b < out.batch; ++b) {
    for (int t = 0; t < out.length; ++t) {
      const Index r = Index(t) * out.batch + b;
      tr[b].q.push_back(static_cast<double>(q(r, 0)));
      tr[b].v.push_back(static_cast<double>(v(r, 0)));
      tr[b].mask.push_back(out.mask[r]);
    }
  }
  return tr;
}

double sentence_score(const StepTraceD& trace) {
  double total = 0.0;
  int n = 0;
  for (std::size_t t = 0; t < trace.q.size(); ++t) {
    if (!trace.mask[t]) continue;
    total += trace.q[t];
    ++n;
  }
  if (n == 0) throw std::invalid_argument("sentence score of a fully masked sequence");
  return total / n;
}

double d_loss(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) throw std::invalid_argument("d_loss: empty score set");
  double real = 0.0;
  double fake = 0.0;
  for (double s : real_scores) real -= std::log(std::max(s, kLogFloor));
  for (double s : fake_scores) fake -= std::log(std::max(1.0 - s, kLogFloor));
  return real / real_scores.size() + fake / fake_scores.size();
}

double d_critic_loss(std::span<const StepTraceD> traces) {
  if (traces.empty()) return 0.0;
  double total = 0.0;
  for (const auto& tr : traces) {
    for (std::size_t t = 0; t < tr.q.size(); ++t) {
      if (tr.mask[t]) total += (tr.q[t] - tr.v[t]) * (tr.q[t] - tr.v[t]);
    }
  }
  return total / traces.size();
}

#define SPAMGAN_INSTANTIATE_DISCRIMINATOR(S)                                    \
  template class Discriminator<S>;                                              \
  template Var<S> sentence_scores<S>(const DiscriminatorOutput<S>&);            \
  template Var<S> d_loss<S>(Var<S>, Var<S>);                                    \
  template Var<S> d_critic_loss<S>(const DiscriminatorOutput<S>&);              \
  template std::vector<StepTraceD> traces<S>(const DiscriminatorOutput<S>&);

SPAMGAN_INSTANTIATE_DISCRIMINATOR(float)
SPAMGAN_INSTANTIATE_DISCRIMINATOR(double)

}  // namespace spamgan
