#include "spamgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spamgan {

EvalReport accuracy_f1(std::span<const ClassLabel> predictions, std::span<const ClassLabel> truths) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("accuracy_f1: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("accuracy_f1: no samples");
  EvalReport r;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] == ClassLabel::Spam;
    const bool t = truths[i] == ClassLabel::Spam;
    if (p && t) ++r.true_positive;
    if (p && !t) ++r.false_positive;
    if (!p && t) ++r.false_negative;
    if (!p && !t) ++r.true_negative;
  }
  r.samples = static_cast<long>(predictions.size());
  r.accuracy = double(r.true_positive + r.true_negative) / r.samples;
  const long pp = r.true_positive + r.false_positive;
  const long ap = r.true_positive + r.false_negative;
  r.precision = pp > 0 ? double(r.true_positive) / pp : 0.0;
  r.recall = ap > 0 ? double(r.true_positive) / ap : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

template <typename Scalar>
double perplexity(ParamSet<Scalar>& params, const Generator<Scalar>& gen, std::span<const TokenSequence> seqs,
                  std::span<const ClassLabel> classes, std::mt19937_64 rng, int batch_size) {
  if (seqs.empty()) throw std::invalid_argument("perplexity: empty held-out set");
  if (seqs.size() != classes.size()) throw std::invalid_argument("perplexity: class count mismatch");
  const Matrix<double> z = sample_noise(gen.config().noise, static_cast<int>(seqs.size()), rng);
  double nll = 0.0;
  long count = 0;
  for (std::size_t start = 0; start < seqs.size(); start += batch_size) {
    const std::size_t n = std::min<std::size_t>(batch_size, seqs.size() - start);
    Graph<Scalar> g;
    auto lp = step_log_probs(g, params, gen, seqs.subspan(start, n), seqs.subspan(start, n), classes.subspan(start, n),
                             Matrix<double>(z.middleRows(Index(start), Index(n))), Mode::Eval, nullptr);
    const auto& v = lp.values.value();
    for (Index i = 0; i < v.rows(); ++i) {
      if (!lp.mask[std::size_t(i)]) continue;
      nll -= static_cast<double>(v(i, 0));
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("perplexity: no target positions");
  return std::exp(nll / count);
}

template double perplexity<float>(ParamSet<float>&, const Generator<float>&, std::span<const TokenSequence>,
                                  std::span<const ClassLabel>, std::mt19937_64, int);
template double perplexity<double>(ParamSet<double>&, const Generator<double>&, std::span<const TokenSequence>,
                                   std::span<const ClassLabel>, std::mt19937_64, int);

}  // namespace spamgan
