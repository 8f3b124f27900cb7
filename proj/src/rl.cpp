#include "spamgan/rl.hpp"

#include <algorithm>
#include <stdexcept>

namespace spamgan {

double blend(double d_value, double c_value) {
  const double s = d_value + c_value;
  if (s < 1e-12) return 0.0;
  return 2.0 * d_value * c_value / s;
}

double sentence_reward(double d_score, double c_score) { return blend(d_score, c_score); }

BlendTrace step_blends(const StepTraceD& d, const StepTraceC& c, ClassLabel cls, bool alpha_offset) {
  const std::size_t L = d.q.size();
  const int k = class_index(cls);
  if (d.v.size() != L || d.mask.size() != L || c.q[k].size() != L || c.v[k].size() != L || c.mask.size() != L) {
    throw std::invalid_argument("step_blends: trace lengths differ");
  }
  BlendTrace out;
  out.mask = d.mask;
  out.q.assign(L, 0.0);
  out.v.assign(L, 0.0);
  out.advantage.assign(L, 0.0);
  out.alpha.assign(L, 0.0);
  for (std::size_t t = 0; t < L; ++t) {
    if (d.mask[t] != c.mask[t]) throw std::invalid_argument("step_blends: trace masks differ");
    out.effective_length += d.mask[t] ? 1 : 0;
  }
  int step = 0;
  for (std::size_t t = 0; t < L; ++t) {
    if (!out.mask[t]) continue;
    ++step;
    out.q[t] = blend(d.q[t], c.q[k][t]);
    out.v[t] = blend(std::clamp(d.v[t], 0.0, 1.0), std::clamp(c.v[k][t], 0.0, 1.0));
    out.advantage[t] = out.q[t] - out.v[t];
    out.alpha[t] = out.effective_length - step + (alpha_offset ? 1 : 0);
  }
  if (out.effective_length > 0) out.reward = sentence_reward(sentence_score(d), sentence_score(c, cls));
  return out;
}

template <typename Scalar>
Var<Scalar> policy_surrogate_loss(Var<Scalar> log_probs, std::span<const BlendTrace> blends) {
  const Index B = static_cast<Index>(blends.size());
  if (B == 0 || log_probs.rows() % B != 0) throw std::invalid_argument("policy_surrogate_loss: batch mismatch");
  const Index L = log_probs.rows() / B;
  Matrix<Scalar> w = Matrix<Scalar>::Zero(log_probs.rows(), 1);
  for (Index b = 0; b < B; ++b) {
    if (Index(blends[b].alpha.size()) != L) throw std::invalid_argument("policy_surrogate_loss: trace length mismatch");
    for (Index t = 0; t < L; ++t) {
      if (!blends[b].mask[t]) continue;
      w(t * B + b, 0) = static_cast<Scalar>(-blends[b].alpha[t] * blends[b].advantage[t] / double(B));
    }
  }
  return sum(hadamard(log_probs, log_probs.graph->constant(std::move(w))));
}

double policy_surrogate_loss(std::span<const BlendTrace> blends, std::span<const std::vector<double>> log_probs) {
  if (blends.size() != log_probs.size()) throw std::invalid_argument("policy_surrogate_loss: batch mismatch");
  if (blends.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t b = 0; b < blends.size(); ++b) {
    for (std::size_t t = 0; t < blends[b].alpha.size() && t < log_probs[b].size(); ++t) {
      if (blends[b].mask[t]) total += blends[b].alpha[t] * blends[b].advantage[t] * log_probs[b][t];
    }
  }
  return -total / blends.size();
}

template Var<float> policy_surrogate_loss<float>(Var<float>, std::span<const BlendTrace>);
template Var<double> policy_surrogate_loss<double>(Var<double>, std::span<const BlendTrace>);

}  // namespace spamgan
