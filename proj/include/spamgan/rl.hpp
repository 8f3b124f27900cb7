#pragma once

#include "spamgan/classifier.hpp"
#include "spamgan/discriminator.hpp"
#include "spamgan/numcore.hpp"

#include <span>
#include <vector>

namespace spamgan {

/// Harmonic (F1-style) blend 2dc / (d + c); 0 when d + c < 1e-12.
double blend(double d_value, double c_value);

/// Sentence reward from the averaged discriminator and classifier scores.
double sentence_reward(double d_score, double c_score);

/// Blended per-timestep scores of one sequence, indexed by trace position
/// t - 1. Masked positions hold zeros.
struct BlendTrace {
  std::vector<double> q;
  std::vector<double> v;
  std::vector<double> advantage;
  std::vector<double> alpha;
  std::vector<std::uint8_t> mask;
  double reward = 0.0;
  int effective_length = 0;
};

/// Q_t = blend(Q_D, Q_C(c)), V_t = blend(V_D, V_C(c)) with critic values
/// clamped to [0, 1], A_t = Q_t - V_t, alpha_t = T_eff - t (+1 with
/// `alpha_offset`).
BlendTrace step_blends(const StepTraceD& d, const StepTraceC& c, ClassLabel cls, bool alpha_offset = false);

/// -(1/B) sum_b sum_t alpha_t A_t log G(y_t | .), with the blend terms held
/// constant. `log_probs` is the ((T-1) * B) x 1 column from step_log_probs.
template <typename Scalar>
Var<Scalar> policy_surrogate_loss(Var<Scalar> log_probs, std::span<const BlendTrace> blends);

/// Value-level form; log_probs[b][t - 1] is the log-probability at position t.
double policy_surrogate_loss(std::span<const BlendTrace> blends, std::span<const std::vector<double>> log_probs);

}  // namespace spamgan
