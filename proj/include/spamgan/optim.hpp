#pragma once

#include "spamgan/numcore.hpp"

#include <map>
#include <string>
#include <vector>

namespace spamgan {

struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // decoupled, applied after the Adam update
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

/// Adam moments for one parameter group.
template <typename Scalar>
struct OptimState {
  AdamConfig config;
  std::vector<std::string> names;
  std::map<std::string, Matrix<Scalar>> first_moment;
  std::map<std::string, Matrix<Scalar>> second_moment;
  long step = 0;

  OptimState() = default;
  OptimState(const ParamSet<Scalar>& params, std::vector<std::string> group, AdamConfig cfg);
};

/// Global L2 norm of the gradients of `names`; missing gradients count as zero.
template <typename Scalar>
double global_grad_norm(const ParamSet<Scalar>& params, const std::vector<std::string>& names);

/// Rescales the gradients of `names` so their global norm is at most
/// `max_norm`. Returns the norm before clipping.
template <typename Scalar>
double clip_global_norm(ParamSet<Scalar>& params, const std::vector<std::string>& names, double max_norm);

/// Bias-corrected Adam update followed by decoupled weight decay
/// p <- p * (1 - lr * wd). Parameters without a gradient see a zero gradient.
template <typename Scalar>
void adam_step(ParamSet<Scalar>& params, OptimState<Scalar>& state);

/// Clip (per state.config.clip_norm) then step. Returns the pre-clip norm.
template <typename Scalar>
double clip_and_step(ParamSet<Scalar>& params, OptimState<Scalar>& state);

}  // namespace spamgan
