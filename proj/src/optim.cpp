#include "spamgan/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace spamgan {

template <typename Scalar>
OptimState<Scalar>::OptimState(const ParamSet<Scalar>& params, std::vector<std::string> group, AdamConfig cfg)
    : config(cfg), names(std::move(group)) {
  for (const auto& n : names) {
    const auto& t = params.at(n);
    first_moment[n] = Matrix<Scalar>::Zero(t.rows(), t.cols());
    second_moment[n] = Matrix<Scalar>::Zero(t.rows(), t.cols());
  }
}

template <typename Scalar>
double global_grad_norm(const ParamSet<Scalar>& params, const std::vector<std::string>& names) {
  double sq = 0.0;
  for (const auto& n : names) {
    const auto& t = params.at(n);
    if (t.has_grad()) sq += t.grad.template cast<double>().squaredNorm();
  }
  return std::sqrt(sq);
}

template <typename Scalar>
double clip_global_norm(ParamSet<Scalar>& params, const std::vector<std::string>& names, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_global_norm: max_norm must be positive");
  const double norm = global_grad_norm(params, names);
  if (norm > max_norm) {
    const auto factor = static_cast<Scalar>(max_norm / norm);
    for (const auto& n : names) {
      auto& t = params.at(n);
      if (t.has_grad()) t.grad *= factor;
    }
  }
  return norm;
}

template <typename Scalar>
void adam_step(ParamSet<Scalar>& params, OptimState<Scalar>& state) {
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const auto b1 = static_cast<Scalar>(c.beta1);
  const auto b2 = static_cast<Scalar>(c.beta2);
  const auto lr = static_cast<Scalar>(c.learning_rate);
  const auto eps = static_cast<Scalar>(c.epsilon);
  const auto decay = static_cast<Scalar>(1.0 - c.learning_rate * c.weight_decay);
  for (const auto& n : state.names) {
    auto& t = params.at(n);
    auto& m = state.first_moment.at(n);
    auto& v = state.second_moment.at(n);
    if (m.rows() != t.rows() || m.cols() != t.cols()) throw std::invalid_argument("adam_step: shape mismatch for " + n);
    if (t.has_grad()) {
      m = b1 * m + (Scalar(1) - b1) * t.grad;
      v = b2 * v + (Scalar(1) - b2) * t.grad.cwiseProduct(t.grad);
    } else {
      m *= b1;
      v *= b2;
    }
    const auto mhat = (m.array() / static_cast<Scalar>(bc1));
    const auto vhat = (v.array() / static_cast<Scalar>(bc2));
    t.value.array() -= lr * mhat / (vhat.sqrt() + eps);
    if (c.weight_decay != 0.0) t.value *= decay;
  }
}

template <typename Scalar>
double clip_and_step(ParamSet<Scalar>& params, OptimState<Scalar>& state) {
  const double norm = state.config.clip_norm > 0.0 ? clip_global_norm(params, state.names, state.config.clip_norm)
                                                   : global_grad_norm(params, state.names);
  adam_step(params, state);
  return norm;
}

#define SPAMGAN_INSTANTIATE_OPTIM(S)                                                              \
  template struct OptimState<S>;                                                                  \
  template double global_grad_norm(const ParamSet<S>&, const std::vector<std::string>&);         \
  template double clip_global_norm(ParamSet<S>&, const std::vector<std::string>&, double);       \
  template void adam_step(ParamSet<S>&, OptimState<S>&);                                          \
  template double clip_and_step(ParamSet<S>&, OptimState<S>&);

SPAMGAN_INSTANTIATE_OPTIM(float)
SPAMGAN_INSTANTIATE_OPTIM(double)

}  // namespace spamgan
