#include "spamgan/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spamgan {

std::string entropy_sign_name(EntropySign s) { return s == EntropySign::Paper ? "paper" : "min-entropy"; }

EntropySign parse_entropy_sign(const std::string& s) {
  if (s == "paper") return EntropySign::Paper;
  if (s == "min-entropy") return EntropySign::MinEntropy;
  throw std::invalid_argument("unknown entropy sign '" + s + "' (expected paper or min-entropy)");
}

template <typename Scalar>
ClassifierOutput<Scalar> Classifier<Scalar>::forward(Graph<Scalar>& g, ParamSet<Scalar>& params,
                                                     std::span<const TokenSequence> seqs, Mode mode,
                                                     std::mt19937_64* rng) const {
  auto s = scorer_.forward(g, params, seqs, mode, rng);
  return {softmax_rows(s.head), s.critic, std::move(s.mask), s.batch, s.length};
}

template <typename Scalar>
Var<Scalar> sentence_scores(const ClassifierOutput<Scalar>& out) {
  return average_steps(out.q, out.mask, out.batch);
}

namespace {

std::vector<int> class_columns(std::span<const ClassLabel> classes, std::size_t rows) {
  std::vector<int> cols(rows);
  for (std::size_t r = 0; r < rows; ++r) cols[r] = class_index(classes[r % classes.size()]);
  return cols;
}

}  // namespace

template <typename Scalar>
Var<Scalar> c_loss_real(Var<Scalar> scores, std::span<const ClassLabel> labels) {
  if (Index(labels.size()) != scores.rows()) throw std::invalid_argument("c_loss_real: label count mismatch");
  const auto cols = class_columns(labels, labels.size());
  return mean(safe_log(pick(scores, std::span<const int>(cols)))) * Scalar(-1);
}

template <typename Scalar>
Var<Scalar> c_loss_fake(Var<Scalar> scores, std::span<const ClassLabel> classes, double beta, EntropySign sign) {
  if (Index(classes.size()) != scores.rows()) throw std::invalid_argument("c_loss_fake: class count mismatch");
  const auto cols = class_columns(classes, classes.size());
  auto ce = safe_log(pick(scores, std::span<const int>(cols))) * Scalar(-1);
  auto entropy = row_sum(hadamard(scores, safe_log(scores))) * Scalar(-1);
  const Scalar w = static_cast<Scalar>(sign == EntropySign::Paper ? -beta : beta);
  return mean(ce + entropy * w);
}

template <typename Scalar>
Var<Scalar> c_critic_loss(const ClassifierOutput<Scalar>& out, std::span<const ClassLabel> classes) {
  if (static_cast<int>(classes.size()) != out.batch) throw std::invalid_argument("c_critic_loss: class count mismatch");
  const auto cols = class_columns(classes, out.mask.size());
  return masked_regression_loss(pick(out.q, std::span<const int>(cols)), pick(out.v, std::span<const int>(cols)),
                                out.mask, out.batch);
}

template <typename Scalar>
std::vector<StepTraceC> traces(const ClassifierOutput<Scalar>& out) {
  const auto& q = out.q.value();
  const auto& v = out.v.value();
  std::vector<StepTraceC> tr(out.batch);
  for (int b = 0; b < out.batch; ++b) {
    for (int t = 0; t < out.length; ++t) {
      const Index r = Index(t) * out.batch + b;
      for (int k = 0; k < kNumClasses; ++k) {
        tr[b].q[k].push_back(static_cast<double>(q(r, k)));
        tr[b].v[k].push_back(static_cast<double>(v(r, k)));
      }
      tr[b].mask.push_back(out.mask[r]);
    }
  }
  return tr;
}

ClassLabel predict(double spam_score) { return spam_score > 0.5 ? ClassLabel::Spam : ClassLabel::NonSpam; }

ClassLabel predict(const StepTraceC& trace) { return predict(sentence_score(trace, ClassLabel::Spam)); }

double sentence_score(const StepTraceC& trace, ClassLabel c) {
  const auto& q = trace.q[class_index(c)];
  double total = 0.0;
  int n = 0;
  for (std::size_t t = 0; t < q.size(); ++t) {
    if (!trace.mask[t]) continue;
    total += q[t];
    ++n;
  }
  if (n == 0) throw std::invalid_argument("sentence score of a fully masked sequence");
  return total / n;
}

double binary_entropy(double s) {
  auto term = [](double p) { return p > 0.0 ? -p * std::log(std::max(p, kLogFloor)) : 0.0; };
  return term(s) + term(1.0 - s);
}

double c_loss_real(std::span<const double> true_class_scores) {
  if (true_class_scores.empty()) throw std::invalid_argument("c_loss_real: empty batch");
  double total = 0.0;
  for (double s : true_class_scores) total -= std::log(std::max(s, kLogFloor));
  return total / true_class_scores.size();
}

double c_loss_fake(std::span<const double> intended_class_scores, double beta, EntropySign sign) {
  if (intended_class_scores.empty()) throw std::invalid_argument("c_loss_fake: empty batch");
  const double w = sign == EntropySign::Paper ? -beta : beta;
  double total = 0.0;
  for (double s : intended_class_scores) total += -std::log(std::max(s, kLogFloor)) + w * binary_entropy(s);
  return total / intended_class_scores.size();
}

double c_critic_loss(std::span<const StepTraceC> traces, std::span<const ClassLabel> classes) {
  if (traces.size() != classes.size()) throw std::invalid_argument("c_critic_loss: class count mismatch");
  if (traces.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t b = 0; b < traces.size(); ++b) {
    const int k = class_index(classes[b]);
    for (std::size_t t = 0; t < traces[b].mask.size(); ++t) {
      if (!traces[b].mask[t]) continue;
      const double e = traces[b].q[k][t] - traces[b].v[k][t];
      total += e * e;
    }
  }
  return total / traces.size();
}

#define SPAMGAN_INSTANTIATE_CLASSIFIER(S)                                                     \
  template class Classifier<S>;                                                               \
  template Var<S> sentence_scores<S>(const ClassifierOutput<S>&);                             \
  template Var<S> c_loss_real<S>(Var<S>, std::span<const ClassLabel>);                        \
  template Var<S> c_loss_fake<S>(Var<S>, std::span<const ClassLabel>, double, EntropySign);   \
  template Var<S> c_critic_loss<S>(const ClassifierOutput<S>&, std::span<const ClassLabel>);  \
  template std::vector<StepTraceC> traces<S>(const ClassifierOutput<S>&);

SPAMGAN_INSTANTIATE_CLASSIFIER(float)
SPAMGAN_INSTANTIATE_CLASSIFIER(double)

}  // namespace spamgan
