#include "spamgan/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spamgan {

Matrix<double> sample_noise(const NoiseSpec& spec, int batch, std::mt19937_64& rng) {
  if (spec.dim < 1) throw std::invalid_argument("noise dimension must be at least 1");
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix<double> z(batch, spec.dim);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = n(rng);
  return z;
}

std::string decode_kind_name(DecodeKind k) {
  switch (k) {
    case DecodeKind::Greedy: return "greedy";
    case DecodeKind::TopPFree: return "free";
    case DecodeKind::TopPTeacher: return "teacher";
  }
  return "free";
}

DecodeKind parse_decode_kind(const std::string& s) {
  if (s == "greedy") return DecodeKind::Greedy;
  if (s == "free") return DecodeKind::TopPFree;
  if (s == "teacher") return DecodeKind::TopPTeacher;
  throw std::invalid_argument("unknown decode strategy '" + s + "' (expected greedy, free or teacher)");
}

template <typename Scalar>
Generator<Scalar>::Generator(GeneratorConfig cfg, std::string prefix)
    : cfg_(cfg),
      prefix_(std::move(prefix)),
      backbone_(cfg.backbone, prefix_ + "backbone/", cfg.embed + cfg.noise.dim + kNumClasses) {
  if (cfg_.vocab_size <= kNumSpecialTokens) throw std::invalid_argument("generator: vocabulary too small");
  if (cfg_.embed < 1) throw std::invalid_argument("generator: embedding width must be positive");
}

template <typename Scalar>
void Generator<Scalar>::init(ParamSet<Scalar>& params, std::mt19937_64& rng, double init_std) const {
  params.add(prefix_ + "embed", gaussian<Scalar>(cfg_.vocab_size, cfg_.embed, init_std, rng));
  backbone_.init(params, rng, init_std);
  params.add(prefix_ + "out/w", gaussian<Scalar>(cfg_.backbone.hidden, cfg_.vocab_size, init_std, rng));
  params.add(prefix_ + "out/b", Matrix<Scalar>::Zero(1, cfg_.vocab_size));
}

template <typename Scalar>
Var<Scalar> Generator<Scalar>::logits(Graph<Scalar>& g, ParamSet<Scalar>& params, std::span<const int> ids, int batch,
                                      int length, std::span<const ClassLabel> classes, const Matrix<double>& z,
                                      Mode mode, std::mt19937_64* rng) const {
  if (static_cast<int>(classes.size()) != batch || z.rows() != batch || z.cols() != cfg_.noise.dim) {
    throw std::invalid_argument("generator: classes or noise do not match the batch");
  }
  const int dz = cfg_.noise.dim;
  Matrix<Scalar> context = Matrix<Scalar>::Zero(Index(batch) * length, dz + kNumClasses);
  for (int t = 0; t < length; ++t) {
    for (int b = 0; b < batch; ++b) {
      const Index r = Index(t) * batch + b;
      context.row(r).head(dz) = z.row(b).template cast<Scalar>();
      context(r, dz + class_index(classes[b])) = Scalar(1);
    }
  }
  auto emb = gather_rows(g.parameter(params.at(prefix_ + "embed")), ids);
  const Var<Scalar> parts[] = {emb, g.constant(std::move(context))};
  auto x = concat_cols<Scalar>(parts);

  std::mt19937_64* drop = mode == Mode::Train ? rng : nullptr;
  auto h = backbone_.forward(g, params, x, make_layout(ids, batch, length), mode, rng);
  h = dropout(h, cfg_.backbone.dropout_head, drop);
  return add_bias(matmul(h, g.parameter(params.at(prefix_ + "out/w"))), g.parameter(params.at(prefix_ + "out/b")));
}

template <typename Scalar>
StepLogProbs<Scalar> step_log_probs(Graph<Scalar>& g, ParamSet<Scalar>& params, const Generator<Scalar>& gen,
                                    std::span<const TokenSequence> contexts, std::span<const TokenSequence> targets,
                                    std::span<const ClassLabel> classes, const Matrix<double>& z, Mode mode,
                                    std::mt19937_64* rng) {
  if (contexts.empty() || contexts.size() != targets.size()) throw std::invalid_argument("step_log_probs: batch mismatch");
  const int B = static_cast<int>(contexts.size());
  const int T = contexts[0].max_length();
  if (T < 2) throw std::invalid_argument("step_log_probs: sequences need at least two positions");
  const int L = T - 1;
  const auto inputs = time_major_ids(contexts, 0, L);
  auto next = time_major_ids(targets, 1, L);

  StepLogProbs<Scalar> out;
  out.mask.resize(next.size());
  Matrix<Scalar> mask(next.size(), 1);
  for (std::size_t i = 0; i < next.size(); ++i) {
    out.mask[i] = next[i] != kPad;
    mask(Index(i), 0) = out.mask[i] ? Scalar(1) : Scalar(0);
  }
  auto logp = log_softmax_rows(gen.logits(g, params, inputs, B, L, classes, z, mode, rng));
  out.values = hadamard(pick(logp, std::span<const int>(next)), g.constant(std::move(mask)));
  return out;
}

template <typename Scalar>
Var<Scalar> mle_loss(Graph<Scalar>& g, ParamSet<Scalar>& params, const Generator<Scalar>& gen,
                     std::span<const TokenSequence> seqs, std::span<const ClassLabel> classes,
                     const Matrix<double>& z, Mode mode, std::mt19937_64* rng) {
  auto lp = step_log_probs(g, params, gen, seqs, seqs, classes, z, mode, rng);
  return sum(lp.values) * Scalar(-1.0 / static_cast<double>(seqs.size()));
}

template <typename Scalar>
std::vector<double> step_dist(ParamSet<Scalar>& params, const Generator<Scalar>& gen, std::span<const int> prefix,
                              ClassLabel c, std::span<const double> z) {
  if (prefix.empty() || prefix[0] != kStart) throw std::invalid_argument("step_dist: prefix must begin with <start>");
  Matrix<double> zm(1, static_cast<Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) zm(0, Index(i)) = z[i];
  Graph<Scalar> g;
  const ClassLabel cls[] = {c};
  const int t = static_cast<int>(prefix.size());
  auto logits = gen.logits(g, params, prefix, 1, t, cls, zm, Mode::Eval, nullptr);
  Matrix<Scalar> last = logits.value().row(t - 1);
  Matrix<Scalar> dist = softmax(last);
  std::vector<double> out(static_cast<std::size_t>(dist.cols()));
  for (Index j = 0; j < dist.cols(); ++j) out[std::size_t(j)] = static_cast<double>(dist(0, j));
  return out;
}

TopPResult top_p_filter(std::span<const double> dist, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("top_p_filter: p must lie in (0, 1]");
  std::vector<int> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] > dist[b]; });

  TopPResult r;
  r.probs.assign(dist.size(), 0.0);
  // The tolerance keeps sums like 0.6 + 0.3 from falling just short of 0.9.
  for (int id : order) {
    r.kept.push_back(id);
    r.kept_mass += dist[id];
    if (r.kept_mass + 1e-12 >= p) break;
  }
  for (int id : r.kept) r.probs[id] = dist[id] / r.kept_mass;
  return r;
}

template <typename Scalar>
NextTokenFn next_token_fn(ParamSet<Scalar>& params, const Generator<Scalar>& gen, std::vector<ClassLabel> classes,
                          Matrix<double> z) {
  return [&params, &gen, classes = std::move(classes), z = std::move(z)](std::span<const int> ids, int batch,
                                                                         int length) {
    Graph<Scalar> g;
    auto logits = gen.logits(g, params, ids, batch, length, classes, z, Mode::Eval, nullptr);
    return Matrix<double>(softmax(logits.value()).template cast<double>());
  };
}

namespace {

// Decoding never emits <start> or <pad>.
std::vector<double> decoding_dist(const Matrix<double>& dists, Index row) {
  std::vector<double> d(dists.row(row).data(), dists.row(row).data() + dists.cols());
  d[kStart] = 0.0;
  d[kPad] = 0.0;
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  if (total <= 0.0) {
    std::fill(d.begin(), d.end(), 0.0);
    d[kEnd] = 1.0;
    return d;
  }
  for (double& v : d) v /= total;
  return d;
}

int argmax_lowest(std::span<const double> d) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(d.size()); ++i) {
    if (d[i] > d[best]) best = i;
  }
  return best;
}

int draw(const TopPResult& f, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (int id : f.kept) {
    acc += f.probs[id];
    if (u < acc) return id;
  }
  return f.kept.back();
}

double model_log_prob(const Matrix<double>& dists, Index row, int token) {
  return std::log(std::max(dists(row, token), kLogFloor));
}

}  // namespace

SampleResult sample_free(const NextTokenFn& model, int batch, const DecodeStrategy& strategy, std::mt19937_64& rng) {
  if (strategy.kind == DecodeKind::TopPTeacher) throw std::invalid_argument("sample_free: teacher forcing needs anchors");
  const int T = strategy.max_length;
  if (T < 2) throw std::invalid_argument("sample_free: max length must be at least 2");
  SampleResult out;
  out.seqs.assign(batch, TokenSequence{std::vector<int>(T, kPad), T});
  out.log_probs.resize(batch);
  std::vector<std::uint8_t> done(batch, 0);
  for (auto& s : out.seqs) s.ids[0] = kStart;

  int live = batch;
  for (int t = 1; t < T && live > 0; ++t) {
    const auto ids = time_major_ids(out.seqs, 0, t);
    const Matrix<double> dists = model(ids, batch, t);
    for (int b = 0; b < batch; ++b) {
      if (done[b]) continue;
      const Index row = Index(t - 1) * batch + b;
      const auto d = decoding_dist(dists, row);
      const int tok = strategy.kind == DecodeKind::Greedy ? argmax_lowest(d) : draw(top_p_filter(d, strategy.p), rng);
      out.seqs[b].ids[t] = tok;
      out.log_probs[b].push_back(model_log_prob(dists, row, tok));
      if (tok == kEnd) {
        out.seqs[b].length = t + 1;
        done[b] = 1;
        --live;
      }
    }
  }
  return out;
}

SampleResult teacher_forced_sample(const NextTokenFn& model, std::span<const TokenSequence> anchors, double p,
                                   std::mt19937_64& rng) {
  SampleResult out;
  if (anchors.empty()) return out;
  const int B = static_cast<int>(anchors.size());
  const int T = anchors[0].max_length();
  const int L = T - 1;
  const auto ids = time_major_ids(anchors, 0, L);
  const Matrix<double> dists = model(ids, B, L);

  out.seqs.assign(B, TokenSequence{std::vector<int>(T, kPad), 0});
  out.log_probs.resize(B);
  for (int b = 0; b < B; ++b) {
    if (anchors[b].length < 2) throw std::invalid_argument("teacher_forced_sample: anchor shorter than two tokens");
    auto& fake = out.seqs[b];
    fake.ids[0] = kStart;
    fake.length = anchors[b].length;
    for (int t = 1; t < anchors[b].length; ++t) {
      const Index row = Index(t - 1) * B + b;
      const int tok = draw(top_p_filter(decoding_dist(dists, row), p), rng);
      fake.ids[t] = tok;
      out.log_probs[b].push_back(model_log_prob(dists, row, tok));
    }
  }
  return out;
}

#define SPAMGAN_INSTANTIATE_GENERATOR(S)                                                                            \
  template class Generator<S>;                                                                                      \
  template StepLogProbs<S> step_log_probs<S>(Graph<S>&, ParamSet<S>&, const Generator<S>&,                          \
                                             std::span<const TokenSequence>, std::span<const TokenSequence>,        \
                                             std::span<const ClassLabel>, const Matrix<double>&, Mode,              \
                                             std::mt19937_64*);                                                     \
  template Var<S> mle_loss<S>(Graph<S>&, ParamSet<S>&, const Generator<S>&, std::span<const TokenSequence>,         \
                              std::span<const ClassLabel>, const Matrix<double>&, Mode, std::mt19937_64*);          \
  template std::vector<double> step_dist<S>(ParamSet<S>&, const Generator<S>&, std::span<const int>, ClassLabel,    \
                                            std::span<const double>);                                               \
  template NextTokenFn next_token_fn<S>(ParamSet<S>&, const Generator<S>&, std::vector<ClassLabel>, Matrix<double>);

SPAMGAN_INSTANTIATE_GENERATOR(float)
SPAMGAN_INSTANTIATE_GENERATOR(double)

}  // namespace spamgan
