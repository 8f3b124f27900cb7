#include "spamgan/numcore.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace spamgan {

// ---- ParamSet --------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar>& ParamSet<Scalar>::add(const std::string& name, Matrix<Scalar> init) {
  auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw std::invalid_argument("duplicate parameter name: " + name);
  it->second.value = std::move(init);
  return it->second;
}

template <typename Scalar>
Tensor<Scalar>& ParamSet<Scalar>::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

template <typename Scalar>
const Tensor<Scalar>& ParamSet<Scalar>::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

template <typename Scalar>
std::vector<std::string> ParamSet<Scalar>::names(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, t] : params_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  }
  return out;
}

template <typename Scalar>
void ParamSet<Scalar>::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

// ---- Graph -----------------------------------------------------------------

template <typename Scalar>
Var<Scalar> Graph<Scalar>::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::parameter(Tensor<Scalar>& t) {
  Node n;
  n.value = t.value;
  n.param = &t;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Mat value, std::span<const Var<Scalar>> parents, Backward fn) {
  Node n;
  n.value = std::move(value);
  for (const auto& p : parents) n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Mat value, std::initializer_list<Var<Scalar>> parents, Backward fn) {
  return record(std::move(value), std::span<const Var<Scalar>>(parents.begin(), parents.size()), std::move(fn));
}

template <typename Scalar>
void Graph<Scalar>::backward(Var<Scalar> root) {
  if (root.graph != this) throw std::invalid_argument("backward: root belongs to another graph");
  Node& r = nodes_[root.id];
  if (r.value.rows() != 1 || r.value.cols() != 1) throw std::invalid_argument("backward: root must be 1x1");
  if (!r.requires_grad) return;
  r.grad = Mat::Ones(1, 1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, n.grad, n.value);
    if (n.param != nullptr) {
      if (n.param->has_grad()) {
        n.param->grad += n.grad;
      } else {
        n.param->grad = n.grad;
      }
    }
  }
}

// ---- elementwise and linear ops -------------------------------------------

namespace {

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.rows()) {
    std::ostringstream os;
    os << "matmul: inner dimensions " << a.cols() << " and " << b.rows() << " differ";
    throw std::invalid_argument(os.str());
  }
  Matrix<Scalar> out = a.value() * b.value();
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    if (g.requires_grad(a)) g.accumulate(a, G * g.value(b).transpose());
    if (g.requires_grad(b)) g.accumulate(b, g.value(a).transpose() * G);
  });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  require_same_shape(a, b, "add");
  return a.graph->record(a.value() + b.value(), {a, b}, [a, b](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    g.accumulate(a, G);
    g.accumulate(b, G);
  });
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  require_same_shape(a, b, "sub");
  return a.graph->record(a.value() - b.value(), {a, b}, [a, b](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    g.accumulate(a, G);
    g.accumulate(b, -G);
  });
}

template <typename Scalar>
Var<Scalar> hadamard(Var<Scalar> a, Var<Scalar> b) {
  require_same_shape(a, b, "hadamard");
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    if (g.requires_grad(a)) g.accumulate(a, G.cwiseProduct(g.value(b)));
    if (g.requires_grad(b)) g.accumulate(b, G.cwiseProduct(g.value(a)));
  });
}

template <typename Scalar>
Var<Scalar> affine(Var<Scalar> a, Scalar scale, Scalar shift) {
  Matrix<Scalar> out = (a.value() * scale).array() + shift;
  return a.graph->record(std::move(out), {a},
                         [a, scale](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) { g.accumulate(a, G * scale); });
}

template <typename Scalar>
Var<Scalar> add_bias(Var<Scalar> a, Var<Scalar> row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_bias: bias must be 1 x cols");
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.graph->record(std::move(out), {a, row}, [a, row](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    g.accumulate(a, G);
    if (g.requires_grad(row)) g.accumulate(row, G.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  Matrix<Scalar> y = a.value().unaryExpr([](Scalar x) {
    return x >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-x)) : std::exp(x) / (Scalar(1) + std::exp(x));
  });
  return a.graph->record(std::move(y), {a}, [a](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>& Y) {
    g.accumulate(a, G.cwiseProduct(Y.cwiseProduct((Scalar(1) - Y.array()).matrix())));
  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  Matrix<Scalar> y = a.value().array().tanh().matrix();
  return a.graph->record(std::move(y), {a}, [a](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>& Y) {
    g.accumulate(a, G.cwiseProduct((Scalar(1) - Y.array().square()).matrix()));
  });
}

template <typename Scalar>
Var<Scalar> gelu(Var<Scalar> a) {
  const Scalar k = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>);
  const Scalar c = Scalar(0.044715);
  Matrix<Scalar> y = a.value().unaryExpr(
      [k, c](Scalar x) { return Scalar(0.5) * x * (Scalar(1) + std::tanh(k * (x + c * x * x * x))); });
  return a.graph->record(std::move(y), {a}, [a, k, c](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    Matrix<Scalar> d = g.value(a).unaryExpr([k, c](Scalar x) {
      const Scalar th = std::tanh(k * (x + c * x * x * x));
      return Scalar(0.5) * (Scalar(1) + th) +
             Scalar(0.5) * x * (Scalar(1) - th * th) * k * (Scalar(1) + Scalar(3) * c * x * x);
    });
    g.accumulate(a, G.cwiseProduct(d));
  });
}

template <typename Scalar>
Var<Scalar> safe_log(Var<Scalar> a) {
  const Scalar floor = Scalar(kLogFloor);
  Matrix<Scalar> y = a.value().unaryExpr([floor](Scalar x) { return std::log(std::max(x, floor)); });
  return a.graph->record(std::move(y), {a}, [a, floor](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    Matrix<Scalar> d = g.value(a).unaryExpr([floor](Scalar x) { return x > floor ? Scalar(1) / x : Scalar(0); });
    g.accumulate(a, G.cwiseProduct(d));
  });
}

template <typename Scalar>
Var<Scalar> square(Var<Scalar> a) {
  Matrix<Scalar> y = a.value().array().square().matrix();
  return a.graph->record(std::move(y), {a}, [a](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    g.accumulate(a, (G.cwiseProduct(g.value(a)) * Scalar(2)).eval());
  });
}

// ---- normalisations ---------------------------------------------------------

namespace {

template <typename Scalar>
void check_finite_rows(const Matrix<Scalar>& m, const char* op) {
  for (Index r = 0; r < m.rows(); ++r) {
    if (!m.row(r).allFinite()) {
      std::ostringstream os;
      os << op << ": non-finite input in row " << r;
      throw std::domain_error(os.str());
    }
  }
}

template <typename Scalar>
Matrix<Scalar> softmax_rows_value(const Matrix<Scalar>& x) {
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

}  // namespace

template <typename Scalar>
Var<Scalar> softmax_rows(Var<Scalar> logits) {
  check_finite_rows(logits.value(), "softmax");
  Matrix<Scalar> y = softmax_rows_value(logits.value());
  return logits.graph->record(std::move(y), {logits}, [logits](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>& Y) {
    const auto& s = Y;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = G.cwiseProduct(s).rowwise().sum();
    Matrix<Scalar> d = s.cwiseProduct((G.colwise() - dot));
    g.accumulate(logits, d);
  });
}

template <typename Scalar>
Var<Scalar> log_softmax_rows(Var<Scalar> logits) {
  check_finite_rows(logits.value(), "log_softmax");
  const auto& x = logits.value();
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar m = x.row(r).maxCoeff();
    const Scalar lse = m + std::log((x.row(r).array() - m).exp().sum());
    y.row(r) = (x.row(r).array() - lse).matrix();
  }
  return logits.graph->record(std::move(y), {logits}, [logits](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>& Y) {
    Matrix<Scalar> p = Y.array().exp().matrix();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> total = G.rowwise().sum();
    Matrix<Scalar> d = G - (p.array().colwise() * total.array()).matrix();
    g.accumulate(logits, d);
  });
}

template <typename Scalar>
Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gain, Var<Scalar> bias, Scalar eps) {
  const auto& xv = x.value();
  const Index n = xv.cols();
  if (gain.cols() != n || bias.cols() != n) throw std::invalid_argument("layer_norm: gain/bias width mismatch");
  Matrix<Scalar> xhat(xv.rows(), n);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const Scalar mu = xv.row(r).mean();
    const Scalar var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = ((xv.row(r).array() - mu) * inv_std(r)).matrix();
  }
  Matrix<Scalar> y = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  y.rowwise() += bias.value().row(0);
  return x.graph->record(std::move(y), {x, gain, bias},
                         [x, gain, bias, xhat, inv_std](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
                           if (g.requires_grad(gain)) g.accumulate(gain, G.cwiseProduct(xhat).colwise().sum());
                           if (g.requires_grad(bias)) g.accumulate(bias, G.colwise().sum());
                           if (!g.requires_grad(x)) return;
                           Matrix<Scalar> dxhat = (G.array().rowwise() * g.value(gain).row(0).array()).matrix();
                           Matrix<Scalar> dx(G.rows(), G.cols());
                           for (Index r = 0; r < G.rows(); ++r) {
                             const Scalar m1 = dxhat.row(r).mean();
                             const Scalar m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                             dx.row(r) = ((dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r)).matrix();
                           }
                           g.accumulate(x, dx);
                         });
}

// ---- structural ops ---------------------------------------------------------

template <typename Scalar>
Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var<Scalar>> saved(parts.begin(), parts.end());
  return parts[0].graph->record(std::move(out), parts, [saved](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    Index o = 0;
    for (const auto& p : saved) {
      const Index c = g.value(p).cols();
      if (g.requires_grad(p)) g.accumulate(p, G.middleCols(o, c));
      o += c;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_rows(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  std::vector<Var<Scalar>> saved(parts.begin(), parts.end());
  return parts[0].graph->record(std::move(out), parts, [saved](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    Index o = 0;
    for (const auto& p : saved) {
      const Index r = g.value(p).rows();
      if (g.requires_grad(p)) g.accumulate(p, G.middleRows(o, r));
      o += r;
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols: range out of bounds");
  Matrix<Scalar> out = a.value().middleCols(start, count);
  return a.graph->record(std::move(out), {a}, [a, start, count](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    Matrix<Scalar> d = Matrix<Scalar>::Zero(g.value(a).rows(), g.value(a).cols());
    d.middleCols(start, count) = G;
    g.accumulate(a, d);
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(Var<Scalar> a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows: range out of bounds");
  Matrix<Scalar> out = a.value().middleRows(start, count);
  return a.graph->record(std::move(out), {a}, [a, start, count](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    Matrix<Scalar> d = Matrix<Scalar>::Zero(g.value(a).rows(), g.value(a).cols());
    d.middleRows(start, count) = G;
    g.accumulate(a, d);
  });
}

template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> a, std::span<const int> indices) {
  const auto& av = a.value();
  Matrix<Scalar> out(static_cast<Index>(indices.size()), av.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= av.rows()) throw std::out_of_range("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = av.row(indices[i]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return a.graph->record(std::move(out), {a}, [a, idx](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    Matrix<Scalar> d = Matrix<Scalar>::Zero(g.value(a).rows(), g.value(a).cols());
    for (std::size_t i = 0; i < idx.size(); ++i) d.row(idx[i]) += G.row(static_cast<Index>(i));
    g.accumulate(a, d);
  });
}

template <typename Scalar>
Var<Scalar> pick(Var<Scalar> a, std::span<const int> cols) {
  const auto& av = a.value();
  if (static_cast<Index>(cols.size()) != av.rows()) throw std::invalid_argument("pick: one column per row required");
  Matrix<Scalar> out(av.rows(), 1);
  for (Index r = 0; r < av.rows(); ++r) {
    const int c = cols[static_cast<std::size_t>(r)];
    if (c < 0 || c >= av.cols()) throw std::out_of_range("pick: column out of range");
    out(r, 0) = av(r, c);
  }
  std::vector<int> idx(cols.begin(), cols.end());
  return a.graph->record(std::move(out), {a}, [a, idx](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    Matrix<Scalar> d = Matrix<Scalar>::Zero(g.value(a).rows(), g.value(a).cols());
    for (std::size_t r = 0; r < idx.size(); ++r) d(static_cast<Index>(r), idx[r]) = G(static_cast<Index>(r), 0);
    g.accumulate(a, d);
  });
}

template <typename Scalar>
Var<Scalar> row_sum(Var<Scalar> a) {
  Matrix<Scalar> out = a.value().rowwise().sum();
  return a.graph->record(std::move(out), {a}, [a](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    Matrix<Scalar> d = G.col(0).replicate(1, g.value(a).cols());
    g.accumulate(a, d);
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph->record(std::move(out), {a}, [a](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
    g.accumulate(a, Matrix<Scalar>::Constant(g.value(a).rows(), g.value(a).cols(), G(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> a) {
  const auto n = static_cast<Scalar>(a.value().size());
  return sum(a) * (Scalar(1) / n);
}

template <typename Scalar>
Var<Scalar> detach(Var<Scalar> a) {
  return a.graph->constant(a.value());
}

template <typename Scalar>
Var<Scalar> dropout(Var<Scalar> a, double rate, std::mt19937_64* rng) {
  if (rate <= 0.0 || rng == nullptr) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const Scalar scale = Scalar(1.0 / (1.0 - rate));
  Matrix<Scalar> mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : Scalar(0);
  return hadamard(a, a.graph->constant(std::move(mask)));
}

// ---- attention --------------------------------------------------------------

template <typename Scalar>
Var<Scalar> attention(Var<Scalar> qkv, int batch, int length, int heads, bool causal,
                      std::span<const std::uint8_t> key_valid) {
  const auto& x = qkv.value();
  const Index width = x.cols() / 3;
  if (x.cols() != 3 * width || x.rows() != Index(batch) * length) throw std::invalid_argument("attention: bad qkv shape");
  if (width % heads != 0) throw std::invalid_argument("attention: width not divisible by heads");
  if (static_cast<Index>(key_valid.size()) != x.rows()) throw std::invalid_argument("attention: key mask size");
  const Index dh = width / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const Index T = length;

  auto probs = std::make_shared<std::vector<Matrix<Scalar>>>();
  probs->reserve(static_cast<std::size_t>(batch) * heads);
  Matrix<Scalar> out = Matrix<Scalar>::Zero(x.rows(), width);
  Matrix<Scalar> q(T, dh), k(T, dh), v(T, dh);

  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      for (Index t = 0; t < T; ++t) {
        const Index r = t * batch + b;
        q.row(t) = x.row(r).segment(h * dh, dh);
        k.row(t) = x.row(r).segment(width + h * dh, dh);
        v.row(t) = x.row(r).segment(2 * width + h * dh, dh);
      }
      Matrix<Scalar> s = (q * k.transpose()) * scale;
      Matrix<Scalar> p = Matrix<Scalar>::Zero(T, T);
      for (Index i = 0; i < T; ++i) {
        Scalar m = -std::numeric_limits<Scalar>::infinity();
        for (Index j = 0; j < T; ++j) {
          if ((causal && j > i) || !key_valid[static_cast<std::size_t>(j * batch + b)]) continue;
          m = std::max(m, s(i, j));
        }
        if (!std::isfinite(m)) continue;
        Scalar z = 0;
        for (Index j = 0; j < T; ++j) {
          if ((causal && j > i) || !key_valid[static_cast<std::size_t>(j * batch + b)]) continue;
          p(i, j) = std::exp(s(i, j) - m);
          z += p(i, j);
        }
        p.row(i) /= z;
      }
      Matrix<Scalar> o = p * v;
      for (Index t = 0; t < T; ++t) out.row(t * batch + b).segment(h * dh, dh) = o.row(t);
      probs->push_back(std::move(p));
    }
  }

  return qkv.graph->record(std::move(out), {qkv},
                           [qkv, batch, heads, T, width, dh, scale, probs](Graph<Scalar>& g, const Matrix<Scalar>& G, const Matrix<Scalar>&) {
                             const auto& xv = g.value(qkv);
                             Matrix<Scalar> d = Matrix<Scalar>::Zero(xv.rows(), xv.cols());
                             Matrix<Scalar> q(T, dh), k(T, dh), v(T, dh), go(T, dh);
                             for (int b = 0; b < batch; ++b) {
                               for (int h = 0; h < heads; ++h) {
                                 for (Index t = 0; t < T; ++t) {
                                   const Index r = t * batch + b;
                                   q.row(t) = xv.row(r).segment(h * dh, dh);
                                   k.row(t) = xv.row(r).segment(width + h * dh, dh);
                                   v.row(t) = xv.row(r).segment(2 * width + h * dh, dh);
                                   go.row(t) = G.row(r).segment(h * dh, dh);
                                 }
                                 const auto& p = (*probs)[static_cast<std::size_t>(b * heads + h)];
                                 Matrix<Scalar> dv = p.transpose() * go;
                                 Matrix<Scalar> dp = go * v.transpose();
                                 Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = dp.cwiseProduct(p).rowwise().sum();
                                 Matrix<Scalar> ds = p.cwiseProduct(dp.colwise() - dot) * scale;
                                 Matrix<Scalar> dq = ds * k;
                                 Matrix<Scalar> dk = ds.transpose() * q;
                                 for (Index t = 0; t < T; ++t) {
                                   const Index r = t * batch + b;
                                   d.row(r).segment(h * dh, dh) += dq.row(t);
                                   d.row(r).segment(width + h * dh, dh) += dk.row(t);
                                   d.row(r).segment(2 * width + h * dh, dh) += dv.row(t);
                                 }
                               }
                             }
                             g.accumulate(qkv, d);
                           });
}

// ---- value-level helpers ----------------------------------------------------

template <typename Scalar>
Matrix<Scalar> softmax(const Matrix<Scalar>& logits, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
  if (axis == 0) {
    Matrix<Scalar> t = logits.transpose();
    check_finite_rows(t, "softmax");
    return softmax_rows_value<Scalar>(t).transpose();
  }
  check_finite_rows(logits, "softmax");
  return softmax_rows_value(logits);
}

template <typename Scalar>
Scalar cross_entropy(std::span<const Scalar> dist, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= dist.size()) throw std::out_of_range("cross_entropy: target");
  return -std::log(std::max(dist[static_cast<std::size_t>(target)], Scalar(kLogFloor)));
}

// ---- instantiations ---------------------------------------------------------

#define SPAMGAN_INSTANTIATE_NUMCORE(S)                                                                       \
  template class ParamSet<S>;                                                                                \
  template class Graph<S>;                                                                                   \
  template Var<S> matmul(Var<S>, Var<S>);                                                                    \
  template Var<S> operator+(Var<S>, Var<S>);                                                                 \
  template Var<S> operator-(Var<S>, Var<S>);                                                                 \
  template Var<S> hadamard(Var<S>, Var<S>);                                                                  \
  template Var<S> affine(Var<S>, S, S);                                                                      \
  template Var<S> add_bias(Var<S>, Var<S>);                                                                  \
  template Var<S> sigmoid(Var<S>);                                                                           \
  template Var<S> tanh(Var<S>);                                                                              \
  template Var<S> gelu(Var<S>);                                                                              \
  template Var<S> safe_log(Var<S>);                                                                          \
  template Var<S> square(Var<S>);                                                                            \
  template Var<S> softmax_rows(Var<S>);                                                                      \
  template Var<S> log_softmax_rows(Var<S>);                                                                  \
  template Var<S> layer_norm(Var<S>, Var<S>, Var<S>, S);                                                     \
  template Var<S> concat_cols(std::span<const Var<S>>);                                                      \
  template Var<S> concat_rows(std::span<const Var<S>>);                                                      \
  template Var<S> slice_cols(Var<S>, Index, Index);                                                          \
  template Var<S> slice_rows(Var<S>, Index, Index);                                                          \
  template Var<S> gather_rows(Var<S>, std::span<const int>);                                                 \
  template Var<S> pick(Var<S>, std::span<const int>);                                                        \
  template Var<S> row_sum(Var<S>);                                                                           \
  template Var<S> sum(Var<S>);                                                                               \
  template Var<S> mean(Var<S>);                                                                              \
  template Var<S> detach(Var<S>);                                                                            \
  template Var<S> dropout(Var<S>, double, std::mt19937_64*);                                                 \
  template Var<S> attention(Var<S>, int, int, int, bool, std::span<const std::uint8_t>);                     \
  template Matrix<S> softmax(const Matrix<S>&, int);                                                         \
  template S cross_entropy(std::span<const S>, int);

SPAMGAN_INSTANTIATE_NUMCORE(float)
SPAMGAN_INSTANTIATE_NUMCORE(double)

}  // namespace spamgan
