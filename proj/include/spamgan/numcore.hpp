#pragma once

// Dense tensors, parameter sets and a small reverse-mode tape.
//
// All tensors are rank-2 row-major Eigen matrices. Sequence batches are laid
// out time-major: row (t * batch + b) holds timestep t of sequence b, so a
// contiguous row block is one timestep across the whole batch.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spamgan {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

/// Floor applied to every probability that enters a logarithm.
inline constexpr double kLogFloor = 1e-12;

template <typename Scalar>
struct Tensor {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;  // empty until a gradient is accumulated

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
  bool has_grad() const { return grad.rows() == value.rows() && grad.cols() == value.cols() && grad.size() > 0; }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Named parameters, iterated in lexicographic name order.
template <typename Scalar>
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor<Scalar>, std::less<>>;

  explicit ParamSet(std::uint64_t seed = 0) : seed_(seed) {}

  Tensor<Scalar>& add(const std::string& name, Matrix<Scalar> init);
  Tensor<Scalar>& at(std::string_view name);
  const Tensor<Scalar>& at(std::string_view name) const;
  bool contains(std::string_view name) const { return params_.find(name) != params_.end(); }

  /// Names starting with `prefix`, in iteration order.
  std::vector<std::string> names(std::string_view prefix = {}) const;
  std::size_t size() const { return params_.size(); }
  std::uint64_t seed() const { return seed_; }

  void zero_grad();

  typename Map::iterator begin() { return params_.begin(); }
  typename Map::iterator end() { return params_.end(); }
  typename Map::const_iterator begin() const { return params_.begin(); }
  typename Map::const_iterator end() const { return params_.end(); }

  template <typename Other>
  ParamSet<Other> cast() const {
    ParamSet<Other> out(seed_);
    for (const auto& [name, t] : params_) out.add(name, t.value.template cast<Other>());
    return out;
  }

 private:
  Map params_;
  std::uint64_t seed_;
};

template <typename Scalar>
class Graph;

/// Handle to a node recorded on a Graph.
template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  std::size_t id = 0;

  const Matrix<Scalar>& value() const { return graph->value(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar item() const { return value()(0, 0); }
};

template <typename Scalar>
class Graph {
 public:
  using Mat = Matrix<Scalar>;
  /// Receives the node's output gradient and its output value.
  using Backward = std::function<void(Graph&, const Mat&, const Mat&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<Scalar> constant(Mat value);
  /// Leaf bound to a parameter; backward() adds its gradient into `t.grad`.
  Var<Scalar> parameter(Tensor<Scalar>& t);
  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> parents, Backward fn);
  Var<Scalar> record(Mat value, std::span<const Var<Scalar>> parents, Backward fn);

  const Mat& value(Var<Scalar> v) const { return nodes_[v.id].value; }
  bool requires_grad(Var<Scalar> v) const { return nodes_[v.id].requires_grad; }

  template <typename Derived>
  void accumulate(Var<Scalar> v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Reverse sweep from a 1x1 root.
  void backward(Var<Scalar> root);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    Tensor<Scalar>* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---- graph operations ----------------------------------------------------

template <typename Scalar> Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b);
template <typename Scalar> Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b);
template <typename Scalar> Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b);
template <typename Scalar> Var<Scalar> hadamard(Var<Scalar> a, Var<Scalar> b);
/// scale * a + shift, elementwise.
template <typename Scalar> Var<Scalar> affine(Var<Scalar> a, Scalar scale, Scalar shift);
template <typename Scalar> Var<Scalar> operator*(Var<Scalar> a, Scalar s) { return affine(a, s, Scalar(0)); }
/// Adds a 1 x cols row to every row of `a`.
template <typename Scalar> Var<Scalar> add_bias(Var<Scalar> a, Var<Scalar> row);

template <typename Scalar> Var<Scalar> sigmoid(Var<Scalar> a);
template <typename Scalar> Var<Scalar> tanh(Var<Scalar> a);
/// tanh-approximated GELU.
template <typename Scalar> Var<Scalar> gelu(Var<Scalar> a);
/// log(max(a, kLogFloor)); the gradient is zero below the floor.
template <typename Scalar> Var<Scalar> safe_log(Var<Scalar> a);
template <typename Scalar> Var<Scalar> square(Var<Scalar> a);

template <typename Scalar> Var<Scalar> softmax_rows(Var<Scalar> logits);
template <typename Scalar> Var<Scalar> log_softmax_rows(Var<Scalar> logits);
template <typename Scalar> Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gain, Var<Scalar> bias, Scalar eps = Scalar(1e-5));

template <typename Scalar> Var<Scalar> concat_cols(std::span<const Var<Scalar>> parts);
template <typename Scalar> Var<Scalar> concat_rows(std::span<const Var<Scalar>> parts);
template <typename Scalar> Var<Scalar> slice_cols(Var<Scalar> a, Index start, Index count);
template <typename Scalar> Var<Scalar> slice_rows(Var<Scalar> a, Index start, Index count);
/// out.row(i) = a.row(indices[i]); used for embedding lookups.
template <typename Scalar> Var<Scalar> gather_rows(Var<Scalar> a, std::span<const int> indices);
/// n x 1 column with out(i) = a(i, cols[i]).
template <typename Scalar> Var<Scalar> pick(Var<Scalar> a, std::span<const int> cols);
template <typename Scalar> Var<Scalar> row_sum(Var<Scalar> a);
template <typename Scalar> Var<Scalar> sum(Var<Scalar> a);
template <typename Scalar> Var<Scalar> mean(Var<Scalar> a);
/// Copy of `a` with no gradient path back.
template <typename Scalar> Var<Scalar> detach(Var<Scalar> a);
/// Inverted dropout; identity when rate == 0 or rng is null.
template <typename Scalar> Var<Scalar> dropout(Var<Scalar> a, double rate, std::mt19937_64* rng);

/// Multi-head scaled dot-product attention over a fused (T*B) x 3H q|k|v
/// matrix in time-major layout. Keys with key_valid == 0 are ignored; when
/// `causal`, position i attends to positions <= i only.
template <typename Scalar>
Var<Scalar> attention(Var<Scalar> qkv, int batch, int length, int heads, bool causal,
                      std::span<const std::uint8_t> key_valid);

// ---- value-level helpers --------------------------------------------------

/// Softmax along `axis` (0 = down columns, 1 = across rows).
template <typename Scalar> Matrix<Scalar> softmax(const Matrix<Scalar>& logits, int axis = 1);
/// -log(max(dist[target], kLogFloor)).
template <typename Scalar> Scalar cross_entropy(std::span<const Scalar> dist, int target);

}  // namespace spamgan
