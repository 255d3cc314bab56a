#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Graph records every operation applied to its Vars. Calling backward()
// on a 1x1 Var walks the record in reverse and accumulates gradients into
// every node that depends on a parameter. Graphs are single-use and not
// thread-safe; build one per sample.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace sparseworld::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ParameterSet;
using Gradients = std::vector<Matrix>;

struct Var {
  int id{-1};
  [[nodiscard]] bool valid() const noexcept { return id >= 0; }
};

class Graph {
 public:
  /// `params` may be null for graphs without trainable leaves. With
  /// `record` false no backward closures are kept (inference only).
  explicit Graph(const ParameterSet* params = nullptr, bool record = true);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var row(std::span<const double> values);
  /// Leaf bound to parameter `index`; repeated calls return the same Var.
  Var param(std::size_t index);

  [[nodiscard]] const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  [[nodiscard]] double scalar(Var v) const { return value(v)(0, 0); }
  [[nodiscard]] Eigen::Index rows(Var v) const { return value(v).rows(); }
  [[nodiscard]] Eigen::Index cols(Var v) const { return value(v).cols(); }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
  void backward(Var loss);
  /// Adds parameter gradients into `out` (shaped like the ParameterSet).
  void accumulate_param_grads(Gradients& out) const;
  [[nodiscard]] const Matrix& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  // Elementwise and linear algebra.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_row(Var a, Var row);      // broadcast a 1 x n row over every row of a
  Var mul_row(Var a, Var row);      // broadcast multiply
  Var matmul(Var a, Var b);         // a * b
  Var matmul_nt(Var a, Var b);      // a * b^T

  // Nonlinearities.
  Var gelu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);

  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  /// Divides every row by its Euclidean norm (rows must be non-zero).
  Var normalize_rows(Var a);

  /// Multi-head scaled dot-product attention with a shared boolean mask
  /// (true = attend). q: n x c, k/v: m x c, mask: n x m. Rows with no
  /// admissible key produce zeros.
  Var attention(Var q, Var k, Var v, const Mask& mask, int heads);
  /// Per-query attention over its own group of `group` consecutive key rows:
  /// query i sees keys [i*group, (i+1)*group). mask: n x group.
  Var grouped_attention(Var q, Var k, Var v, const Mask& mask, int group, int heads);

  // Shape manipulation.
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
  /// Row i of the result is row index[i] of a.
  Var gather_rows(Var a, std::span<const int> index);

  // Reductions and losses (all return 1 x 1).
  Var sum(Var a);
  Var weighted_sum(Var a, const Matrix& weights);
  /// sum_ij w_ij * smoothL1(pred_ij - target_ij; beta)
  Var smooth_l1(Var pred, const Matrix& target, const Matrix& weights, double beta);
  /// sum_ij w_ij * BCE(sigmoid(logit_ij), target_ij)
  Var bce_with_logits(Var logits, const Matrix& target, const Matrix& weights);
  /// Row-wise cross entropy of softmax(logits) against integer labels,
  /// summed with per-row weights.
  Var cross_entropy_rows(Var logits, std::span<const int> labels, std::span<const double> weights);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> backward;
    int param{-1};
    bool needs_grad{false};
  };

  Var push(Matrix value, bool needs_grad);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g);

  const ParameterSet* params_;
  bool record_;
  std::vector<Node> nodes_;
  std::vector<int> param_vars_;
};

}  // namespace sparseworld::nn
