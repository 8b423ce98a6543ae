#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <vector>

namespace sif3d::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using IndexList = std::vector<Eigen::Index>;

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One value in the reverse-mode graph. `backward_fn` reads `grad` and
/// accumulates into the gradients of `inputs`.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var constant(Matrix value);
  static Var parameter(Matrix value);
  static Var zeros(Eigen::Index rows, Eigen::Index cols) { return constant(Matrix::Zero(rows, cols)); }

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  /// Gradient, or an empty matrix when none has been accumulated.
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const { return node_->value(0, 0); }
  void zero_grad() { node_->grad.resize(0, 0); }
  /// Same value, cut from the graph.
  Var detach() const { return constant(node_->value); }
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Reverse pass from a 1x1 root. Leaf gradients accumulate across calls.
void backward(const Var& root);

/// Builds an op node. `backward_fn` is dropped when no input needs gradients.
Var make_op(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

/// Adds `g` into the gradient of `node` if it participates in differentiation.
template <typename Derived>
void accumulate(Node& node, const Eigen::MatrixBase<Derived>& g) {
  if (!node.requires_grad) return;
  // `g` never reads node.grad, so products can write straight into it.
  if (node.grad.size() == 0) {
    node.grad.resize(g.rows(), g.cols());
    node.grad.noalias() = g;
  } else {
    node.grad.noalias() += g;
  }
}

/// Gradient buffer of `node`, zero-filled on first use.
inline Matrix& grad_buffer(Node& node) {
  if (node.grad.size() == 0) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

// --- algebra ---------------------------------------------------------------
Var matmul(const Var& a, const Var& b);
/// a * b^T without materializing the transpose.
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a (r x c) + row (1 x c) broadcast down the rows.
Var add_row(const Var& a, const Var& row);
/// x * w + b, with w (in x out) and b (1 x out).
Var affine(const Var& x, const Var& w, const Var& b);
/// Constant sparse operator applied from the left.
Var sparse_matmul(const SparseMatrix& op, const Var& a);
/// Applies `m` (k x k) to each consecutive k-row block of `a`.
Var block_matmul(const Var& m, const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// --- pointwise -------------------------------------------------------------
Var relu(const Var& a);
Var gelu(const Var& a);
Var square(const Var& a);

// --- row-wise --------------------------------------------------------------
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Euclidean norm of each row (r x 1); the gradient at a zero row is zero.
Var row_norms(const Var& a);
/// Divides each row by the sum of its absolute values.
Var normalize_rows_l1(const Var& a);

// --- shape -----------------------------------------------------------------
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, const IndexList& rows);
/// Row-major reinterpretation.
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var broadcast_rows(const Var& row, Eigen::Index rows);
/// Rows of the output gather `kernel` input rows with the given stride and
/// zero padding, concatenated along columns.
Var unfold_rows(const Var& a, int kernel, int stride, int pad);

// --- reductions ------------------------------------------------------------
Var sum(const Var& a);
Var mean(const Var& a);
/// Column means (1 x c).
Var mean_rows(const Var& a);
/// Column maxima over consecutive groups of `group` rows ((r/group) x c).
Var group_max(const Var& a, Eigen::Index group);
inline Var max_rows(const Var& a) { return group_max(a, a.rows()); }

// --- geometry --------------------------------------------------------------
/// Gram-Schmidt rotation per row: L x 6 -> L x 9 (row-major 3x3).
/// Degenerate rows fall back to a valid orthonormal completion with zero gradient.
Var rotation_from_6d(const Var& six);
/// out[k*n + i] = R_k^T (p_i - t_k); points n x 3 constant, t L x 3, R L x 9.
Var relative_positions(const Matrix& points, const Var& translation, const Var& rotation);
/// out[k, 3j..3j+2] = t_k + R_k local_kj; local L x 3J.
Var rigid_transform_points(const Var& translation, const Var& rotation, const Var& local);
/// Geodesic angle between each predicted rotation and a fixed target (L x 1).
Var geodesic_angles(const Var& rotation, const Matrix& target);

}  // namespace sif3d::nn
