#include "sif3d/nn/tensor.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace sif3d::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
}

Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

using RowMat3 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;

}  // namespace

Var Var::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var make_op(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->is_leaf = false;
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& v : inputs) node->inputs.push_back(v.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& root) {
  require(root.defined() && root.rows() == 1 && root.cols() == 1, "backward: root must be a 1x1 value");
  if (!root.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order)
    if (!n->is_leaf) n->grad.resize(0, 0);
  root.node()->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

// --- algebra ---------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  Matrix out;
  out.noalias() = a.value() * b.value();
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& A = in(self, 0);
    Node& B = in(self, 1);
    if (A.requires_grad) accumulate(A, self.grad * B.value.transpose());
    if (B.requires_grad) accumulate(B, A.value.transpose() * self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimension mismatch");
  Matrix out;
  out.noalias() = a.value() * b.value().transpose();
  return make_op(std::move(out), {a, b}, [](Node& self) {
    Node& A = in(self, 0);
    Node& B = in(self, 1);
    if (A.requires_grad) accumulate(A, self.grad * B.value);
    if (B.requires_grad) accumulate(B, self.grad.transpose() * A.value);
  });
}

Var transpose(const Var& a) {
  return make_op(a.value().transpose(), {a}, [](Node& self) { accumulate(in(self, 0), self.grad.transpose()); });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
    accumulate(in(self, 0), self.grad);
    accumulate(in(self, 1), self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b}, [](Node& self) {
    accumulate(in(self, 0), self.grad);
    accumulate(in(self, 1), -self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    Node& A = in(self, 0);
    Node& B = in(self, 1);
    if (A.requires_grad) accumulate(A, self.grad.cwiseProduct(B.value));
    if (B.requires_grad) accumulate(B, self.grad.cwiseProduct(A.value));
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& self) { accumulate(in(self, 0), self.grad * s); });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: row must be 1 x cols");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make_op(std::move(out), {a, row}, [](Node& self) {
    accumulate(in(self, 0), self.grad);
    accumulate(in(self, 1), self.grad.colwise().sum());
  });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  require(x.cols() == w.rows(), "affine: input width does not match weight rows");
  require(b.rows() == 1 && b.cols() == w.cols(), "affine: bias must be 1 x out");
  Matrix out;
  out.noalias() = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  return make_op(std::move(out), {x, w, b}, [](Node& self) {
    Node& X = in(self, 0);
    Node& W = in(self, 1);
    Node& B = in(self, 2);
    if (X.requires_grad) accumulate(X, self.grad * W.value.transpose());
    if (W.requires_grad) accumulate(W, X.value.transpose() * self.grad);
    if (B.requires_grad) accumulate(B, self.grad.colwise().sum());
  });
}

Var sparse_matmul(const SparseMatrix& op, const Var& a) {
  require(op.cols() == a.rows(), "sparse_matmul: dimension mismatch");
  Matrix out = op * a.value();
  return make_op(std::move(out), {a}, [op](Node& self) {
    Node& A = in(self, 0);
    if (A.requires_grad) accumulate(A, Matrix(op.transpose() * self.grad));
  });
}

Var block_matmul(const Var& m, const Var& a) {
  const Eigen::Index k = m.rows();
  require(m.cols() == k && k > 0 && a.rows() % k == 0, "block_matmul: rows must be a multiple of the block size");
  const Eigen::Index blocks = a.rows() / k;
  const Eigen::Index c = a.cols();
  Matrix out(a.rows(), c);
  for (Eigen::Index f = 0; f < blocks; ++f) out.middleRows(f * k, k).noalias() = m.value() * a.value().middleRows(f * k, k);
  return make_op(std::move(out), {m, a}, [k, blocks](Node& self) {
    Node& M = in(self, 0);
    Node& A = in(self, 1);
    if (M.requires_grad) {
      Matrix dm = Matrix::Zero(k, k);
      for (Eigen::Index f = 0; f < blocks; ++f)
        dm.noalias() += self.grad.middleRows(f * k, k) * A.value.middleRows(f * k, k).transpose();
      accumulate(M, dm);
    }
    if (A.requires_grad) {
      Matrix da(A.value.rows(), A.value.cols());
      for (Eigen::Index f = 0; f < blocks; ++f)
        da.middleRows(f * k, k).noalias() = M.value.transpose() * self.grad.middleRows(f * k, k);
      accumulate(A, da);
    }
  });
}

// --- pointwise -------------------------------------------------------------

Var relu(const Var& a) {
  return make_op(a.value().cwiseMax(0.0), {a}, [](Node& self) {
    Node& A = in(self, 0);
    accumulate(A, (A.value.array() > 0.0).select(self.grad, 0.0));
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(const Var& a) {
  // 0.5 (1 + tanh u) == sigmoid(2u); the exp form vectorizes.
  const auto x = a.value().array();
  const auto u = kGeluC * (x + kGeluA * x.cube());
  Matrix s = (1.0 + (-2.0 * u).exp()).inverse().matrix();
  Matrix out = (x * s.array()).matrix();
  return make_op(std::move(out), {a}, [s = std::move(s)](Node& self) {
    Node& A = in(self, 0);
    const auto x = A.value.array();
    const auto sa = s.array();
    const Matrix d = (sa + x * sa * (1.0 - sa) * (2.0 * kGeluC) * (1.0 + 3.0 * kGeluA * x.square())).matrix();
    accumulate(A, self.grad.cwiseProduct(d));
  });
}

Var square(const Var& a) {
  return make_op(a.value().cwiseAbs2(), {a}, [](Node& self) {
    Node& A = in(self, 0);
    accumulate(A, 2.0 * self.grad.cwiseProduct(A.value));
  });
}

// --- row-wise --------------------------------------------------------------

Var softmax_rows(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.value().row(r).maxCoeff();
    out.row(r) = (a.value().row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return make_op(std::move(out), {a}, [](Node& self) {
    const Matrix& y = self.value;
    Eigen::VectorXd dots = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix d = self.grad;
    d.colwise() -= dots;
    accumulate(in(self, 0), d.cwiseProduct(y));
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.rows() == 1 && beta.cols() == x.cols(),
          "layer_norm_rows: gain/bias must be 1 x cols");
  const Eigen::Index c = x.cols();
  Matrix xhat(x.rows(), c);
  Eigen::VectorXd inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.value().row(r).mean();
    auto centered = (x.value().row(r).array() - mu).eval();
    const double var = centered.square().mean();
    inv(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = centered * inv(r);
  }
  Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  return make_op(std::move(out), {x, gamma, beta}, [xhat, inv, c](Node& self) {
    Node& X = in(self, 0);
    Node& G = in(self, 1);
    Node& B = in(self, 2);
    if (G.requires_grad) accumulate(G, self.grad.cwiseProduct(xhat).colwise().sum());
    if (B.requires_grad) accumulate(B, self.grad.colwise().sum());
    if (X.requires_grad) {
      Matrix dxhat = self.grad.array().rowwise() * G.value.row(0).array();
      Matrix dx(dxhat.rows(), c);
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
        dx.row(r) = inv(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
      accumulate(X, dx);
    }
  });
}

Var row_norms(const Var& a) {
  Matrix out = a.value().rowwise().norm();
  return make_op(std::move(out), {a}, [](Node& self) {
    Node& A = in(self, 0);
    Matrix d(A.value.rows(), A.value.cols());
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      const double n = self.value(r, 0);
      if (n > 0.0)
        d.row(r) = A.value.row(r) * (self.grad(r, 0) / n);
      else
        d.row(r).setZero();
    }
    accumulate(A, d);
  });
}

// --- shape -----------------------------------------------------------------

Var normalize_rows_l1(const Var& a) {
  const Eigen::VectorXd sums = a.value().cwiseAbs().rowwise().sum();
  require((sums.array() > 0.0).all(), "normalize_rows_l1: zero row");
  Matrix out = sums.cwiseInverse().asDiagonal() * a.value();
  return make_op(out, {a}, [sums, out](Node& self) {
    const Node& x = in(self, 0);
    const Eigen::VectorXd dots = (self.grad.cwiseProduct(out)).rowwise().sum();
    Matrix d = self.grad - (dots.asDiagonal() * x.value.cwiseSign());
    d = sums.cwiseInverse().asDiagonal() * d;
    accumulate(in(self, 0), d);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: nothing to concatenate");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return make_op(std::move(out), parts, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& p = in(self, i);
      if (p.requires_grad) accumulate(p, self.grad.middleCols(offsets[i], p.value.cols()));
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  return make_op(std::move(out), parts, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      Node& p = in(self, i);
      if (p.requires_grad) accumulate(p, self.grad.middleRows(offsets[i], p.value.rows()));
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: out of range");
  return make_op(a.value().middleRows(start, count), {a}, [start, count](Node& self) {
    Node& A = in(self, 0);
    if (A.requires_grad) grad_buffer(A).middleRows(start, count) += self.grad;
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  return make_op(a.value().middleCols(start, count), {a}, [start, count](Node& self) {
    Node& A = in(self, 0);
    if (A.requires_grad) grad_buffer(A).middleCols(start, count) += self.grad;
  });
}

Var gather_rows(const Var& a, const IndexList& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < a.rows(), "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  return make_op(std::move(out), {a}, [rows](Node& self) {
    Node& A = in(self, 0);
    if (!A.requires_grad) return;
    Matrix& d = grad_buffer(A);
    for (std::size_t i = 0; i < rows.size(); ++i) d.row(rows[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  require(rows * cols == a.rows() * a.cols(), "reshape: element count mismatch");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return make_op(std::move(out), {a}, [](Node& self) {
    Node& A = in(self, 0);
    accumulate(A, Eigen::Map<const Matrix>(self.grad.data(), A.value.rows(), A.value.cols()));
  });
}

Var broadcast_rows(const Var& row, Eigen::Index rows) {
  require(row.rows() == 1, "broadcast_rows: input must be a single row");
  Matrix out = row.value().replicate(rows, 1);
  return make_op(std::move(out), {row}, [](Node& self) { accumulate(in(self, 0), self.grad.colwise().sum()); });
}

Var unfold_rows(const Var& a, int kernel, int stride, int pad) {
  require(kernel >= 1 && stride >= 1 && pad >= 0, "unfold_rows: invalid geometry");
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  const Eigen::Index out_rows = (r + 2 * pad - kernel) / stride + 1;
  require(out_rows >= 1, "unfold_rows: input shorter than kernel");
  Matrix out = Matrix::Zero(out_rows, kernel * c);
  for (Eigen::Index i = 0; i < out_rows; ++i)
    for (int k = 0; k < kernel; ++k) {
      const Eigen::Index src = i * stride + k - pad;
      if (src >= 0 && src < r) out.block(i, k * c, 1, c) = a.value().row(src);
    }
  return make_op(std::move(out), {a}, [kernel, stride, pad, r, c, out_rows](Node& self) {
    Matrix d = Matrix::Zero(r, c);
    for (Eigen::Index i = 0; i < out_rows; ++i)
      for (int k = 0; k < kernel; ++k) {
        const Eigen::Index src = i * stride + k - pad;
        if (src >= 0 && src < r) d.row(src) += self.grad.block(i, k * c, 1, c);
      }
    accumulate(in(self, 0), d);
  });
}

// --- reductions ------------------------------------------------------------

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_op(std::move(out), {a}, [](Node& self) {
    Node& A = in(self, 0);
    accumulate(A, Matrix::Constant(A.value.rows(), A.value.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  require(a.value().size() > 0, "mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var mean_rows(const Var& a) {
  require(a.rows() > 0, "mean_rows: empty input");
  const double inv = 1.0 / static_cast<double>(a.rows());
  return make_op(a.value().colwise().mean(), {a}, [inv](Node& self) {
    Node& A = in(self, 0);
    accumulate(A, (self.grad * inv).replicate(A.value.rows(), 1));
  });
}

Var group_max(const Var& a, Eigen::Index group) {
  require(group >= 1 && a.rows() % group == 0, "group_max: rows must be a multiple of the group size");
  const Eigen::Index groups = a.rows() / group;
  const Eigen::Index c = a.cols();
  Matrix out(groups, c);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(groups * c));
  for (Eigen::Index g = 0; g < groups; ++g)
    for (Eigen::Index j = 0; j < c; ++j) {
      Eigen::Index best = g * group;
      double v = a.value()(best, j);
      for (Eigen::Index r = g * group + 1; r < (g + 1) * group; ++r)
        if (a.value()(r, j) > v) {
          v = a.value()(r, j);
          best = r;
        }
      out(g, j) = v;
      arg[static_cast<std::size_t>(g * c + j)] = best;
    }
  return make_op(std::move(out), {a}, [arg, groups, c](Node& self) {
    Node& A = in(self, 0);
    Matrix d = Matrix::Zero(A.value.rows(), c);
    for (Eigen::Index g = 0; g < groups; ++g)
      for (Eigen::Index j = 0; j < c; ++j) d(arg[static_cast<std::size_t>(g * c + j)], j) += self.grad(g, j);
    accumulate(A, d);
  });
}

// --- geometry --------------------------------------------------------------

namespace {

struct GramSchmidtRow {
  Eigen::Vector3d a2, b1, b2;
  double n1 = 0.0, n2 = 0.0;
  bool regular = false;
};

Eigen::Vector3d unit_axis(int i) { return Eigen::Vector3d::Unit(i); }

}  // namespace

Var rotation_from_6d(const Var& six) {
  require(six.cols() == 6, "rotation_from_6d: expected 6 columns");
  constexpr double kEps = 1e-9;
  const Eigen::Index rows = six.rows();
  Matrix out(rows, 9);
  std::vector<GramSchmidtRow> cache(static_cast<std::size_t>(rows));
  for (Eigen::Index k = 0; k < rows; ++k) {
    auto& gs = cache[static_cast<std::size_t>(k)];
    const Eigen::Vector3d a1 = six.value().block<1, 3>(k, 0).transpose();
    gs.a2 = six.value().block<1, 3>(k, 3).transpose();
    gs.n1 = a1.norm();
    bool regular = std::isfinite(gs.n1) && gs.n1 > kEps;
    gs.b1 = regular ? Eigen::Vector3d(a1 / gs.n1) : unit_axis(0);
    Eigen::Vector3d u = gs.a2 - gs.b1.dot(gs.a2) * gs.b1;
    gs.n2 = u.norm();
    if (!(std::isfinite(gs.n2) && gs.n2 > kEps * std::max(1.0, gs.a2.norm()))) {
      regular = false;
      // Any axis not parallel to b1 completes the frame.
      for (int axis = 0; axis < 3; ++axis) {
        const Eigen::Vector3d e = unit_axis(axis);
        u = e - gs.b1.dot(e) * gs.b1;
        if (u.norm() > 0.5) break;
      }
      gs.n2 = u.norm();
    }
    gs.b2 = u / gs.n2;
    gs.regular = regular;
    const Eigen::Vector3d b3 = gs.b1.cross(gs.b2);
    for (int a = 0; a < 3; ++a) {
      out(k, 3 * a + 0) = gs.b1(a);
      out(k, 3 * a + 1) = gs.b2(a);
      out(k, 3 * a + 2) = b3(a);
    }
  }
  return make_op(std::move(out), {six}, [cache](Node& self) {
    Node& S = in(self, 0);
    Matrix d = Matrix::Zero(S.value.rows(), 6);
    for (Eigen::Index k = 0; k < d.rows(); ++k) {
      const auto& gs = cache[static_cast<std::size_t>(k)];
      if (!gs.regular) continue;
      Eigen::Vector3d db1, db2, db3;
      for (int a = 0; a < 3; ++a) {
        db1(a) = self.grad(k, 3 * a + 0);
        db2(a) = self.grad(k, 3 * a + 1);
        db3(a) = self.grad(k, 3 * a + 2);
      }
      db1 += gs.b2.cross(db3);
      db2 += db3.cross(gs.b1);
      const Eigen::Vector3d du = (db2 - gs.b2 * gs.b2.dot(db2)) / gs.n2;
      const Eigen::Vector3d da2 = du - gs.b1 * gs.b1.dot(du);
      db1 += -gs.b1.dot(gs.a2) * du - gs.a2 * gs.b1.dot(du);
      const Eigen::Vector3d da1 = (db1 - gs.b1 * gs.b1.dot(db1)) / gs.n1;
      d.block<1, 3>(k, 0) = da1.transpose();
      d.block<1, 3>(k, 3) = da2.transpose();
    }
    accumulate(S, d);
  });
}

Var relative_positions(const Matrix& points, const Var& translation, const Var& rotation) {
  require(points.cols() == 3 && translation.cols() == 3 && rotation.cols() == 9 &&
              translation.rows() == rotation.rows(),
          "relative_positions: expected n x 3 points, L x 3 translations and L x 9 rotations");
  const Eigen::Index n = points.rows();
  const Eigen::Index frames = translation.rows();
  Matrix out(frames * n, 3);
  for (Eigen::Index k = 0; k < frames; ++k) {
    const Eigen::Map<const RowMat3> rot(rotation.value().row(k).data());
    Matrix centered = points;
    centered.rowwise() -= translation.value().row(k);
    out.middleRows(k * n, n).noalias() = centered * rot;
  }
  return make_op(std::move(out), {translation, rotation}, [points, n, frames](Node& self) {
    Node& T = in(self, 0);
    Node& R = in(self, 1);
    Matrix dt = Matrix::Zero(frames, 3);
    Matrix dr = Matrix::Zero(frames, 9);
    for (Eigen::Index k = 0; k < frames; ++k) {
      const auto g = self.grad.middleRows(k * n, n);
      const Eigen::Map<const RowMat3> rot(R.value.row(k).data());
      if (R.requires_grad) {
        Matrix centered = points;
        centered.rowwise() -= T.value.row(k);
        RowMat3 drk = centered.transpose() * g;
        dr.row(k) = Eigen::Map<const Eigen::Matrix<double, 1, 9>>(drk.data());
      }
      if (T.requires_grad) dt.row(k) = -(g.colwise().sum() * rot.transpose());
    }
    accumulate(T, dt);
    accumulate(R, dr);
  });
}

Var rigid_transform_points(const Var& translation, const Var& rotation, const Var& local) {
  require(translation.cols() == 3 && rotation.cols() == 9 && local.cols() % 3 == 0 &&
              translation.rows() == rotation.rows() && local.rows() == translation.rows(),
          "rigid_transform_points: expected L x 3, L x 9 and L x 3J inputs");
  const Eigen::Index frames = local.rows();
  const Eigen::Index joints = local.cols() / 3;
  Matrix out(frames, local.cols());
  for (Eigen::Index k = 0; k < frames; ++k) {
    const Eigen::Map<const RowMat3> rot(rotation.value().row(k).data());
    const Eigen::Vector3d t = translation.value().row(k).transpose();
    for (Eigen::Index j = 0; j < joints; ++j) {
      const Eigen::Vector3d p = local.value().block<1, 3>(k, 3 * j).transpose();
      out.block<1, 3>(k, 3 * j) = (t + rot * p).transpose();
    }
  }
  return make_op(std::move(out), {translation, rotation, local}, [frames, joints](Node& self) {
    Node& T = in(self, 0);
    Node& R = in(self, 1);
    Node& P = in(self, 2);
    Matrix dt = Matrix::Zero(frames, 3);
    Matrix dr = Matrix::Zero(frames, 9);
    Matrix dp = Matrix::Zero(frames, 3 * joints);
    for (Eigen::Index k = 0; k < frames; ++k) {
      const Eigen::Map<const RowMat3> rot(R.value.row(k).data());
      RowMat3 drk = RowMat3::Zero();
      for (Eigen::Index j = 0; j < joints; ++j) {
        const Eigen::Vector3d g = self.grad.block<1, 3>(k, 3 * j).transpose();
        dt.row(k) += g.transpose();
        drk.noalias() += g * P.value.block<1, 3>(k, 3 * j);
        dp.block<1, 3>(k, 3 * j) = (rot.transpose() * g).transpose();
      }
      dr.row(k) = Eigen::Map<const Eigen::Matrix<double, 1, 9>>(drk.data());
    }
    accumulate(T, dt);
    accumulate(R, dr);
    accumulate(P, dp);
  });
}

Var geodesic_angles(const Var& rotation, const Matrix& target) {
  require(rotation.cols() == 9 && target.cols() == 9 && target.rows() == rotation.rows(),
          "geodesic_angles: expected matching L x 9 inputs");
  constexpr double kChordScale = 2.8284271247461903;  // 2 sqrt(2)
  const Matrix diff = rotation.value() - target;
  Matrix out(diff.rows(), 1);
  for (Eigen::Index k = 0; k < diff.rows(); ++k) {
    const double x = std::min(1.0, diff.row(k).norm() / kChordScale);
    out(k, 0) = 2.0 * std::asin(x);
  }
  return make_op(std::move(out), {rotation}, [diff](Node& self) {
    Matrix d = Matrix::Zero(diff.rows(), 9);
    for (Eigen::Index k = 0; k < diff.rows(); ++k) {
      const double chord = diff.row(k).norm();
      if (chord <= 0.0) continue;
      const double x = std::min(1.0, chord / kChordScale);
      const double dtheta_dchord = 2.0 / (kChordScale * std::sqrt(std::max(1.0 - x * x, 1e-12)));
      d.row(k) = diff.row(k) * (self.grad(k, 0) * dtheta_dchord / chord);
    }
    accumulate(in(self, 0), d);
  });
}

}  // namespace sif3d::nn
