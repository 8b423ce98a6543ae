#include "oracles.hpp"

#include <doctest.h>

using namespace sif3d;
using namespace sif3d::testing;
using nn::Matrix;
using nn::Var;

namespace {

Var param(Rng& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng, sd);
  return Var::parameter(m);
}

// Weighted sum so every output entry gets a distinct adjoint.
Var probe(const Var& out, const Matrix& w) { return nn::sum(nn::mul(out, Var::constant(w))); }

Matrix random_weights(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

void expect_gradient(const std::vector<Var>& inputs, const std::function<Var()>& f, Rng& rng, double tol = 1e-6) {
  const Var out = f();
  const Matrix w = random_weights(rng, out.rows(), out.cols());
  const GradCheck g = check_gradients(inputs, [&] { return probe(f(), w); }, rng, 12);
  INFO("relative error " << g.relative_error);
  CHECK(g.relative_error < tol);
}

}  // namespace

TEST_CASE("algebra gradients") {
  Rng rng(10);
  Var a = param(rng, 4, 3), b = param(rng, 3, 5), c = param(rng, 4, 3), bias = param(rng, 1, 5);
  Var nt = param(rng, 6, 3);
  expect_gradient({a, b}, [&] { return nn::matmul(a, b); }, rng);
  expect_gradient({a, nt}, [&] { return nn::matmul_nt(a, nt); }, rng);
  expect_gradient({a}, [&] { return nn::transpose(a); }, rng);
  expect_gradient({a, c}, [&] { return a + c; }, rng);
  expect_gradient({a, c}, [&] { return a - c; }, rng);
  expect_gradient({a, c}, [&] { return nn::mul(a, c); }, rng);
  expect_gradient({a}, [&] { return 2.5 * a; }, rng);
  expect_gradient({a, b, bias}, [&] { return nn::affine(a, b, bias); }, rng);
  Var row = param(rng, 1, 3);
  expect_gradient({a, row}, [&] { return nn::add_row(a, row); }, rng);
  Var m = param(rng, 3, 3), blocks = param(rng, 9, 2);
  expect_gradient({m, blocks}, [&] { return nn::block_matmul(m, blocks); }, rng);
  nn::SparseMatrix s(2, 4);
  s.insert(0, 1) = 0.5;
  s.insert(1, 3) = -2.0;
  s.insert(1, 0) = 1.5;
  expect_gradient({a}, [&] { return nn::sparse_matmul(s, a); }, rng);
}

TEST_CASE("pointwise and row-wise gradients") {
  Rng rng(11);
  Var a = param(rng, 5, 4), gamma = param(rng, 1, 4), beta = param(rng, 1, 4);
  expect_gradient({a}, [&] { return nn::relu(a); }, rng);
  expect_gradient({a}, [&] { return nn::gelu(a); }, rng);
  expect_gradient({a}, [&] { return nn::square(a); }, rng);
  expect_gradient({a}, [&] { return nn::softmax_rows(a); }, rng);
  expect_gradient({a, gamma, beta}, [&] { return nn::layer_norm_rows(a, gamma, beta); }, rng);
  expect_gradient({a}, [&] { return nn::row_norms(a); }, rng);
  expect_gradient({a}, [&] { return nn::normalize_rows_l1(a); }, rng);
}

TEST_CASE("shape and reduction gradients") {
  Rng rng(12);
  Var a = param(rng, 6, 4), b = param(rng, 6, 2), c = param(rng, 3, 4), r = param(rng, 1, 4);
  expect_gradient({a, b}, [&] { return nn::concat_cols({a, b}); }, rng);
  expect_gradient({a, c}, [&] { return nn::concat_rows({a, c}); }, rng);
  expect_gradient({a}, [&] { return nn::slice_rows(a, 1, 3); }, rng);
  expect_gradient({a}, [&] { return nn::slice_cols(a, 2, 2); }, rng);
  expect_gradient({a}, [&] { return nn::gather_rows(a, {0, 3, 3, 5}); }, rng);
  expect_gradient({a}, [&] { return nn::reshape(a, 3, 8); }, rng);
  expect_gradient({r}, [&] { return nn::broadcast_rows(r, 5); }, rng);
  expect_gradient({a}, [&] { return nn::unfold_rows(a, 3, 2, 1); }, rng);
  expect_gradient({a}, [&] { return nn::sum(a); }, rng);
  expect_gradient({a}, [&] { return nn::mean(a); }, rng);
  expect_gradient({a}, [&] { return nn::mean_rows(a); }, rng);
  expect_gradient({a}, [&] { return nn::group_max(a, 3); }, rng);
  expect_gradient({a}, [&] { return nn::max_rows(a); }, rng);
}

TEST_CASE("geometry gradients") {
  Rng rng(13);
  Var six = param(rng, 4, 6);
  expect_gradient({six}, [&] { return nn::rotation_from_6d(six); }, rng);
  Var t = param(rng, 4, 3);
  const Var rot = Var::parameter(nn::rotation_from_6d(Var::constant(six.value())).value());
  const Matrix pts = random_weights(rng, 5, 3);
  expect_gradient({t, six}, [&] { return nn::relative_positions(pts, t, nn::rotation_from_6d(six)); }, rng);
  Var local = param(rng, 4, 6);
  expect_gradient({t, six, local}, [&] { return nn::rigid_transform_points(t, nn::rotation_from_6d(six), local); }, rng);
  Matrix target(4, 9);
  for (int k = 0; k < 4; ++k) {
    const Eigen::Matrix3d q = random_quaternion(rng).toRotationMatrix();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) target(k, 3 * i + j) = q(i, j);
  }
  expect_gradient({six}, [&] { return nn::geodesic_angles(nn::rotation_from_6d(six), target); }, rng, 1e-5);
  CHECK(rot.rows() == 4);
}

TEST_CASE("rotation_from_6d produces orthonormal rows and repairs zeros") {
  Matrix six = Matrix::Zero(2, 6);
  six.row(0) << 1, 2, 0, -1, 0.5, 3;
  const Matrix r = nn::rotation_from_6d(Var::constant(six)).value();
  for (int k = 0; k < 2; ++k) {
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = r(k, 3 * i + j);
    CHECK((m.transpose() * m - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(m.determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("relative_positions matches the rotation formula") {
  Rng rng(14);
  const Matrix pts = random_weights(rng, 3, 3);
  const Eigen::Quaterniond q = random_quaternion(rng);
  const Eigen::Matrix3d m = q.toRotationMatrix();
  Matrix rot(1, 9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rot(0, 3 * i + j) = m(i, j);
  Matrix t(1, 3);
  t << 0.5, -1, 2;
  const Matrix out = nn::relative_positions(pts, Var::constant(t), Var::constant(rot)).value();
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d expect = m.transpose() * (pts.row(i) - t.row(0)).transpose();
    CHECK((out.row(i).transpose() - expect).norm() < 1e-12);
  }
}

TEST_CASE("softmax rows are distributions") {
  Rng rng(15);
  const Matrix logits = random_weights(rng, 7, 9) * 30.0;
  const Matrix s = nn::softmax_rows(Var::constant(logits)).value();
  CHECK(s.minCoeff() >= 0.0);
  for (Eigen::Index r = 0; r < s.rows(); ++r) CHECK(s.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("backward accumulates into leaves across calls") {
  Var a = Var::parameter(Matrix::Constant(1, 1, 3.0));
  nn::backward(nn::sum(nn::square(a)));
  nn::backward(nn::sum(nn::square(a)));
  CHECK(a.grad()(0, 0) == doctest::Approx(12.0));
  a.zero_grad();
  CHECK(a.grad().size() == 0);
}

TEST_CASE("constants do not build a backward graph") {
  const Var c = Var::constant(Matrix::Ones(2, 2));
  const Var out = nn::square(c);
  CHECK_FALSE(out.requires_grad());
}

TEST_CASE("shape errors are reported") {
  const Var a = Var::constant(Matrix::Ones(2, 3));
  CHECK_THROWS_AS(nn::matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(a + Var::constant(Matrix::Ones(3, 2)), std::invalid_argument);
  CHECK_THROWS_AS(nn::slice_rows(a, 1, 5), std::invalid_argument);
  CHECK_THROWS_AS(nn::gather_rows(a, {7}), std::invalid_argument);
}

TEST_CASE("parameter initialization depends on seed and name only") {
  nn::ParameterSet a(5), b(5), c(6);
  a.glorot("x.weight", 4, 4);
  b.glorot("unrelated", 3, 3);
  b.glorot("x.weight", 4, 4);
  c.glorot("x.weight", 4, 4);
  CHECK(a.at("x.weight").value() == b.at("x.weight").value());
  CHECK(a.at("x.weight").value() != c.at("x.weight").value());
  CHECK_THROWS(a.glorot("x.weight", 4, 4));
}

TEST_CASE("layer gradients") {
  Rng rng(16);
  nn::ParameterSet set(3);
  const nn::ParamScope scope(set, "t");
  const nn::EncoderLayer enc(scope.child("enc"), 8, 2, 16);
  const nn::DecoderLayer dec(scope.child("dec"), 8, 6, 2, 16);
  Var x = param(rng, 5, 8), mem = param(rng, 3, 6);
  std::vector<Var> vars = all_parameters(set);
  vars.push_back(x);
  vars.push_back(mem);
  const Matrix w = random_weights(rng, 5, 8);
  const GradCheck g = check_gradients(vars, [&] { return probe(dec(enc(x), mem), w); }, rng, 4);
  CHECK(g.relative_error < 1e-6);
}

TEST_CASE("sinusoidal table starts with sin 0 and cos 0") {
  const Matrix pe = nn::sinusoidal_encoding(4, 6);
  CHECK(pe(0, 0) == 0.0);
  CHECK(pe(0, 1) == 1.0);
  CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)));
}
