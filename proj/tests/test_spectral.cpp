#include <doctest.h>

#include <cmath>

#include "layergeo/spectral.hpp"
#include "test_util.hpp"

using namespace layergeo;

namespace {

// Textbook double loop, 1/M normalisation.
Matrix loop_covariance(const RowMatrix& x) {
  const Eigen::Index m = x.rows(), d = x.cols();
  Vector mu = Vector::Zero(d);
  for (Eigen::Index i = 0; i < m; ++i) mu += x.row(i).transpose();
  mu /= static_cast<double>(m);
  Matrix c = Matrix::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = 0; b < d; ++b) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) s += (x(i, a) - mu(a)) * (x(i, b) - mu(b));
      c(a, b) = s / static_cast<double>(m);
    }
  }
  return c;
}

RowMatrix four_points() {
  RowMatrix x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  return x;
}

}  // namespace

TEST_CASE("covariance closed forms") {
  const RidgedCovariance c = covariance(four_points(), 0.0);
  CHECK(c.sigma.isApprox(Matrix(Vector::Constant(2, 0.5).asDiagonal())));
  CHECK(c.mean.norm() == doctest::Approx(0.0));

  RowMatrix same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  const RidgedCovariance r = covariance(same, 1e-3);
  CHECK((r.sigma - 1e-3 * Matrix::Identity(3, 3)).norm() < 1e-15);

  CHECK_THROWS(covariance(RowMatrix(1, 3), 0.0));
  CHECK_THROWS(covariance(four_points(), -1.0));
}

TEST_CASE("covariance matches the loop oracle and ignores shifts") {
  const RowMatrix x = testutil::random_matrix(200, 6, 3);
  const RidgedCovariance c = covariance(x, 0.0);
  CHECK((c.sigma - loop_covariance(x)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((c.sigma - c.sigma.transpose()).norm() == 0.0);
  RowMatrix shifted = x;
  shifted.rowwise() += Eigen::RowVectorXd::LinSpaced(6, -3, 7);
  CHECK((covariance(shifted, 0.0).sigma - c.sigma).cwiseAbs().maxCoeff() < 1e-10);
  const RidgedCovariance ridged = covariance(x, 0.25);
  CHECK(eig_sym(ridged.sigma).values.minCoeff() >= 0.25 - 1e-9);
}

TEST_CASE("eig_sym ordering, closed forms and reconstruction") {
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  const SymmetricEigen e = eig_sym(a);
  CHECK(e.values(0) == doctest::Approx(3.0));
  CHECK(e.values(1) == doctest::Approx(1.0));

  const SymmetricEigen d = eig_sym(Vector(Eigen::Vector3d(1, 4, 1)).asDiagonal());
  CHECK(d.values(0) == doctest::Approx(4.0));
  CHECK(d.values(1) == doctest::Approx(1.0));
  CHECK(d.values(2) == doctest::Approx(1.0));

  const RowMatrix r = testutil::random_matrix(16, 16, 9);
  const Matrix s = r + r.transpose();
  const SymmetricEigen f = eig_sym(s);
  for (Eigen::Index i = 1; i < 16; ++i) CHECK(f.values(i - 1) >= f.values(i));
  CHECK((f.vectors * f.values.asDiagonal() * f.vectors.transpose() - s).norm() < 1e-8 * s.norm());
  for (Eigen::Index i = 0; i < 16; ++i) {
    CHECK((s * f.vectors.col(i) - f.values(i) * f.vectors.col(i)).norm() <= 1e-8 * s.norm());
    Eigen::Index k = 0;
    while (std::abs(f.vectors(k, i)) == 0.0) ++k;
    CHECK(f.vectors(k, i) > 0.0);
  }

  Matrix bad = a;
  bad(0, 1) += 1e-3;
  CHECK_THROWS(eig_sym(bad));
}

TEST_CASE("effective rank") {
  CHECK(effective_rank(Vector(Eigen::Vector3d(4, 1, 1)).asDiagonal()) == doctest::Approx(1.5));
  CHECK(effective_rank(Matrix::Identity(7, 7)) == doctest::Approx(7.0));
  Vector spec = Vector::Zero(8);
  spec.head(3).setConstant(2.5);
  CHECK(std::abs(effective_rank(spec.asDiagonal()) - 3.0) < 1e-12);
  const RowMatrix r = testutil::random_matrix(50, 5, 4);
  const Matrix s = covariance(r, 0.0).sigma;
  CHECK(std::abs(effective_rank(s) - effective_rank(3.7 * s)) < 1e-12);
  CHECK_THROWS(effective_rank(Matrix::Zero(3, 3)));
}

TEST_CASE("precision application") {
  const RowMatrix r = testutil::random_matrix(100, 8, 5);
  const RidgedCovariance c = covariance(r, 1e-3);
  const Vector v = Vector::LinSpaced(8, -1, 2);
  const Vector p = apply_precision(c, v);
  CHECK((c.sigma * p - v).norm() <= 1e-8 * v.norm());
  const Precision prec(c.sigma);
  CHECK(prec.quadratic_form(v) == doctest::Approx(v.dot(p)));
  const RowMatrix w = prec.whiten(r.topRows(2));
  const Vector diff = (r.row(0) - r.row(1)).transpose();
  CHECK((w.row(0) - w.row(1)).squaredNorm() == doctest::Approx(prec.quadratic_form(diff)));
  CHECK_THROWS(Precision(Matrix::Zero(3, 3)));
}
