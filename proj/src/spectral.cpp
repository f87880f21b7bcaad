#include "layergeo/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace layergeo {

RidgedCovariance covariance(const RowMatrix& x, double lambda) {
  if (x.rows() < 2) throw std::invalid_argument("covariance requires at least two vectors");
  if (lambda < 0.0) throw std::invalid_argument("ridge must be non-negative");
  RidgedCovariance out;
  out.lambda = lambda;
  out.mean = x.colwise().mean().transpose();
  const RowMatrix centered = x.rowwise() - out.mean.transpose();
  Matrix s = (centered.transpose() * centered) / static_cast<double>(x.rows());
  out.sigma = 0.5 * (s + s.transpose());
  out.sigma.diagonal().array() += lambda;
  return out;
}

SymmetricEigen eig_sym(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("eig_sym: matrix is not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("eig_sym: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eig_sym: eigensolver did not converge");

  const Eigen::Index n = a.rows();
  SymmetricEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = out.vectors(i, j);
      if (std::abs(c) > 1e-14) {
        if (c < 0.0) out.vectors.col(j) *= -1.0;
        break;
      }
    }
  }
  return out;
}

double largest_eigenvalue(const Matrix& a) {
  if (a.rows() == 1) return a(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("largest_eigenvalue: eigensolver failed");
  return solver.eigenvalues()(a.rows() - 1);
}

double effective_rank(const Matrix& sigma) {
  const double top = largest_eigenvalue(sigma);
  if (!(top > 0.0)) throw std::domain_error("effective_rank: covariance has zero spectral norm");
  return sigma.trace() / top;
}

Precision::Precision(const Matrix& sigma) : llt_(sigma) {
  if (llt_.info() != Eigen::Success) {
    throw std::runtime_error("precision: Cholesky factorisation failed (increase the ridge)");
  }
}

Vector Precision::apply(const Vector& v) const { return llt_.solve(v); }

double Precision::quadratic_form(const Vector& v) const {
  const Vector w = llt_.matrixL().solve(v);
  return w.squaredNorm();
}

RowMatrix Precision::whiten(const RowMatrix& x) const {
  Matrix xt = x.transpose();
  llt_.matrixL().solveInPlace(xt);
  return xt.transpose();
}

Vector apply_precision(const RidgedCovariance& cov, const Vector& v) { return Precision(cov.sigma).apply(v); }

}  // namespace layergeo
