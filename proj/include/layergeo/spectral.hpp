#pragma once

#include <Eigen/Cholesky>

#include "layergeo/types.hpp"

namespace layergeo {

inline constexpr double kDefaultRidge = 1e-3;

/// Cov(x) + lambda * I with 1/M normalisation.
struct RidgedCovariance {
  Matrix sigma;
  Vector mean;
  double lambda = 0.0;
};

RidgedCovariance covariance(const RowMatrix& x, double lambda);

/// Eigenvalues sorted descending; each eigenvector column has its first
/// nonzero component positive.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

SymmetricEigen eig_sym(const Matrix& a);

double largest_eigenvalue(const Matrix& a);

/// tr(sigma) / lambda_max(sigma).
double effective_rank(const Matrix& sigma);

/// Cholesky-backed application of the inverse of a ridged covariance.
class Precision {
 public:
  explicit Precision(const Matrix& sigma);

  Vector apply(const Vector& v) const;
  /// vᵀ Σ⁻¹ v.
  double quadratic_form(const Vector& v) const;
  /// Rows mapped to L⁻¹ xᵢ, so that ‖L⁻¹(xᵢ - xⱼ)‖² = (xᵢ - xⱼ)ᵀ Σ⁻¹ (xᵢ - xⱼ).
  RowMatrix whiten(const RowMatrix& x) const;

 private:
  Eigen::LLT<Matrix> llt_;
};

Vector apply_precision(const RidgedCovariance& cov, const Vector& v);

}  // namespace layergeo
