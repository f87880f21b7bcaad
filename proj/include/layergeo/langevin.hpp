#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layergeo/types.hpp"

namespace layergeo {

enum class PotentialKind { quadratic, soft_quartic };

/// Strongly convex potential U. quadratic: U = (x-b)ᵀA(x-b)/2.
/// soft_quartic: U = m‖x‖²/2 + (q/4)·Σ xᵢ⁴/(1+xᵢ²), convex with Hessian
/// between m and m + 0.625·q.
class Potential {
 public:
  static Potential quadratic(const Matrix& a, const Vector& shift);
  static Potential isotropic(std::size_t dim, double m);
  static Potential soft_quartic(std::size_t dim, double m, double quartic);

  PotentialKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double strong_convexity() const { return m_; }
  double lipschitz() const { return lipschitz_; }
  const Matrix& a() const { return a_; }
  const Vector& shift() const { return shift_; }
  double quartic() const { return quartic_; }

  void gradient(const double* x, double* out) const;
  Vector gradient(const Vector& x) const;

 private:
  PotentialKind kind_ = PotentialKind::quadratic;
  std::size_t dim_ = 0;
  double m_ = 0.0;
  double lipschitz_ = 0.0;
  double quartic_ = 0.0;
  Matrix a_;
  Vector shift_;
};

enum class Coupling { independent, synchronous };

/// Additive error e(x) in the score, ‖e(x)‖ ≤ epsilon everywhere.
/// constant: e = ε·v. tanh_field: e(x) = ε·tanh(⟨v, x⟩)·v.
struct ScorePerturbation {
  enum class Kind { none, constant, tanh_field };
  Kind kind = Kind::none;
  double epsilon = 0.0;
  Vector direction;  // normalised on use
};

struct LangevinRun {
  Potential potential;
  double dt = 1e-3;
  std::size_t n_steps = 1000;
  std::size_t n_particles = 10000;
  std::uint64_t seed = 0;
  Coupling coupling = Coupling::synchronous;
  ScorePerturbation perturbation;

  /// Throws std::invalid_argument unless dt > 0 and dt·L < 1.
  void validate() const;
};

/// Drift -∇U(x) + e(x).
void langevin_drift(const Potential& u, const ScorePerturbation& p, const double* x, double* out);

/// Particle positions after each step count in `record_steps` (ascending).
/// Throws std::runtime_error if any coordinate exceeds 1e8.
std::vector<RowMatrix> simulate(const LangevinRun& run, const RowMatrix& initial,
                                std::span<const std::size_t> record_steps);
RowMatrix simulate(const LangevinRun& run, const RowMatrix& initial);

/// Two ensembles evolved together: `a` without the run's perturbation, `b`
/// with it. Synchronous coupling feeds both the same Gaussian increments.
struct CoupledPaths {
  std::vector<RowMatrix> a;
  std::vector<RowMatrix> b;
};
CoupledPaths simulate_coupled(const LangevinRun& run, const RowMatrix& initial_a, const RowMatrix& initial_b,
                              std::span<const std::size_t> record_steps);

/// n copies of the point x0.
RowMatrix point_mass(std::size_t n, const Vector& x0);
/// Exact samples of exp(-U) for a quadratic potential.
RowMatrix sample_stationary(const Potential& u, std::size_t n, std::uint64_t seed);
/// N(0, I/m) in `dim` dimensions.
RowMatrix sample_gaussian_target(std::size_t dim, double m, std::size_t n, std::uint64_t seed);
/// Independent Student-t coordinates scaled to unit variance (df > 2).
RowMatrix sample_student_t(std::size_t dim, double df, std::size_t n, std::uint64_t seed);

struct Moments {
  Vector mean;
  Matrix cov;  // 1/n normalisation
};
Moments moments(const RowMatrix& x);

double w2_gaussian(const Vector& mean1, const Matrix& cov1, const Vector& mean2, const Matrix& cov2);
/// Exact 1-D W2 between equal-size empirical measures (sorted matching).
double w2_empirical_1d(std::span<const double> a, std::span<const double> b);

struct ContractionRow {
  double t = 0.0;
  double w2 = 0.0;
  double bound = 0.0;   // e^{-mt}·W2(ν0, μ)
  double allowed = 0.0; // bound·(1 + rel_tol) + abs_slack
  bool ok = false;
};

struct ContractionReport {
  double m = 0.0;
  double w2_initial = 0.0;
  double fitted_exponent = 0.0;  // -slope of log W2 against t, t = 0 included
  double rel_tol = 0.0;
  double abs_slack = 0.0;
  std::vector<ContractionRow> rows;
  bool passed = false;
};

/// Starts every particle at x0; quadratic potentials only.
ContractionReport verify_contraction(const LangevinRun& run, const Vector& x0, std::span<const double> times,
                                     double rel_tol = 0.05, double abs_slack = 0.02);

struct PerturbationReport {
  double epsilon = 0.0;
  double m = 0.0;
  double bound = 0.0;          // ε/m
  double w2 = 0.0;             // perturbed vs unperturbed ensemble, moment matched
  double w2_to_target = 0.0;   // perturbed ensemble vs exact stationary law
  double horizon = 0.0;
  double rel_tol = 0.0;
  double noise_floor = 0.0;
  bool passed = false;
};

/// Both copies start from exact stationary samples and run for run.n_steps.
PerturbationReport verify_perturbation(const LangevinRun& run, double rel_tol = 0.05, double noise_floor = 0.0);

struct MonotonicityReport {
  std::size_t n_pairs = 0;
  std::size_t violations = 0;
  double m = 0.0;
  double min_ratio = 0.0;  // min ⟨∇U(x)-∇U(y), x-y⟩ / ‖x-y‖²
  double slack = 0.0;
  bool passed = false;
};

MonotonicityReport verify_monotonicity(const Potential& u, std::size_t n_pairs, double box, std::uint64_t seed,
                                       double slack = 1e-10);

struct TailRow {
  double t = 0.0;
  double tail = 0.0;      // P(| ‖X-EX‖ - E‖X-EX‖ | ≥ t)
  double constant = 0.0;  // largest c with tail ≤ 2 exp(-c m t²) at this t
};

struct ConcentrationReport {
  double m = 0.0;
  std::size_t n_samples = 0;
  std::optional<double> fitted_constant;  // empty when the tail is identically zero
  double threshold = 0.0;
  std::vector<TailRow> rows;
  bool passed = false;
};

/// Grid t = step, 2·step, ... while at least `min_tail_count` samples remain
/// in the tail.
ConcentrationReport verify_concentration(const RowMatrix& samples, double m, double threshold = 0.1,
                                         double grid_step = 0.05, std::size_t min_tail_count = 100);

}  // namespace layergeo
