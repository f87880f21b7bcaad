#include "layergeo/langevin.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "layergeo/kernels.hpp"
#include "layergeo/rng.hpp"
#include "layergeo/spectral.hpp"

namespace layergeo {

namespace {

// Largest second derivative of x⁴/(1+x²) is 2.5, so the quartic term adds at
// most q/4·2.5 to the Hessian.
constexpr double kQuarticCurvature = 0.625;

Matrix psd_sqrt(const Matrix& a) {
  const SymmetricEigen e = eig_sym(0.5 * (a + a.transpose()));
  return e.vectors * e.values.cwiseMax(0.0).cwiseSqrt().asDiagonal() * e.vectors.transpose();
}

std::vector<std::size_t> steps_for(std::span<const double> times, double dt) {
  std::vector<std::size_t> steps;
  for (double t : times) {
    if (!(t >= 0.0)) throw std::invalid_argument("times must be non-negative");
    steps.push_back(static_cast<std::size_t>(std::llround(t / dt)));
  }
  return steps;
}

kernels::Drift make_drift(const Potential& u, const ScorePerturbation& p) {
  return [&u, p](const double* x, double* out) { langevin_drift(u, p, x, out); };
}

void check_divergence(const kernels::EnsembleRecord& rec, const LangevinRun& run) {
  if (!rec.diverged) return;
  std::ostringstream msg;
  msg << "langevin ensemble diverged at step " << rec.diverged_step << " (dt=" << run.dt
      << ", dt*L=" << run.dt * run.potential.lipschitz() << "); reduce dt";
  throw std::runtime_error(msg.str());
}

}  // namespace

Potential Potential::quadratic(const Matrix& a, const Vector& shift) {
  if (a.rows() != a.cols() || a.rows() != shift.size() || a.rows() == 0) {
    throw std::invalid_argument("quadratic potential: shape mismatch");
  }
  const SymmetricEigen e = eig_sym(a);
  const Eigen::Index d = a.rows();
  if (!(e.values(d - 1) > 0.0)) throw std::invalid_argument("quadratic potential: A must be positive definite");
  Potential u;
  u.kind_ = PotentialKind::quadratic;
  u.dim_ = static_cast<std::size_t>(d);
  u.a_ = 0.5 * (a + a.transpose());
  u.shift_ = shift;
  u.m_ = e.values(d - 1);
  u.lipschitz_ = e.values(0);
  return u;
}

Potential Potential::isotropic(std::size_t dim, double m) {
  const auto d = static_cast<Eigen::Index>(dim);
  return quadratic(m * Matrix::Identity(d, d), Vector::Zero(d));
}

Potential Potential::soft_quartic(std::size_t dim, double m, double quartic) {
  if (dim == 0) throw std::invalid_argument("soft_quartic: dim must be positive");
  if (!(m > 0.0) || !(quartic >= 0.0)) throw std::invalid_argument("soft_quartic: need m > 0 and quartic >= 0");
  Potential u;
  u.kind_ = PotentialKind::soft_quartic;
  u.dim_ = dim;
  u.m_ = m;
  u.quartic_ = quartic;
  u.lipschitz_ = m + kQuarticCurvature * quartic;
  u.shift_ = Vector::Zero(static_cast<Eigen::Index>(dim));
  return u;
}

void Potential::gradient(const double* x, double* out) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  if (kind_ == PotentialKind::quadratic) {
    Eigen::Map<const Vector> xv(x, d);
    Eigen::Map<Vector> ov(out, d);
    ov.noalias() = a_ * (xv - shift_);
    return;
  }
  for (std::size_t i = 0; i < dim_; ++i) {
    const double v = x[i];
    const double w = 1.0 + v * v;
    out[i] = m_ * v + 0.25 * quartic_ * (2.0 * v - 2.0 * v / (w * w));
  }
}

Vector Potential::gradient(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) throw std::invalid_argument("gradient: dimension mismatch");
  Vector out(x.size());
  gradient(x.data(), out.data());
  return out;
}

void LangevinRun::validate() const {
  if (potential.dim() == 0) throw std::invalid_argument("langevin: potential not set");
  if (!(dt > 0.0)) throw std::invalid_argument("langevin: dt must be positive");
  if (!(dt * potential.lipschitz() < 1.0)) {
    std::ostringstream msg;
    msg << "langevin: step size unstable, dt*L = " << dt * potential.lipschitz() << " must be < 1";
    throw std::invalid_argument(msg.str());
  }
  if (n_particles == 0) throw std::invalid_argument("langevin: n_particles must be positive");
  if (perturbation.kind != ScorePerturbation::Kind::none) {
    if (!(perturbation.epsilon >= 0.0)) throw std::invalid_argument("perturbation epsilon must be non-negative");
    if (static_cast<std::size_t>(perturbation.direction.size()) != potential.dim()) {
      throw std::invalid_argument("perturbation direction has wrong dimension");
    }
    if (!(perturbation.direction.norm() > 0.0)) throw std::invalid_argument("perturbation direction is zero");
  }
}

void langevin_drift(const Potential& u, const ScorePerturbation& p, const double* x, double* out) {
  u.gradient(x, out);
  const std::size_t d = u.dim();
  for (std::size_t i = 0; i < d; ++i) out[i] = -out[i];
  if (p.kind == ScorePerturbation::Kind::none || p.epsilon == 0.0) return;
  const double norm = p.direction.norm();
  double scale = p.epsilon / norm;
  if (p.kind == ScorePerturbation::Kind::tanh_field) {
    double proj = 0.0;
    for (std::size_t i = 0; i < d; ++i) proj += p.direction(static_cast<Eigen::Index>(i)) * x[i];
    scale *= std::tanh(proj / norm);
  }
  for (std::size_t i = 0; i < d; ++i) out[i] += scale * p.direction(static_cast<Eigen::Index>(i));
}

std::vector<RowMatrix> simulate(const LangevinRun& run, const RowMatrix& initial,
                                std::span<const std::size_t> record_steps) {
  run.validate();
  if (static_cast<std::size_t>(initial.cols()) != run.potential.dim()) {
    throw std::invalid_argument("simulate: initial ensemble has wrong dimension");
  }
  if (!std::is_sorted(record_steps.begin(), record_steps.end())) {
    throw std::invalid_argument("simulate: record steps must be ascending");
  }
  kernels::EnsembleSpec spec;
  spec.initial = {initial};
  spec.drifts = {make_drift(run.potential, run.perturbation)};
  spec.dt = run.dt;
  spec.record_steps.assign(record_steps.begin(), record_steps.end());
  spec.seed = run.seed;
  const kernels::EnsembleRecord rec = kernels::omp::langevin_ensemble(spec);
  check_divergence(rec, run);
  std::vector<RowMatrix> out;
  out.reserve(rec.snapshots.size());
  for (const auto& snap : rec.snapshots) out.push_back(snap[0]);
  return out;
}

RowMatrix simulate(const LangevinRun& run, const RowMatrix& initial) {
  const std::size_t steps[] = {run.n_steps};
  return simulate(run, initial, steps).front();
}

CoupledPaths simulate_coupled(const LangevinRun& run, const RowMatrix& initial_a, const RowMatrix& initial_b,
                              std::span<const std::size_t> record_steps) {
  run.validate();
  if (initial_a.rows() != initial_b.rows() || initial_a.cols() != initial_b.cols() ||
      static_cast<std::size_t>(initial_a.cols()) != run.potential.dim()) {
    throw std::invalid_argument("simulate_coupled: initial ensembles must share shape and dimension");
  }
  if (!std::is_sorted(record_steps.begin(), record_steps.end())) {
    throw std::invalid_argument("simulate_coupled: record steps must be ascending");
  }
  kernels::EnsembleSpec spec;
  spec.initial = {initial_a, initial_b};
  spec.drifts = {make_drift(run.potential, ScorePerturbation{}), make_drift(run.potential, run.perturbation)};
  spec.dt = run.dt;
  spec.record_steps.assign(record_steps.begin(), record_steps.end());
  spec.seed = run.seed;
  spec.shared_noise = run.coupling == Coupling::synchronous;
  const kernels::EnsembleRecord rec = kernels::omp::langevin_ensemble(spec);
  check_divergence(rec, run);
  CoupledPaths out;
  for (const auto& snap : rec.snapshots) {
    out.a.push_back(snap[0]);
    out.b.push_back(snap[1]);
  }
  return out;
}

RowMatrix point_mass(std::size_t n, const Vector& x0) {
  RowMatrix out(static_cast<Eigen::Index>(n), x0.size());
  out.rowwise() = x0.transpose();
  return out;
}

RowMatrix sample_stationary(const Potential& u, std::size_t n, std::uint64_t seed) {
  if (u.kind() != PotentialKind::quadratic) throw std::invalid_argument("sample_stationary: quadratic potentials only");
  const Matrix cov = u.a().inverse();
  const Matrix factor = psd_sqrt(0.5 * (cov + cov.transpose()));
  Engine engine = make_engine(seed, Stream::particles, ~std::uint64_t{0});
  std::normal_distribution<double> normal;
  const auto d = static_cast<Eigen::Index>(u.dim());
  RowMatrix out(static_cast<Eigen::Index>(n), d);
  Vector z(d);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(engine);
    out.row(i) = (u.shift() + factor * z).transpose();
  }
  return out;
}

RowMatrix sample_gaussian_target(std::size_t dim, double m, std::size_t n, std::uint64_t seed) {
  if (!(m > 0.0)) throw std::invalid_argument("sample_gaussian_target: m must be positive");
  Engine engine = make_engine(seed, Stream::synth, 1);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(m));
  RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = normal(engine);
  }
  return out;
}

RowMatrix sample_student_t(std::size_t dim, double df, std::size_t n, std::uint64_t seed) {
  if (!(df > 2.0)) throw std::invalid_argument("sample_student_t: df must exceed 2");
  Engine engine = make_engine(seed, Stream::synth, 2);
  std::student_t_distribution<double> student(df);
  const double scale = std::sqrt((df - 2.0) / df);
  RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = scale * student(engine);
  }
  return out;
}

Moments moments(const RowMatrix& x) {
  if (x.rows() == 0) throw std::invalid_argument("moments: empty ensemble");
  Moments out;
  out.mean = x.colwise().mean().transpose();
  const RowMatrix centered = x.rowwise() - out.mean.transpose();
  out.cov = (centered.transpose() * centered) / static_cast<double>(x.rows());
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

double w2_gaussian(const Vector& mean1, const Matrix& cov1, const Vector& mean2, const Matrix& cov2) {
  const Eigen::Index d = mean1.size();
  if (mean2.size() != d || cov1.rows() != d || cov1.cols() != d || cov2.rows() != d || cov2.cols() != d) {
    throw std::invalid_argument("w2_gaussian: dimension mismatch");
  }
  const Matrix root2 = psd_sqrt(cov2);
  const Matrix cross = root2 * cov1 * root2;
  const SymmetricEigen e = eig_sym(0.5 * (cross + cross.transpose()));
  const double bures = cov1.trace() + cov2.trace() - 2.0 * e.values.cwiseMax(0.0).cwiseSqrt().sum();
  return std::sqrt(std::max(0.0, (mean1 - mean2).squaredNorm() + bures));
}

double w2_empirical_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("w2_empirical_1d: need equal nonzero sizes");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) acc += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  return std::sqrt(acc / static_cast<double>(sa.size()));
}

ContractionReport verify_contraction(const LangevinRun& run, const Vector& x0, std::span<const double> times,
                                     double rel_tol, double abs_slack) {
  const Potential& u = run.potential;
  if (u.kind() != PotentialKind::quadratic) throw std::invalid_argument("verify_contraction: quadratic potentials only");
  if (static_cast<std::size_t>(x0.size()) != u.dim()) throw std::invalid_argument("verify_contraction: x0 dimension");
  const Matrix target_cov = u.a().inverse();
  const auto d = static_cast<Eigen::Index>(u.dim());

  ContractionReport rep;
  rep.m = u.strong_convexity();
  rep.rel_tol = rel_tol;
  rep.abs_slack = abs_slack;
  rep.w2_initial = w2_gaussian(x0, Matrix::Zero(d, d), u.shift(), target_cov);

  std::vector<std::size_t> steps = steps_for(times, run.dt);
  std::vector<std::size_t> order(steps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return steps[l] < steps[r]; });
  std::vector<std::size_t> sorted_steps;
  for (std::size_t i : order) sorted_steps.push_back(steps[i]);

  const std::vector<RowMatrix> snaps = simulate(run, point_mass(run.n_particles, x0), sorted_steps);
  rep.rows.resize(times.size());
  for (std::size_t s = 0; s < order.size(); ++s) {
    const std::size_t i = order[s];
    const Moments mom = moments(snaps[s]);
    ContractionRow& row = rep.rows[i];
    row.t = times[i];
    row.w2 = w2_gaussian(mom.mean, mom.cov, u.shift(), target_cov);
    row.bound = std::exp(-rep.m * row.t) * rep.w2_initial;
    row.allowed = row.bound * (1.0 + rel_tol) + abs_slack;
    row.ok = row.w2 <= row.allowed;
  }

  // Least-squares slope of log W2 against t, anchored by the exact t = 0 value.
  std::vector<double> ts{0.0}, ys{std::log(rep.w2_initial)};
  for (const auto& row : rep.rows) {
    if (row.w2 > 0.0) {
      ts.push_back(row.t);
      ys.push_back(std::log(row.w2));
    }
  }
  double tm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    tm += ts[i];
    ym += ys[i];
  }
  tm /= static_cast<double>(ts.size());
  ym /= static_cast<double>(ts.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxy += (ts[i] - tm) * (ys[i] - ym);
    sxx += (ts[i] - tm) * (ts[i] - tm);
  }
  rep.fitted_exponent = sxx > 0.0 ? -sxy / sxx : 0.0;
  rep.passed = std::all_of(rep.rows.begin(), rep.rows.end(), [](const ContractionRow& r) { return r.ok; });
  return rep;
}

PerturbationReport verify_perturbation(const LangevinRun& run, double rel_tol, double noise_floor) {
  const Potential& u = run.potential;
  if (u.kind() != PotentialKind::quadratic) throw std::invalid_argument("verify_perturbation: quadratic potentials only");
  PerturbationReport rep;
  rep.epsilon = run.perturbation.kind == ScorePerturbation::Kind::none ? 0.0 : run.perturbation.epsilon;
  rep.m = u.strong_convexity();
  rep.bound = rep.epsilon / rep.m;
  rep.horizon = static_cast<double>(run.n_steps) * run.dt;
  rep.rel_tol = rel_tol;
  rep.noise_floor = noise_floor;

  const RowMatrix start = sample_stationary(u, run.n_particles, run.seed);
  const std::size_t steps[] = {run.n_steps};
  const CoupledPaths paths = simulate_coupled(run, start, start, steps);
  const Moments ma = moments(paths.a.front());
  const Moments mb = moments(paths.b.front());
  rep.w2 = w2_gaussian(mb.mean, mb.cov, ma.mean, ma.cov);
  rep.w2_to_target = w2_gaussian(mb.mean, mb.cov, u.shift(), u.a().inverse());
  rep.passed = rep.w2 <= rep.bound * (1.0 + rel_tol) + noise_floor;
  return rep;
}

MonotonicityReport verify_monotonicity(const Potential& u, std::size_t n_pairs, double box, std::uint64_t seed,
                                       double slack) {
  if (!(box > 0.0)) throw std::invalid_argument("verify_monotonicity: box must be positive");
  const auto d = static_cast<Eigen::Index>(u.dim());
  Engine engine = make_engine(seed, Stream::pairs, 1);
  std::uniform_real_distribution<double> coord(-box, box);
  MonotonicityReport rep;
  rep.n_pairs = n_pairs;
  rep.m = u.strong_convexity();
  rep.slack = slack;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  Vector x(d), y(d), gx(d), gy(d);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    for (Eigen::Index j = 0; j < d; ++j) x(j) = coord(engine);
    for (Eigen::Index j = 0; j < d; ++j) y(j) = coord(engine);
    u.gradient(x.data(), gx.data());
    u.gradient(y.data(), gy.data());
    const Vector diff = x - y;
    const double sq = diff.squaredNorm();
    const double inner = (gx - gy).dot(diff);
    if (inner < rep.m * sq - slack) ++rep.violations;
    if (sq > 0.0) rep.min_ratio = std::min(rep.min_ratio, inner / sq);
  }
  rep.passed = rep.violations == 0;
  return rep;
}

ConcentrationReport verify_concentration(const RowMatrix& samples, double m, double threshold, double grid_step,
                                         std::size_t min_tail_count) {
  if (samples.rows() < 2) throw std::invalid_argument("verify_concentration: need at least two samples");
  if (!(m > 0.0) || !(grid_step > 0.0)) throw std::invalid_argument("verify_concentration: m and grid step must be positive");
  ConcentrationReport rep;
  rep.m = m;
  rep.n_samples = static_cast<std::size_t>(samples.rows());
  rep.threshold = threshold;

  const Vector center = samples.colwise().mean().transpose();
  std::vector<double> radius(rep.n_samples);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) radius[static_cast<std::size_t>(i)] = (samples.row(i).transpose() - center).norm();
  double mean_radius = 0.0;
  for (double r : radius) mean_radius += r;
  mean_radius /= static_cast<double>(radius.size());
  std::vector<double> dev(radius.size());
  for (std::size_t i = 0; i < radius.size(); ++i) dev[i] = std::abs(radius[i] - mean_radius);
  std::sort(dev.begin(), dev.end());

  const double n = static_cast<double>(dev.size());
  if (dev.back() <= 1e-12 * std::max(1.0, mean_radius)) {
    rep.passed = true;
    return rep;
  }
  for (std::size_t j = 1;; ++j) {
    const double t = grid_step * static_cast<double>(j);
    const auto first = std::lower_bound(dev.begin(), dev.end(), t);
    const auto count = static_cast<std::size_t>(dev.end() - first);
    if (count < min_tail_count) break;
    TailRow row;
    row.t = t;
    row.tail = static_cast<double>(count) / n;
    row.constant = -std::log(row.tail / 2.0) / (m * t * t);
    rep.rows.push_back(row);
  }
  if (rep.rows.empty()) throw std::invalid_argument("verify_concentration: too few samples to populate the tail grid");
  double c = rep.rows.front().constant;
  for (const auto& row : rep.rows) c = std::min(c, row.constant);
  rep.fitted_constant = c;
  rep.passed = c >= threshold;
  return rep;
}

}  // namespace layergeo
