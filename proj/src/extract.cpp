#include "layergeo/extract.hpp"

#include <Eigen/QR>
#include <random>
#include <stdexcept>

#include "layergeo/rng.hpp"

namespace layergeo {

namespace {

void check_shapes(const Tensor3& acts, const Mask& mask) {
  if (acts.n_seqs != mask.n_seqs || acts.seq_len != mask.seq_len) {
    throw std::invalid_argument("activation and mask shapes differ");
  }
}

std::size_t require_valid(const Mask& mask, std::size_t i) {
  const std::size_t c = mask.valid_count(i);
  if (c == 0) throw std::invalid_argument("sequence " + std::to_string(i) + " has an all-zero mask");
  return c;
}

Tensor3 head_sequences(const Tensor3& acts, std::size_t n) {
  Tensor3 out(n, acts.seq_len, acts.hidden);
  std::copy_n(acts.data.begin(), out.data.size(), out.data.begin());
  return out;
}

Mask head_sequences(const Mask& mask, std::size_t n) {
  Mask out(n, mask.seq_len, 0);
  std::copy_n(mask.data.begin(), out.data.size(), out.data.begin());
  return out;
}

}  // namespace

std::string to_string(Pooling pooling) {
  switch (pooling) {
    case Pooling::mean: return "mean";
    case Pooling::last: return "last";
    case Pooling::token: return "token";
  }
  throw std::invalid_argument("unknown pooling");
}

Pooling pooling_from_string(const std::string& name) {
  if (name == "mean") return Pooling::mean;
  if (name == "last") return Pooling::last;
  if (name == "token") return Pooling::token;
  throw std::invalid_argument("unknown pooling mode: " + name);
}

RowMatrix pool_mean(const Tensor3& acts, const Mask& mask) {
  check_shapes(acts, mask);
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(acts.n_seqs), static_cast<Eigen::Index>(acts.hidden));
  for (std::size_t i = 0; i < acts.n_seqs; ++i) {
    const std::size_t count = require_valid(mask, i);
    for (std::size_t t = 0; t < acts.seq_len; ++t) {
      if (!mask.at(i, t)) continue;
      const double* h = acts.token(i, t);
      for (std::size_t k = 0; k < acts.hidden; ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) += h[k];
    }
    out.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(count);
  }
  return out;
}

RowMatrix pool_last(const Tensor3& acts, const Mask& mask) {
  check_shapes(acts, mask);
  RowMatrix out(static_cast<Eigen::Index>(acts.n_seqs), static_cast<Eigen::Index>(acts.hidden));
  for (std::size_t i = 0; i < acts.n_seqs; ++i) {
    require_valid(mask, i);
    std::size_t last = 0;
    for (std::size_t t = 0; t < acts.seq_len; ++t) {
      if (mask.at(i, t)) last = t;
    }
    const double* h = acts.token(i, last);
    for (std::size_t k = 0; k < acts.hidden; ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = h[k];
  }
  return out;
}

RowMatrix pool_token(const Tensor3& acts, const Mask& mask, std::size_t max_tokens, std::uint64_t seed) {
  check_shapes(acts, mask);
  if (max_tokens == 0) throw std::invalid_argument("max_tokens must be positive");
  std::vector<std::size_t> valid;  // flat (sequence * seq_len + position)
  for (std::size_t i = 0; i < acts.n_seqs; ++i) {
    for (std::size_t t = 0; t < acts.seq_len; ++t) {
      if (mask.at(i, t)) valid.push_back(i * acts.seq_len + t);
    }
  }
  if (valid.empty()) throw std::invalid_argument("no valid tokens in mask");

  std::vector<std::size_t> keep;
  if (valid.size() <= max_tokens) {
    keep = std::move(valid);
  } else {
    Engine engine = make_engine(seed, Stream::token_subsample);
    for (std::size_t idx : sample_without_replacement(valid.size(), max_tokens, engine)) keep.push_back(valid[idx]);
  }

  RowMatrix out(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(acts.hidden));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const double* h = acts.data.data() + keep[r] * acts.hidden;
    for (std::size_t k = 0; k < acts.hidden; ++k) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = h[k];
  }
  return out;
}

Matrix projection_basis(std::size_t input_dim, std::size_t proj_dim, std::uint64_t seed) {
  if (proj_dim == 0 || proj_dim > input_dim) throw std::invalid_argument("projection_basis: need 0 < p <= D");
  Engine engine = make_engine(seed, Stream::projection);
  std::normal_distribution<double> normal;
  Matrix g(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(proj_dim));
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(engine);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(g.rows(), g.cols());
}

Projected random_projection(const RowMatrix& x, std::size_t proj_dim, std::uint64_t seed) {
  const auto dim = static_cast<std::size_t>(x.cols());
  if (proj_dim == 0 || proj_dim >= dim) return {x, false};
  const Matrix r = projection_basis(dim, proj_dim, seed);
  return {x * r, true};
}

RepresentationSet extract(const Tensor3& acts, const Mask& mask, int layer, const ExtractConfig& cfg) {
  check_shapes(acts, mask);
  if (cfg.max_seqs == 0 || cfg.max_tokens == 0) throw std::invalid_argument("extraction caps must be positive");

  RowMatrix pooled;
  if (acts.n_seqs > cfg.max_seqs) {
    const Tensor3 a = head_sequences(acts, cfg.max_seqs);
    const Mask m = head_sequences(mask, cfg.max_seqs);
    pooled = cfg.pooling == Pooling::mean   ? pool_mean(a, m)
             : cfg.pooling == Pooling::last ? pool_last(a, m)
                                            : pool_token(a, m, cfg.max_tokens, cfg.seed);
  } else {
    pooled = cfg.pooling == Pooling::mean   ? pool_mean(acts, mask)
             : cfg.pooling == Pooling::last ? pool_last(acts, mask)
                                            : pool_token(acts, mask, cfg.max_tokens, cfg.seed);
  }

  RepresentationSet rep;
  rep.source_layer = layer;
  rep.pooling = cfg.pooling;
  rep.m_before_projection = static_cast<std::size_t>(pooled.rows());
  rep.d_before_projection = static_cast<std::size_t>(pooled.cols());
  Projected proj = random_projection(pooled, cfg.proj_dim, cfg.seed);
  rep.x = std::move(proj.x);
  rep.projected = proj.applied;
  if (rep.x.rows() < 2) throw std::invalid_argument("representation set needs at least two vectors");
  return rep;
}

}  // namespace layergeo
