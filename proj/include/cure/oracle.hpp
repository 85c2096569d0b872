#pragma once

// Synthetic forget/retain subspaces with a known overlap, and the brute-force
// residual metrics that make the erase/retain trade-off measurable without a
// diffusion model.

#include <cstdint>
#include <random>
#include <vector>

#include "cure/projector.hpp"

namespace cure {

struct ConceptOptions {
  double decay = 0.5;        // geometric ratio between consecutive singular values
  Eigen::Index extra_tokens = 2;  // token count is subspace rank + extra_tokens
};

/// Forget and retain bases sharing their first `overlap` columns; the remaining
/// columns are orthogonal within and across the two bases. E_f and E_r are
/// sample embeddings lying exactly in each span with singular values
/// 1, decay, decay^2, ...
struct SyntheticConceptPair {
  Eigen::Index d = 0;
  Eigen::Index overlap = 0;
  std::uint64_t seed = 0;
  Matrix basis_f;
  Matrix basis_r;
  Matrix embed_f;
  Matrix embed_r;

  Eigen::Index k_f() const noexcept { return basis_f.cols(); }
  Eigen::Index k_r() const noexcept { return basis_r.cols(); }
  EmbeddingMatrix forget() const { return EmbeddingMatrix(embed_f, "forget"); }
  EmbeddingMatrix retain() const { return EmbeddingMatrix(embed_r, "retain"); }
};

namespace detail {

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Matrix orthonormal_columns(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(rng, rows, cols));
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

inline Matrix sample_embedding(std::mt19937_64& rng, const Matrix& basis, const ConceptOptions& opts) {
  const auto k = basis.cols();
  Vector sigma(k);
  double s = 1.0;
  for (Eigen::Index i = 0; i < k; ++i, s *= opts.decay) sigma[i] = s;
  const Matrix v = orthonormal_columns(rng, k + opts.extra_tokens, k);
  return basis * sigma.asDiagonal() * v.transpose();
}

}  // namespace detail

inline SyntheticConceptPair make_concepts(Eigen::Index d, Eigen::Index k_f, Eigen::Index k_r, Eigen::Index overlap,
                                          std::uint64_t seed, const ConceptOptions& opts = {}) {
  if (d < 1 || k_f < 1 || k_r < 1) fail(ErrorKind::DimensionError, "d, k_f and k_r must be positive");
  if (overlap < 0 || overlap > std::min(k_f, k_r)) {
    fail(ErrorKind::DimensionError, "overlap must lie in [0, min(k_f, k_r)]");
  }
  const Eigen::Index total = k_f + k_r - overlap;
  if (total > d) {
    fail(ErrorKind::DimensionError, "subspaces of total rank " + std::to_string(total) + " do not fit in d = " +
                                        std::to_string(d));
  }
  if (!(opts.decay > 0.0 && opts.decay <= 1.0) || opts.extra_tokens < 0) {
    fail(ErrorKind::DomainError, "decay must lie in (0, 1] and extra_tokens must be non-negative");
  }

  std::mt19937_64 rng(seed);
  const Matrix q = detail::orthonormal_columns(rng, d, total);

  SyntheticConceptPair pair;
  pair.d = d;
  pair.overlap = overlap;
  pair.seed = seed;
  pair.basis_f = q.leftCols(k_f);
  pair.basis_r.resize(d, k_r);
  pair.basis_r.leftCols(overlap) = q.leftCols(overlap);
  pair.basis_r.rightCols(k_r - overlap) = q.rightCols(k_r - overlap);
  pair.embed_f = detail::sample_embedding(rng, pair.basis_f, opts);
  pair.embed_r = detail::sample_embedding(rng, pair.basis_r, opts);
  return pair;
}

struct ErasureMetrics {
  double suppression_residual = 0.0;  // mean ||P e|| over unique-forget probes
  double retention_error = 0.0;       // mean ||P e - e|| over unique-retain probes
  double shared_error = 0.0;          // mean ||P e - e|| over shared probes (0 when overlap = 0)
  Alpha alpha{1.0};
};

inline constexpr int kProbesPerSubspace = 64;

/// Deterministic unit vectors inside span(basis).
inline Matrix probe_vectors(const Matrix& basis, std::uint64_t seed, int count = kProbesPerSubspace) {
  std::mt19937_64 rng(seed);
  Matrix coeff = detail::gaussian(rng, basis.cols(), count);
  Matrix probes = basis * coeff;
  probes.colwise().normalize();
  return probes;
}

/// Probe subspaces. When a basis has no columns outside the overlap the whole
/// basis is used instead, so full-overlap pairs still get measured.
inline Matrix unique_forget_basis(const SyntheticConceptPair& pair) {
  const auto unique = pair.k_f() - pair.overlap;
  return unique > 0 ? Matrix(pair.basis_f.rightCols(unique)) : pair.basis_f;
}

inline Matrix unique_retain_basis(const SyntheticConceptPair& pair) {
  const auto unique = pair.k_r() - pair.overlap;
  return unique > 0 ? Matrix(pair.basis_r.rightCols(unique)) : pair.basis_r;
}

inline ErasureMetrics measure_operator(const SyntheticConceptPair& pair, const ProjectionOperator& unlearn) {
  auto mean_norm = [&](const Matrix& probes, bool subtract) {
    Matrix out = unlearn.matrix() * probes;
    if (subtract) out -= probes;
    return out.colwise().norm().mean();
  };
  ErasureMetrics m;
  m.alpha = unlearn.alpha();
  m.suppression_residual = mean_norm(probe_vectors(unique_forget_basis(pair), pair.seed ^ 0x9e3779b97f4a7c15ULL), false);
  m.retention_error = mean_norm(probe_vectors(unique_retain_basis(pair), pair.seed ^ 0xc2b2ae3d27d4eb4fULL), true);
  if (pair.overlap > 0) {
    m.shared_error =
        mean_norm(probe_vectors(pair.basis_f.leftCols(pair.overlap), pair.seed ^ 0x165667b19e3779f9ULL), true);
  }
  return m;
}

/// Runs thin_svd -> build_projector -> compose_discriminative -> unlearn_operator
/// on the pair's sample embeddings and evaluates the three residuals.
inline ErasureMetrics measure(const SyntheticConceptPair& pair, const Alpha& alpha) {
  const EmbeddingMatrix ef = pair.forget();
  const EmbeddingMatrix er = pair.retain();
  return measure_operator(pair, erasure_operator(ef, &er, alpha));
}

inline std::vector<Alpha> default_alpha_grid() {
  return {Alpha(1), Alpha(2), Alpha(5), Alpha(10), Alpha(100), Alpha(1000), Alpha::infinity()};
}

inline std::vector<ErasureMetrics> sweep(const SyntheticConceptPair& pair, const std::vector<Alpha>& alphas) {
  std::vector<ErasureMetrics> rows;
  rows.reserve(alphas.size());
  for (const auto& a : alphas) rows.push_back(measure(pair, a));
  return rows;
}

/// Monotonicity with an absolute slack for round-off.
template <class Getter>
bool non_increasing(const std::vector<ErasureMetrics>& rows, Getter get, double slack = 1e-12) {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (get(rows[i]) > get(rows[i - 1]) + slack) return false;
  return true;
}

template <class Getter>
bool non_decreasing(const std::vector<ErasureMetrics>& rows, Getter get, double slack = 1e-12) {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (get(rows[i]) + slack < get(rows[i - 1])) return false;
  return true;
}

}  // namespace cure
