#pragma once

// Matrix primitives shared by every other header: embedding matrices, the
// thin SVD with its numerical-rank cut, normalized spectral energies and the
// two spectral filters (expansion and Tikhonov).

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <utility>

#include "cure/error.hpp"

namespace cure {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Expansion strength. Either a finite real >= 1 or the symbolic infinity
/// (hard selection of every nonzero mode).
class Alpha {
 public:
  explicit Alpha(double value) : value_(value) {
    if (std::isnan(value) || value < 1.0) {
      fail(ErrorKind::DomainError, "alpha must be >= 1 or inf, got " + std::to_string(value));
    }
  }

  static Alpha infinity() { return Alpha(std::numeric_limits<double>::infinity()); }

  /// Accepts a decimal number or the literal token "inf".
  static Alpha parse(std::string_view text) {
    if (text == "inf") return infinity();
    double value = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
      fail(ErrorKind::DomainError, "cannot parse alpha '" + std::string(text) + "'");
    }
    return Alpha(value);
  }

  bool is_infinite() const noexcept { return std::isinf(value_); }
  double value() const noexcept { return value_; }

  std::string to_string() const {
    if (is_infinite()) return "inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value_);
    return std::string(buf, ptr);
  }

  friend bool operator==(const Alpha&, const Alpha&) = default;
  friend auto operator<=>(const Alpha& a, const Alpha& b) { return a.value_ <=> b.value_; }

 private:
  double value_;
};

/// d x n matrix whose columns are the token embeddings of one concept set.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(Matrix data, std::string label = {})
      : data_(std::move(data)), label_(std::move(label)) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      fail(ErrorKind::DomainError, "embedding matrix '" + label_ + "' must be at least 1x1");
    }
    if (!data_.allFinite()) {
      fail(ErrorKind::NonFiniteInput, "embedding matrix '" + label_ + "' contains NaN or Inf");
    }
  }

  const Matrix& data() const noexcept { return data_; }
  Eigen::Index dim() const noexcept { return data_.rows(); }
  Eigen::Index tokens() const noexcept { return data_.cols(); }
  const std::string& label() const noexcept { return label_; }

 private:
  Matrix data_;
  std::string label_;
};

/// Thin SVD truncated to the numerical rank: E ~= U diag(sigma) V^T.
class SvdFactors {
 public:
  /// Checks shapes, ordering and orthonormality (1e-10) of hand-built factors.
  SvdFactors(Matrix u, Vector sigma, Matrix v) : u_(std::move(u)), sigma_(std::move(sigma)), v_(std::move(v)) {
    const auto k = sigma_.size();
    if (k < 1) fail(ErrorKind::EmptySpectrum, "factorization has no singular values");
    if (u_.cols() != k || v_.cols() != k) {
      fail(ErrorKind::DimensionMismatch, "U, sigma and V disagree on rank");
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!(sigma_[i] > 0.0) || !std::isfinite(sigma_[i])) {
        fail(ErrorKind::DomainError, "singular values must be finite and positive");
      }
      if (i > 0 && sigma_[i] > sigma_[i - 1]) {
        fail(ErrorKind::DomainError, "singular values must be non-increasing");
      }
    }
    const Matrix eye = Matrix::Identity(k, k);
    if ((u_.transpose() * u_ - eye).norm() > 1e-10 || (v_.transpose() * v_ - eye).norm() > 1e-10) {
      fail(ErrorKind::DomainError, "U and V must have orthonormal columns");
    }
  }

  const Matrix& u() const noexcept { return u_; }
  const Vector& sigma() const noexcept { return sigma_; }
  const Matrix& v() const noexcept { return v_; }
  Eigen::Index rank() const noexcept { return sigma_.size(); }
  Eigen::Index dim() const noexcept { return u_.rows(); }

  Matrix reconstruct() const { return u_ * sigma_.asDiagonal() * v_.transpose(); }

 private:
  struct Unchecked {};
  SvdFactors(Unchecked, Matrix u, Vector sigma, Matrix v)
      : u_(std::move(u)), sigma_(std::move(sigma)), v_(std::move(v)) {}

  friend SvdFactors thin_svd(const EmbeddingMatrix&);

  Matrix u_;
  Vector sigma_;
  Matrix v_;
};

/// Numerical-rank threshold max(d, n) * eps * sigma_1.
inline double rank_threshold(Eigen::Index rows, Eigen::Index cols, double sigma_max) noexcept {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * sigma_max;
}

/// Thin SVD with components at or below the rank threshold dropped. Each U
/// column is sign-normalized so its largest-magnitude entry is non-negative
/// (first such entry on ties), with V flipped to match.
inline SvdFactors thin_svd(const EmbeddingMatrix& embedding) {
  const Matrix& e = embedding.data();
  Eigen::BDCSVD<Matrix> svd(e, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || !(s[0] > 0.0)) {
    fail(ErrorKind::EmptySpectrum, "embedding matrix '" + embedding.label() + "' is zero");
  }
  const double cut = rank_threshold(e.rows(), e.cols(), s[0]);
  Eigen::Index k = 0;
  while (k < s.size() && s[k] > cut) ++k;

  Matrix u = svd.matrixU().leftCols(k);
  Matrix v = svd.matrixV().leftCols(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::Index pivot = 0;
    u.col(j).cwiseAbs().maxCoeff(&pivot);
    if (u(pivot, j) < 0.0) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }
  return SvdFactors(SvdFactors::Unchecked{}, std::move(u), s.head(k), std::move(v));
}

/// r_i = sigma_i^2 / sum_j sigma_j^2.
inline Vector spectral_energies(const Vector& sigma) {
  if (!sigma.allFinite()) fail(ErrorKind::NonFiniteInput, "spectrum contains NaN or Inf");
  if ((sigma.array() < 0.0).any()) fail(ErrorKind::DomainError, "singular values must be non-negative");
  const double scale = sigma.size() == 0 ? 0.0 : sigma.maxCoeff();
  if (!(scale > 0.0)) fail(ErrorKind::EmptySpectrum, "spectrum has no positive singular value");
  // Normalizing by the largest value first keeps the squares in range.
  const Vector scaled = sigma / scale;
  const Vector energy = scaled.array().square();
  return energy / energy.sum();
}

namespace detail {
inline void check_filter_domain(double r, const Alpha& alpha) {
  if (!(r >= 0.0 && r <= 1.0)) {
    fail(ErrorKind::DomainError, "energy " + std::to_string(r) + " outside [0, 1] (alpha " + alpha.to_string() + ")");
  }
}
}  // namespace detail

/// Spectral expansion f(r; alpha) = alpha r / ((alpha - 1) r + 1).
/// alpha = 1 returns r unchanged; alpha = inf is the indicator of r > 0.
inline double expansion_f(double r, const Alpha& alpha) {
  detail::check_filter_domain(r, alpha);
  if (alpha.is_infinite()) return r > 0.0 ? 1.0 : 0.0;
  const double a = alpha.value();
  return (a * r) / ((a - 1.0) * r + 1.0);
}

/// Tikhonov filter written in normalized energies, g(r; alpha) = alpha r / (alpha r + 1).
/// Equals sigma^2 / (sigma^2 + lambda) for lambda = sum_j sigma_j^2 / alpha.
inline double tikhonov_g(double r, const Alpha& alpha) {
  detail::check_filter_domain(r, alpha);
  if (alpha.is_infinite()) fail(ErrorKind::DomainError, "tikhonov filter needs a finite alpha");
  const double a = alpha.value();
  return (a * r) / (a * r + 1.0);
}

/// Regularization parameter that makes the classical filter match tikhonov_g.
inline double tikhonov_lambda(const Vector& sigma, const Alpha& alpha) {
  if (alpha.is_infinite()) fail(ErrorKind::DomainError, "tikhonov filter needs a finite alpha");
  return sigma.squaredNorm() / alpha.value();
}

struct SpectralWeights {
  Vector r;
  Vector lambda_diag;
  Alpha alpha;
};

inline SpectralWeights spectral_weights(const Vector& sigma, const Alpha& alpha) {
  Vector r = spectral_energies(sigma);
  Vector diag(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) diag[i] = expansion_f(std::min(r[i], 1.0), alpha);
  return SpectralWeights{std::move(r), std::move(diag), alpha};
}

}  // namespace cure
