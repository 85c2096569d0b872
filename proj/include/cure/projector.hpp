#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cure/spectra.hpp"

namespace cure {

enum class Role { forget, retain, discriminative, unlearn };

constexpr std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::forget: return "forget";
    case Role::retain: return "retain";
    case Role::discriminative: return "discriminative";
    case Role::unlearn: return "unlearn";
  }
  return "unknown";
}

/// Dense d x d operator tagged with the role it plays in the erasure.
class ProjectionOperator {
 public:
  ProjectionOperator(Matrix matrix, Role role, Alpha alpha, std::vector<std::string> source_labels = {})
      : matrix_(std::move(matrix)), role_(role), alpha_(alpha), labels_(std::move(source_labels)) {
    if (matrix_.rows() != matrix_.cols()) {
      fail(ErrorKind::DimensionMismatch, "projection operator must be square");
    }
  }

  const Matrix& matrix() const noexcept { return matrix_; }
  Role role() const noexcept { return role_; }
  const Alpha& alpha() const noexcept { return alpha_; }
  const std::vector<std::string>& source_labels() const noexcept { return labels_; }
  Eigen::Index dim() const noexcept { return matrix_.rows(); }

  Vector apply(const Vector& e) const {
    if (e.size() != dim()) fail(ErrorKind::DimensionMismatch, "vector length does not match operator");
    return matrix_ * e;
  }

 private:
  Matrix matrix_;
  Role role_;
  Alpha alpha_;
  std::vector<std::string> labels_;
};

/// U diag(f(r_i; alpha)) U^T, symmetrized. `role` must be forget or retain.
inline ProjectionOperator build_projector(const SvdFactors& factors, const Alpha& alpha, Role role = Role::forget,
                                          std::vector<std::string> labels = {}) {
  if (role != Role::forget && role != Role::retain) {
    fail(ErrorKind::RoleError, "build_projector produces forget or retain operators, not " +
                                   std::string(to_string(role)));
  }
  const SpectralWeights weights = spectral_weights(factors.sigma(), alpha);
  const Matrix& u = factors.u();
  Matrix scaled = u * weights.lambda_diag.asDiagonal();
  Matrix p = scaled * u.transpose();
  Matrix sym = 0.5 * (p + p.transpose());
  return ProjectionOperator(std::move(sym), role, alpha, std::move(labels));
}

/// P_dis = P_f - P_f P_r, or exactly P_f when no retain operator is given.
inline ProjectionOperator compose_discriminative(const ProjectionOperator& forget,
                                                 const std::optional<ProjectionOperator>& retain) {
  if (forget.role() != Role::forget) {
    fail(ErrorKind::RoleError, "expected a forget operator, got " + std::string(to_string(forget.role())));
  }
  std::vector<std::string> labels = forget.source_labels();
  if (!retain) return ProjectionOperator(forget.matrix(), Role::discriminative, forget.alpha(), std::move(labels));

  if (retain->role() != Role::retain) {
    fail(ErrorKind::RoleError, "expected a retain operator, got " + std::string(to_string(retain->role())));
  }
  if (retain->dim() != forget.dim()) {
    fail(ErrorKind::DimensionMismatch, "forget operator is " + std::to_string(forget.dim()) +
                                           "-dimensional but retain operator is " + std::to_string(retain->dim()));
  }
  Matrix restored;
  restored.noalias() = forget.matrix() * retain->matrix();
  Matrix dis = forget.matrix() - restored;
  labels.insert(labels.end(), retain->source_labels().begin(), retain->source_labels().end());
  return ProjectionOperator(std::move(dis), Role::discriminative, forget.alpha(), std::move(labels));
}

/// P_unlearn = I - P_dis.
inline ProjectionOperator unlearn_operator(const ProjectionOperator& discriminative) {
  if (discriminative.role() != Role::discriminative) {
    fail(ErrorKind::RoleError,
         "expected a discriminative operator, got " + std::string(to_string(discriminative.role())));
  }
  const auto d = discriminative.dim();
  Matrix m = Matrix::Identity(d, d) - discriminative.matrix();
  return ProjectionOperator(std::move(m), Role::unlearn, discriminative.alpha(), discriminative.source_labels());
}

/// Full chain from forget (and optional retain) embeddings to P_unlearn.
inline ProjectionOperator erasure_operator(const EmbeddingMatrix& forget, const EmbeddingMatrix* retain,
                                           const Alpha& alpha) {
  ProjectionOperator pf = build_projector(thin_svd(forget), alpha, Role::forget, {forget.label()});
  std::optional<ProjectionOperator> pr;
  if (retain != nullptr) {
    if (retain->dim() != forget.dim()) {
      fail(ErrorKind::DimensionMismatch, "forget and retain embeddings differ in dimension");
    }
    pr = build_projector(thin_svd(*retain), alpha, Role::retain, {retain->label()});
  }
  return unlearn_operator(compose_discriminative(pf, pr));
}

}  // namespace cure
