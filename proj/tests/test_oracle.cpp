#include <gtest/gtest.h>

#include <cstring>

#include "cure/oracle.hpp"

using namespace cure;

namespace {

bool same_bytes(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

double suppression(const ErasureMetrics& m) { return m.suppression_residual; }
double retention(const ErasureMetrics& m) { return m.retention_error; }

}  // namespace

TEST(MakeConcepts, DisjointBasesAreOrthogonal) {
  const auto pair = make_concepts(16, 4, 4, 0, 7);
  EXPECT_LE((pair.basis_f.transpose() * pair.basis_r).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((pair.basis_f.transpose() * pair.basis_f - Matrix::Identity(4, 4)).norm(), 1e-12);
  EXPECT_EQ(pair.embed_f.rows(), 16);
  EXPECT_EQ(pair.embed_f.cols(), 6);
}

TEST(MakeConcepts, SharedColumnsCoincide) {
  const auto pair = make_concepts(16, 4, 3, 2, 7);
  EXPECT_TRUE(same_bytes(pair.basis_f.leftCols(2), pair.basis_r.leftCols(2)));
  EXPECT_LE((pair.basis_f.rightCols(2).transpose() * pair.basis_r.rightCols(1)).cwiseAbs().maxCoeff(), 1e-12);
  const auto full = make_concepts(8, 2, 2, 2, 7);
  EXPECT_TRUE(same_bytes(full.basis_f, full.basis_r));
}

TEST(MakeConcepts, EmbeddingsSpanTheirBases) {
  const auto pair = make_concepts(20, 3, 5, 1, 3);
  const Matrix pf = pair.basis_f * pair.basis_f.transpose();
  EXPECT_LE((pf * pair.embed_f - pair.embed_f).norm(), 1e-10 * pair.embed_f.norm());
  EXPECT_EQ(thin_svd(pair.forget()).rank(), 3);
  EXPECT_EQ(thin_svd(pair.retain()).rank(), 5);
}

TEST(MakeConcepts, SameSeedSameBytes) {
  const auto a = make_concepts(16, 4, 4, 2, 7);
  const auto b = make_concepts(16, 4, 4, 2, 7);
  EXPECT_TRUE(same_bytes(a.embed_f, b.embed_f));
  EXPECT_TRUE(same_bytes(a.embed_r, b.embed_r));
  const auto c = make_concepts(16, 4, 4, 2, 8);
  EXPECT_FALSE(same_bytes(a.embed_f, c.embed_f));
}

TEST(MakeConcepts, RejectsImpossibleShapes) {
  auto kind = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  EXPECT_EQ(kind([] { make_concepts(4, 3, 3, 0, 1); }), ErrorKind::DimensionError);
  EXPECT_EQ(kind([] { make_concepts(8, 2, 2, 3, 1); }), ErrorKind::DimensionError);
  EXPECT_EQ(kind([] { make_concepts(8, 0, 2, 0, 1); }), ErrorKind::DimensionError);
  EXPECT_EQ(kind([] { make_concepts(8, 2, 2, 0, 1, {.decay = 0.0}); }), ErrorKind::DomainError);
}

TEST(Measure, DisjointInfinityErasesCompletely) {
  const auto m = measure(make_concepts(16, 4, 4, 0, 7), Alpha::infinity());
  EXPECT_LE(m.suppression_residual, 1e-10);
  EXPECT_LE(m.retention_error, 1e-10);
  EXPECT_EQ(m.shared_error, 0.0);
}

TEST(Measure, FullOverlapCannotErase) {
  const auto pair = make_concepts(8, 2, 2, 2, 7);
  EXPECT_GE(measure(pair, Alpha::infinity()).suppression_residual, 1.0 - 1e-10);
  for (const auto& m : sweep(pair, default_alpha_grid())) EXPECT_GE(m.suppression_residual, 0.75);
}

TEST(Measure, SharedDirectionsSurvive) {
  for (Eigen::Index m = 1; m <= 3; ++m) {
    const auto pair = make_concepts(24, 4, 4, m, 11 + static_cast<std::uint64_t>(m));
    EXPECT_LE(measure(pair, Alpha::infinity()).shared_error, 1e-8) << "overlap " << m;
  }
}

TEST(Measure, TradeoffFollowsAlpha) {
  for (std::uint64_t seed : {7u, 19u, 23u}) {
    const auto rows = sweep(make_concepts(16, 4, 4, 2, seed), default_alpha_grid());
    ASSERT_EQ(rows.size(), 7u);
    EXPECT_TRUE(non_increasing(rows, suppression)) << "seed " << seed;
    EXPECT_TRUE(non_decreasing(rows, retention)) << "seed " << seed;
    EXPECT_LT(rows.back().suppression_residual, rows.front().suppression_residual);
  }
}

TEST(Measure, Deterministic) {
  const auto pair = make_concepts(16, 4, 4, 2, 7);
  const auto a = sweep(pair, default_alpha_grid());
  const auto b = sweep(make_concepts(16, 4, 4, 2, 7), default_alpha_grid());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].suppression_residual, b[i].suppression_residual);
    EXPECT_EQ(a[i].retention_error, b[i].retention_error);
    EXPECT_EQ(a[i].shared_error, b[i].shared_error);
  }
}

TEST(Monotone, SlackAndDirection) {
  std::vector<ErasureMetrics> rows(3);
  rows[0].suppression_residual = 1.0;
  rows[1].suppression_residual = 0.5;
  rows[2].suppression_residual = 0.5 + 1e-13;
  EXPECT_TRUE(non_increasing(rows, suppression));
  rows[2].suppression_residual = 0.6;
  EXPECT_FALSE(non_increasing(rows, suppression));
  EXPECT_FALSE(non_decreasing(rows, suppression));
}

TEST(DefaultGrid, OrderedWithInfinityLast) {
  const auto grid = default_alpha_grid();
  ASSERT_EQ(grid.size(), 7u);
  EXPECT_EQ(grid.front().value(), 1.0);
  EXPECT_TRUE(grid.back().is_infinite());
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_LT(grid[i - 1], grid[i]);
}
