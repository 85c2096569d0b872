#include <gtest/gtest.h>

#include "cure/verify.hpp"

using namespace cure;

TEST(Verify, AllPropertiesHold) {
  const auto results = verify::run_all({});
  EXPECT_GE(results.size(), 20u);
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Verify, NegativeControlIsCaught) {
  verify::Options opts;
  opts.inject_asymmetric_forget = true;
  const auto results = verify::run_all(opts);
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (!r.passed) {
      ++failed;
      EXPECT_EQ(r.name, "projector.symmetric_unit_spectrum");
      EXPECT_NE(r.detail.find("asymmetry"), std::string::npos);
    }
  }
  EXPECT_EQ(failed, 1u);
}

TEST(Verify, RepeatableForFixedSeed) {
  const auto a = verify::run_all({});
  const auto b = verify::run_all({});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].detail, b[i].detail);
  }
}

TEST(Verify, ProjectorSpectrumCheck) {
  auto check = [](const Matrix& m) {
    return verify::check_projector_spectrum(ProjectionOperator(m, Role::forget, Alpha(2)), "p").passed;
  };
  EXPECT_TRUE(check(Matrix::Identity(3, 3)));
  EXPECT_FALSE(check(2.0 * Matrix::Identity(3, 3)));
  Matrix skew = Matrix::Zero(3, 3);
  skew(0, 1) = 1e-6;
  EXPECT_FALSE(check(skew));
}
