#pragma once

// Self-check harness behind `cure verify`: every invariant the library
// promises, evaluated on seeded random instances. Results are plain data so
// both the CLI and the test suites can consume them.

#include <cstdint>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cure/bundle.hpp"
#include "cure/editor.hpp"
#include "cure/npy.hpp"
#include "cure/oracle.hpp"
#include "cure/projector.hpp"
#include "cure/report.hpp"
#include "cure/spectra.hpp"

namespace cure::verify {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 42;
  /// Negative control: perturb every forget operator with an antisymmetric
  /// term before the symmetry check.
  bool inject_asymmetric_forget = false;
};

namespace detail {

inline std::string sci(double x) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << x;
  return os.str();
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  return cure::detail::gaussian(rng, rows, cols);
}

inline Eigen::Index uniform(std::mt19937_64& rng, Eigen::Index lo, Eigen::Index hi) {
  return std::uniform_int_distribution<Eigen::Index>(lo, hi)(rng);
}

inline Alpha random_alpha(std::mt19937_64& rng) {
  const auto grid = default_alpha_grid();
  return grid[static_cast<std::size_t>(uniform(rng, 0, static_cast<Eigen::Index>(grid.size()) - 1))];
}

inline double spectral_norm(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

/// Random embedding of rank <= k inside R^d.
inline EmbeddingMatrix random_embedding(std::mt19937_64& rng, Eigen::Index d, Eigen::Index k, Eigen::Index n,
                                        const std::string& label) {
  return EmbeddingMatrix(random_matrix(rng, d, k) * random_matrix(rng, k, n), label);
}

}  // namespace detail

/// Symmetry and eigenvalue range of a forget/retain operator.
inline PropertyResult check_projector_spectrum(const ProjectionOperator& p, const std::string& name) {
  const Matrix& m = p.matrix();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) return {name, false, "asymmetry " + detail::sci(asym) + " > 1e-10"};
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo < -1e-10 || hi > 1.0 + 1e-10) {
    return {name, false, "eigenvalues span [" + detail::sci(lo) + ", " + detail::sci(hi) + "]"};
  }
  return {name, true, {}};
}

inline std::vector<PropertyResult> run_all(const Options& opts = {}) {
  using detail::sci;
  std::vector<PropertyResult> results;
  std::mt19937_64 rng(opts.seed);

  auto run = [&](const std::string& name, const std::function<std::string()>& body) {
    try {
      std::string problem = body();
      results.push_back({name, problem.empty(), problem});
    } catch (const std::exception& e) {
      results.push_back({name, false, std::string("threw ") + e.what()});
    }
  };

  // spectra
  run("svd.reconstruction_and_orthonormality", [&]() -> std::string {
    for (int t = 0; t < 50; ++t) {
      const auto d = detail::uniform(rng, 1, 96);
      const auto n = detail::uniform(rng, 1, 12);
      const auto k = detail::uniform(rng, 1, std::min(d, n));
      const EmbeddingMatrix e = detail::random_embedding(rng, d, k, n, "e");
      const SvdFactors f = thin_svd(e);
      const double err = (f.reconstruct() - e.data()).norm();
      if (err > 1e-8 * f.sigma()[0]) return "reconstruction error " + sci(err);
      const Matrix eye = Matrix::Identity(f.rank(), f.rank());
      const double du = detail::spectral_norm(f.u().transpose() * f.u() - eye);
      const double dv = detail::spectral_norm(f.v().transpose() * f.v() - eye);
      if (du > 1e-10 || dv > 1e-10) return "orthonormality defect " + sci(std::max(du, dv));
      if (f.rank() > k) return "rank " + std::to_string(f.rank()) + " exceeds construction rank";
    }
    return {};
  });

  run("svd.gram_consistency", [&]() -> std::string {
    for (int t = 0; t < 20; ++t) {
      const auto n = detail::uniform(rng, 1, 8);
      const auto d = detail::uniform(rng, n, 128);
      const EmbeddingMatrix e(detail::random_matrix(rng, d, n), "e");
      const SvdFactors f = thin_svd(e);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(e.data().transpose() * e.data(), Eigen::EigenvaluesOnly);
      const Vector ev = eig.eigenvalues().reverse();
      for (Eigen::Index i = 0; i < f.rank(); ++i) {
        const double s2 = f.sigma()[i] * f.sigma()[i];
        if (std::abs(s2 - ev[i]) > 1e-8 * ev[i]) return "sigma^2 " + sci(s2) + " vs eigenvalue " + sci(ev[i]);
      }
    }
    return {};
  });

  run("filters.monotone", [&]() -> std::string {
    std::vector<double> rs, as;
    for (int i = 1; i <= 20; ++i) rs.push_back(i / 21.0);
    for (int i = 0; i < 20; ++i) as.push_back(1.0 + i * 0.75);
    for (double a : as) {
      for (std::size_t i = 1; i < rs.size(); ++i)
        if (!(expansion_f(rs[i], Alpha(a)) > expansion_f(rs[i - 1], Alpha(a)))) return "not increasing in r";
    }
    for (double r : rs) {
      for (std::size_t i = 1; i < as.size(); ++i)
        if (!(expansion_f(r, Alpha(as[i])) > expansion_f(r, Alpha(as[i - 1])))) return "not increasing in alpha";
    }
    return {};
  });

  run("filters.expansion_dominates_tikhonov", [&]() -> std::string {
    for (int i = 0; i <= 200; ++i) {
      const double r = i / 200.0;
      for (double a : {1.0, 1.5, 2.0, 5.0, 10.0, 100.0, 1000.0}) {
        const double f = expansion_f(r, Alpha(a));
        const double g = tikhonov_g(r, Alpha(a));
        if (f < g) return "f < g at r=" + sci(r) + " alpha=" + sci(a);
        if (r > 0.0 && !(f > g)) return "f == g at positive r=" + sci(r);
      }
    }
    return {};
  });

  run("filters.range", [&]() -> std::string {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
      const double r = unit(rng);
      const Alpha a(1.0 + std::exp(12.0 * unit(rng)) - 1.0);
      for (double v : {expansion_f(r, a), tikhonov_g(r, a), expansion_f(r, Alpha::infinity())})
        if (v < 0.0 || v > 1.0) return "filter value " + sci(v) + " outside [0, 1]";
    }
    return {};
  });

  run("energies.scale_invariance", [&]() -> std::string {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
      Vector s = Vector::NullaryExpr(detail::uniform(rng, 1, 10), [&] { return unit(rng); });
      std::sort(s.data(), s.data() + s.size(), std::greater<>());
      s[0] += 0.1;
      const double c = std::exp(20.0 * (unit(rng) - 0.5));
      const double diff = (spectral_energies(c * s) - spectral_energies(s)).cwiseAbs().maxCoeff();
      if (diff > 1e-12) return "energies moved by " + sci(diff) + " under scaling";
      if (std::abs(spectral_energies(s).sum() - 1.0) > 1e-12) return "energies do not sum to 1";
    }
    return {};
  });

  // projector
  {
    PropertyResult worst{"projector.symmetric_unit_spectrum", true, {}};
    for (int t = 0; t < 40 && worst.passed; ++t) {
      const auto d = detail::uniform(rng, 2, 64);
      const auto k = detail::uniform(rng, 1, std::min<Eigen::Index>(d, 8));
      const EmbeddingMatrix e = detail::random_embedding(rng, d, k, k + 2, "e");
      const Role role = t % 2 == 0 ? Role::forget : Role::retain;
      ProjectionOperator p = build_projector(thin_svd(e), detail::random_alpha(rng), role);
      if (opts.inject_asymmetric_forget && role == Role::forget) {
        Matrix m = p.matrix();
        m(0, d - 1) += 1e-6;
        p = ProjectionOperator(std::move(m), role, p.alpha());
      }
      PropertyResult r = check_projector_spectrum(p, worst.name);
      if (!r.passed) worst = r;
    }
    results.push_back(worst);
  }

  run("projector.discriminative_norm_bound", [&]() -> std::string {
    for (int t = 0; t < 200; ++t) {
      const auto d = detail::uniform(rng, 2, 64);
      const EmbeddingMatrix ef = detail::random_embedding(rng, d, detail::uniform(rng, 1, std::min<Eigen::Index>(d, 6)), 6, "f");
      const EmbeddingMatrix er = detail::random_embedding(rng, d, detail::uniform(rng, 1, std::min<Eigen::Index>(d, 6)), 6, "r");
      const Alpha a = detail::random_alpha(rng);
      const auto pd = compose_discriminative(build_projector(thin_svd(ef), a, Role::forget),
                                             build_projector(thin_svd(er), a, Role::retain));
      const double norm = detail::spectral_norm(pd.matrix());
      if (norm > 1.0 + 1e-10) return "||P_dis||_2 = " + sci(norm);
    }
    return {};
  });

  run("projector.orthogonal_case_idempotent", [&]() -> std::string {
    for (int t = 0; t < 20; ++t) {
      const auto pair = make_concepts(24, 3, 4, 0, rng());
      const EmbeddingMatrix ef = pair.forget(), er = pair.retain();
      const Matrix p = erasure_operator(ef, &er, Alpha::infinity()).matrix();
      const double asym = (p - p.transpose()).norm();
      const double idem = (p * p - p).norm();
      if (asym > 1e-10 || idem > 1e-10) return "asymmetry " + sci(asym) + ", idempotence defect " + sci(idem);
    }
    return {};
  });

  run("projector.monotone_suppression", [&]() -> std::string {
    for (int t = 0; t < 10; ++t) {
      const auto pair = make_concepts(20, 4, 3, 1, rng());
      const EmbeddingMatrix ef = pair.forget(), er = pair.retain();
      const Matrix probes = probe_vectors(unique_forget_basis(pair), rng(), 8);
      Eigen::RowVectorXd prev = Eigen::RowVectorXd::Constant(probes.cols(), std::numeric_limits<double>::infinity());
      for (const Alpha& a : default_alpha_grid()) {
        const Eigen::RowVectorXd norms = (erasure_operator(ef, &er, a).matrix() * probes).colwise().norm();
        if (((norms - prev).array() > 1e-12).any()) return "suppression grew at alpha=" + a.to_string();
        prev = norms;
      }
    }
    return {};
  });

  run("projector.embedding_scale_invariance", [&]() -> std::string {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 30; ++t) {
      const auto d = detail::uniform(rng, 2, 48);
      const EmbeddingMatrix e = detail::random_embedding(rng, d, detail::uniform(rng, 1, std::min<Eigen::Index>(d, 5)), 7, "e");
      const double c = std::exp(10.0 * (unit(rng) - 0.5));
      const Alpha a = detail::random_alpha(rng);
      const Matrix p1 = build_projector(thin_svd(e), a).matrix();
      const Matrix p2 = build_projector(thin_svd(EmbeddingMatrix(c * e.data(), "ce")), a).matrix();
      const double diff = (p1 - p2).cwiseAbs().maxCoeff();
      if (diff > 1e-10) return "projector changed by " + sci(diff) + " under scale " + sci(c);
    }
    return {};
  });

  // editor
  run("editor.noop_idempotence", [&]() -> std::string {
    const Eigen::Index d = 16;
    WeightBundle b({{"k", detail::random_matrix(rng, 8, d)}, {"v", detail::random_matrix(rng, 5, d)}}, {"k", "v"});
    const ProjectionOperator eye(Matrix::Identity(d, d), Role::unlearn, Alpha(1));
    const auto once = edit_weights(b, eye).bundle;
    const auto twice = edit_weights(once, eye).bundle;
    for (std::size_t i = 0; i < b.entries().size(); ++i)
      if (once.entries()[i].matrix != twice.entries()[i].matrix) return "second identity edit changed '" + b.entries()[i].name + "'";
    return {};
  });

  run("editor.weight_embedding_equivalence", [&]() -> std::string {
    for (int t = 0; t < 500; ++t) {
      const auto d = detail::uniform(rng, 2, 64);
      const auto m = detail::uniform(rng, 1, 64);
      const EmbeddingMatrix ef = detail::random_embedding(rng, d, detail::uniform(rng, 1, std::min<Eigen::Index>(d, 6)), 6, "f");
      const Matrix p = erasure_operator(ef, nullptr, detail::random_alpha(rng)).matrix();
      const Matrix w = detail::random_matrix(rng, m, d);
      const Vector e = detail::random_matrix(rng, d, 1);
      const Matrix wp = w * p;
      const double err = (wp * e - w * (p * e)).norm();
      if (err > 1e-8 * w.norm() * e.norm()) return "case " + std::to_string(t) + " error " + sci(err);
    }
    return {};
  });

  run("editor.sequential_equals_stacked_orthogonal", [&]() -> std::string {
    for (int t = 0; t < 5; ++t) {
      const Eigen::Index d = 32, concepts = 3, k = 3;
      const Matrix q = cure::detail::orthonormal_columns(rng, d, concepts * k);
      ErasureJob job;
      job.alpha = Alpha::infinity();
      for (Eigen::Index c = 0; c < concepts; ++c) {
        Matrix e = q.middleCols(c * k, k) * detail::random_matrix(rng, k, 5);
        job.forget.emplace_back(std::move(e), "c" + std::to_string(c));
      }
      WeightBundle b({{"to_k", detail::random_matrix(rng, 12, d)}, {"to_v", detail::random_matrix(rng, 12, d)}},
                     {"to_k", "to_v"});
      job.mode = Mode::stacked;
      const auto stacked = run_job(job, b).bundle;
      job.mode = Mode::sequential;
      const auto seq = run_job(job, b).bundle;
      for (std::size_t i = 0; i < b.entries().size(); ++i) {
        const double diff = (stacked.entries()[i].matrix - seq.entries()[i].matrix).cwiseAbs().maxCoeff();
        if (diff > 1e-8) return "modes differ by " + sci(diff);
      }
    }
    return {};
  });

  run("editor.frozen_entries_untouched", [&]() -> std::string {
    const Eigen::Index d = 12;
    WeightBundle b({{"to_k", detail::random_matrix(rng, 6, d)}, {"frozen", detail::random_matrix(rng, 7, 3)}}, {"to_k"});
    const EmbeddingMatrix ef = detail::random_embedding(rng, d, 2, 4, "f");
    const auto out = edit_weights(b, erasure_operator(ef, nullptr, Alpha(2))).bundle;
    const Matrix& before = b.entries()[1].matrix;
    const Matrix& after = out.entries()[1].matrix;
    if (before.size() != after.size() ||
        std::memcmp(before.data(), after.data(), sizeof(double) * static_cast<std::size_t>(before.size())) != 0) {
      return "frozen tensor bytes changed";
    }
    return {};
  });

  // oracle
  run("oracle.tradeoff_direction", [&]() -> std::string {
    for (int t = 0; t < 10; ++t) {
      const auto pair = make_concepts(24, 4, 4, 1 + t % 3, rng());
      const auto rows = sweep(pair, default_alpha_grid());
      if (!non_increasing(rows, [](const ErasureMetrics& m) { return m.suppression_residual; }))
        return "suppression_residual increased along the alpha grid";
      if (!non_decreasing(rows, [](const ErasureMetrics& m) { return m.retention_error; }))
        return "retention_error decreased along the alpha grid";
    }
    return {};
  });

  run("oracle.shared_preservation", [&]() -> std::string {
    for (int t = 0; t < 10; ++t) {
      const auto pair = make_concepts(24, 5, 4, 1 + t % 4, rng());
      const auto m = measure(pair, Alpha::infinity());
      if (m.shared_error > 1e-8) return "shared_error " + sci(m.shared_error);
    }
    return {};
  });

  run("oracle.determinism", [&]() -> std::string {
    const std::uint64_t s = rng();
    const auto a = sweep(make_concepts(16, 4, 4, 2, s), default_alpha_grid());
    const auto b = sweep(make_concepts(16, 4, 4, 2, s), default_alpha_grid());
    if (metrics_csv(a) != metrics_csv(b)) return "same seed gave different metrics";
    return {};
  });

  // tensor-io
  run("io.byte_roundtrip", [&]() -> std::string {
    for (int t = 0; t < 40; ++t) {
      const auto rows = static_cast<std::size_t>(detail::uniform(rng, 1, 40));
      const auto cols = static_cast<std::size_t>(detail::uniform(rng, 1, 40));
      const npy::Dtype dtype = t % 2 == 0 ? npy::Dtype::f8 : npy::Dtype::f4;
      npy::Tensor tensor;
      tensor.dtype = dtype;
      tensor.shape = t % 3 == 0 ? std::vector<std::size_t>{rows} : std::vector<std::size_t>{rows, cols};
      tensor.data = detail::random_matrix(rng, static_cast<Eigen::Index>(rows), t % 3 == 0 ? 1 : static_cast<Eigen::Index>(cols));
      if (dtype == npy::Dtype::f4) tensor.data = tensor.data.cast<float>().cast<double>();
      const std::string bytes = npy::encode(tensor);
      if ((bytes.size() - tensor.data.size() * npy::item_size(dtype)) % npy::kAlign != 0) return "header not 64-byte aligned";
      if (npy::encode(npy::decode(bytes)) != bytes) return "re-encoding changed bytes";
    }
    return {};
  });

  run("io.no_silent_narrowing", [&]() -> std::string {
    const Matrix m = detail::random_matrix(rng, 4, 3);
    const npy::Tensor back = npy::decode(npy::encode(npy::Tensor{{4, 3}, npy::Dtype::f8, m}));
    if (back.dtype != npy::Dtype::f8 || back.data != m) return "float64 payload not preserved exactly";
    const npy::Tensor narrow = npy::decode(npy::encode(npy::Tensor{{4, 3}, npy::Dtype::f4, m}));
    if (narrow.data != m.cast<float>().cast<double>()) return "float32 payload not widened exactly";
    return {};
  });

  // cli
  run("cli.deterministic_outputs", [&]() -> std::string {
    const std::uint64_t s = rng();
    const auto rows = sweep(make_concepts(12, 3, 3, 1, s), default_alpha_grid());
    const auto again = sweep(make_concepts(12, 3, 3, 1, s), default_alpha_grid());
    if (metrics_csv(rows) != metrics_csv(again)) return "sweep CSV differs between identical runs";
    return {};
  });

  return results;
}

}  // namespace cure::verify
