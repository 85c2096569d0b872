// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cure/cure.hpp"

namespace fs = std::filesystem;
using namespace cure;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool passed;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, const std::function<Outcome()>& body) {
  Outcome o{false, "exception"};
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  std::printf("%s %s: %s\n", o.passed ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
  if (!o.passed) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

fs::path fixture(const std::string& rel) { return fs::path(CURE_FIXTURE_DIR) / rel; }

Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Outcome expansion_limits() {
  const auto t0 = Clock::now();
  double err1 = 0.0, errinf = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double r = i / 999.0;
    err1 = std::max(err1, std::abs(expansion_f(r, Alpha(1)) - r));
    errinf = std::max(errinf, std::abs(expansion_f(r, Alpha::infinity()) - (r > 0.0 ? 1.0 : 0.0)));
  }
  const double t = seconds_since(t0);
  return {err1 <= 1e-12 && errinf <= 1e-12 && t < 1.0,
          fmt("max |f(r;1)-r| %.2e, max |f(r;inf)-1{r>0}| %.2e, %.3f s", err1, errinf, t)};
}

Outcome tikhonov_correspondence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(harness_seed());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  bool dominated = true;
  for (int s = 0; s < 100; ++s) {
    const int n = 1 + static_cast<int>(rng() % 12);
    Vector sigma(n);
    for (int i = 0; i < n; ++i) sigma[i] = std::exp(6.0 * unit(rng) - 3.0);
    std::sort(sigma.data(), sigma.data() + n, std::greater<>());
    const Vector r = spectral_energies(sigma);
    const double total = sigma.squaredNorm();
    for (double a : {1.0, 2.0, 5.0, 100.0}) {
      const Alpha alpha(a);
      const double lambda = total / a;
      for (int i = 0; i < n; ++i) {
        const double g = tikhonov_g(r[i], alpha);
        const double classical = sigma[i] * sigma[i] / (sigma[i] * sigma[i] + lambda);
        worst = std::max(worst, std::abs(g - classical));
        dominated = dominated && expansion_f(r[i], alpha) >= g;
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && dominated && t < 1.0,
          fmt("max |g - s^2/(s^2+lambda)| %.2e, %.3f s", worst, t) + (dominated ? ", f >= g everywhere" : ", f < g somewhere")};
}

Outcome disjoint_exact() {
  const auto t0 = Clock::now();
  double supp = 0.0, ret = 0.0;
  const std::uint64_t base = harness_seed();
  for (std::uint64_t s = 0; s < 50; ++s) {
    std::mt19937_64 rng(base + s);
    const Eigen::Index kf = 1 + static_cast<Eigen::Index>(rng() % 6);
    const Eigen::Index kr = 1 + static_cast<Eigen::Index>(rng() % 6);
    const Eigen::Index d = kf + kr + static_cast<Eigen::Index>(rng() % 40);
    const auto m = measure(make_concepts(d, kf, kr, 0, base + s), Alpha::infinity());
    supp = std::max(supp, m.suppression_residual);
    ret = std::max(ret, m.retention_error);
  }
  const double t = seconds_since(t0);
  return {supp <= 1e-10 && ret <= 1e-10 && t < 5.0,
          fmt("50 pairs, max suppression %.2e, max retention %.2e, %.3f s", supp, ret, t)};
}

Outcome shared_preservation() {
  double worst = 0.0;
  int cases = 0;
  const std::uint64_t base = harness_seed();
  for (Eigen::Index k = 1; k <= 5; ++k) {
    for (Eigen::Index m = 1; m <= k; ++m) {
      const auto metrics = measure(make_concepts(32, k, k + 1, m, base + 100 * k + m), Alpha::infinity());
      worst = std::max(worst, metrics.shared_error);
      ++cases;
    }
  }
  return {worst <= 1e-8, fmt("%.0f overlap cases, max shared_error %.2e", cases, worst)};
}

Outcome ablation_trend() {
  int cases = 0, good = 0;
  const std::uint64_t base = harness_seed();
  for (Eigen::Index d : {16, 32, 64}) {
    for (Eigen::Index k = 2; k <= 5; ++k) {
      for (Eigen::Index m = 1; m < k; ++m) {
        const auto rows = sweep(make_concepts(d, k, k, m, base + static_cast<std::uint64_t>(d * 100 + k * 10 + m)),
                                default_alpha_grid());
        const bool down = non_increasing(rows, [](const ErasureMetrics& r) { return r.suppression_residual; });
        const bool up = non_decreasing(rows, [](const ErasureMetrics& r) { return r.retention_error; });
        ++cases;
        if (down && up) ++good;
      }
    }
  }
  return {good == cases, fmt("%.0f/%.0f partial-overlap sweeps monotone on the 7-point grid", good, cases)};
}

Outcome weight_embedding_equivalence() {
  std::mt19937_64 rng(harness_seed());
  const auto grid = default_alpha_grid();
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 95);
    const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng() % 64);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng() % std::min<Eigen::Index>(d, 6));
    const EmbeddingMatrix forget(gaussian(rng, d, k) * gaussian(rng, k, k + 2), "f");
    const EmbeddingMatrix retain(gaussian(rng, d, 1) * gaussian(rng, 1, 3), "r");
    const auto p = erasure_operator(forget, t % 2 ? &retain : nullptr, grid[rng() % grid.size()]);
    const Matrix w = gaussian(rng, rows, d);
    const Matrix wp = edit_weights(WeightBundle({{"w", w}}, {"w"}), p).bundle.entries()[0].matrix;
    const Vector e = gaussian(rng, d, 1);
    const Vector rhs = w * (p.matrix() * e);
    worst = std::max(worst, (wp * e - rhs).norm() / std::max(rhs.norm(), w.norm() * e.norm() * 1e-300));
  }
  return {worst <= 1e-8, fmt("500 triples, max relative gap %.2e", worst)};
}

Outcome sd_efficiency() {
  const Manifest manifest = read_manifest(fixture("sd14_cross_attention.manifest"));
  const WeightBundle bundle = apply_manifest(synthesize_bundle(manifest, harness_seed()), manifest);
  ErasureJob job;
  job.forget.push_back(npy::read_embedding(fixture("embeddings/concept_768x6.npy")));
  job.retain = std::vector<EmbeddingMatrix>{npy::read_embedding(fixture("embeddings/retain_768x5.npy"))};
  const auto t0 = Clock::now();
  const JobResult result = run_job(job, bundle);
  const double t = seconds_since(t0);
  const double pct = 100.0 * result.report.edit.fraction;
  const bool ok = result.report.edit.edited.size() == 32 && t < 2.0 && std::abs(pct - 2.23) <= 0.1;
  return {ok, fmt("%.0f matrices edited in %.3f s, edited fraction %.4f%%", static_cast<double>(result.report.edit.edited.size()), t, pct)};
}

Outcome npy_io() {
  int roundtrips = 0;
  std::string bad;
  for (const auto& entry : fs::directory_iterator(fixture("embeddings"))) {
    if (entry.path().extension() != ".npy") continue;
    const std::string bytes = npy::read_file(entry.path());
    if (npy::encode(npy::decode(bytes)) != bytes) bad += " " + entry.path().filename().string();
    ++roundtrips;
  }
  for (const auto& entry : fs::directory_iterator(fixture("bundles/tiny768"))) {
    if (entry.path().extension() != ".npy") continue;
    const std::string bytes = npy::read_file(entry.path());
    if (npy::encode(npy::decode(bytes)) != bytes) bad += " " + entry.path().filename().string();
    ++roundtrips;
  }
  const std::vector<std::pair<std::string, ErrorKind>> malformed = {
      {"bad_magic", ErrorKind::BadMagic},           {"version2", ErrorKind::BadMagic},
      {"big_endian", ErrorKind::UnsupportedDtype},  {"int32", ErrorKind::UnsupportedDtype},
      {"fortran_order", ErrorKind::UnsupportedLayout}, {"rank3", ErrorKind::UnsupportedLayout},
      {"truncated", ErrorKind::TruncatedPayload},   {"extra_bytes", ErrorKind::TruncatedPayload},
  };
  int named = 0;
  for (const auto& [name, kind] : malformed) {
    try {
      npy::read_tensor(fixture("malformed/" + name + ".npy"));
      bad += " " + name + "(accepted)";
    } catch (const Error& e) {
      if (e.kind() == kind) {
        ++named;
      } else {
        bad += " " + name + "(" + std::string(to_string(e.kind())) + ")";
      }
    }
  }
  std::string detail = fmt("%.0f byte-identical round-trips, %.0f/8 malformed files raise their named error",
                           roundtrips, named);
  if (!bad.empty()) detail += "; problems:" + bad;
  return {bad.empty() && roundtrips > 0, detail};
}

Outcome many_concepts() {
  std::mt19937_64 rng(harness_seed());
  const Manifest manifest = read_manifest(fixture("sd14_cross_attention.manifest"));
  const WeightBundle bundle = apply_manifest(synthesize_bundle(manifest, harness_seed()), manifest);

  ErasureJob job;
  for (int c = 0; c < 100; ++c) job.forget.emplace_back(gaussian(rng, 768, 2) * gaussian(rng, 2, 4), "concept_" + std::to_string(c));
  job.retain = std::vector<EmbeddingMatrix>{EmbeddingMatrix(gaussian(rng, 768, 5), "retain")};
  const auto t0 = Clock::now();
  const JobResult big = run_job(job, bundle);
  const double t = seconds_since(t0);

  ErasureJob single;
  single.forget.push_back(npy::read_embedding(fixture("embeddings/concept_768x6.npy")));
  single.retain = std::vector<EmbeddingMatrix>{npy::read_embedding(fixture("embeddings/retain_768x5.npy"))};
  const JobResult stacked = run_job(single, bundle);
  single.mode = Mode::sequential;
  const JobResult sequential = run_job(single, bundle);
  double gap = 0.0;
  for (std::size_t i = 0; i < stacked.bundle.entries().size(); ++i) {
    gap = std::max(gap, (stacked.bundle.entries()[i].matrix - sequential.bundle.entries()[i].matrix).cwiseAbs().maxCoeff());
  }
  const bool ok = big.report.steps.size() == 1 && big.report.steps[0].forget_labels.size() == 100 && t < 30.0 &&
                  gap <= 1e-10;
  return {ok, fmt("100-concept stacked job %.3f s (forget rank %.0f); single-concept stacked vs sequential max gap %.2e",
                  t, static_cast<double>(big.report.steps[0].forget_rank), gap)};
}

}  // namespace

int main() {
  std::printf("seed %llu\n", static_cast<unsigned long long>(harness_seed()));
  criterion("expansion_limits", expansion_limits);
  criterion("tikhonov_correspondence", tikhonov_correspondence);
  criterion("disjoint_exact_erasure", disjoint_exact);
  criterion("shared_preservation", shared_preservation);
  criterion("alpha_ablation_trend", ablation_trend);
  criterion("weight_embedding_equivalence", weight_embedding_equivalence);
  criterion("sd_manifest_efficiency", sd_efficiency);
  criterion("npy_io", npy_io);
  criterion("many_concepts_and_modes", many_concepts);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
