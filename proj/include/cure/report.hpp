#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cure/config.hpp"
#include "cure/editor.hpp"
#include "cure/oracle.hpp"

namespace cure {

/// Shortest decimal that round-trips; "inf"/"nan" for non-finite values.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

inline constexpr const char* kMetricsHeader = "alpha,suppression_residual,retention_error,shared_error";

inline std::string metrics_csv(const std::vector<ErasureMetrics>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows) {
    out += r.alpha.to_string() + "," + format_number(r.suppression_residual) + "," + format_number(r.retention_error) +
           "," + format_number(r.shared_error) + "\n";
  }
  return out;
}

inline Json to_json(const JobReport& report) {
  Json concepts = Json::array();
  for (const auto& c : report.concepts) {
    concepts.push_back({{"label", c.label},
                        {"role", std::string(to_string(c.role))},
                        {"rank", c.rank},
                        {"sigma", std::vector<double>(c.sigma.data(), c.sigma.data() + c.sigma.size())}});
  }
  Json steps = Json::array();
  for (const auto& s : report.steps) {
    steps.push_back({{"forget_labels", s.forget_labels}, {"forget_rank", s.forget_rank}, {"retain_rank", s.retain_rank}});
  }
  return Json{{"alpha", report.alpha.to_string()},
              {"mode", std::string(to_string(report.mode))},
              {"concepts", concepts},
              {"steps", steps},
              {"edited_tensors", report.edit.edited},
              {"edited_params", report.edit.edited_params},
              {"total_params", report.edit.total_params},
              {"edited_fraction", report.edit.fraction},
              {"elapsed_seconds", report.elapsed_seconds}};
}

/// JSON summary of an erase job, pretty-printed with a trailing newline.
inline void emit_report(const JobReport& report, const std::filesystem::path& path) {
  npy::write_file(path, to_json(report).dump(2) + "\n");
}

/// Sweep metrics as CSV.
inline void emit_report(const std::vector<ErasureMetrics>& rows, const std::filesystem::path& path) {
  npy::write_file(path, metrics_csv(rows));
}

struct SpectrumRow {
  Eigen::Index index;  // 1-based
  double sigma;
  double r;
  double f;
  double g;
};

/// Per-mode table behind the expansion-function plot. For alpha = inf the g
/// column holds the limit of the Tikhonov filter, 1 for any positive energy.
inline std::vector<SpectrumRow> spectrum_table(const Vector& sigma, const Alpha& alpha) {
  const Vector r = spectral_energies(sigma);
  std::vector<SpectrumRow> rows;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double ri = std::min(r[i], 1.0);
    const double g = alpha.is_infinite() ? (ri > 0.0 ? 1.0 : 0.0) : tikhonov_g(ri, alpha);
    rows.push_back(SpectrumRow{i + 1, sigma[i], r[i], expansion_f(ri, alpha), g});
  }
  return rows;
}

inline std::string spectrum_csv(const std::vector<SpectrumRow>& rows) {
  std::string out = "i,sigma,r,f,g\n";
  for (const auto& row : rows) {
    out += std::to_string(row.index) + "," + format_number(row.sigma) + "," + format_number(row.r) + "," +
           format_number(row.f) + "," + format_number(row.g) + "\n";
  }
  return out;
}

}  // namespace cure
