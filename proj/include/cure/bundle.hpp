#pragma once

// Weight bundles on disk: a directory holding one NPY file per tensor plus a
// plain-text manifest.
//
//   # comment
//   total_param_count 859520964
//   tensor <name> <rows> <cols> editable|frozen
//
// Tensor files are named "<name>.npy". The same manifest format is used for
// stand-alone editable-set fixtures such as the SD-v1.4 cross-attention list.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cure/editor.hpp"
#include "cure/npy.hpp"

namespace cure {

struct ManifestEntry {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool editable = true;
};

struct Manifest {
  std::int64_t total_param_count = 0;
  std::vector<ManifestEntry> tensors;

  std::set<std::string> editable_names() const {
    std::set<std::string> names;
    for (const auto& t : tensors)
      if (t.editable) names.insert(t.name);
    return names;
  }

  std::int64_t editable_param_count() const {
    std::int64_t n = 0;
    for (const auto& t : tensors)
      if (t.editable) n += static_cast<std::int64_t>(t.rows) * t.cols;
    return n;
  }

  double editable_fraction() const {
    return total_param_count > 0 ? static_cast<double>(editable_param_count()) / static_cast<double>(total_param_count)
                                 : 0.0;
  }
};

inline constexpr const char* kManifestFile = "manifest.txt";

inline Manifest parse_manifest(const std::string& text, const std::string& origin = "manifest") {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string keyword;
    if (!(fields >> keyword)) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    std::string extra;
    if (keyword == "total_param_count") {
      if (!(fields >> m.total_param_count) || m.total_param_count < 0 || (fields >> extra)) {
        fail(ErrorKind::SchemaError, where + ": expected 'total_param_count <non-negative integer>'");
      }
    } else if (keyword == "tensor") {
      ManifestEntry e;
      std::string flag;
      if (!(fields >> e.name >> e.rows >> e.cols >> flag) || e.rows < 1 || e.cols < 1 || (fields >> extra)) {
        fail(ErrorKind::SchemaError, where + ": expected 'tensor <name> <rows> <cols> editable|frozen'");
      }
      if (flag != "editable" && flag != "frozen") fail(ErrorKind::SchemaError, where + ": unknown flag '" + flag + "'");
      e.editable = flag == "editable";
      if (!seen.insert(e.name).second) fail(ErrorKind::SchemaError, where + ": duplicate tensor '" + e.name + "'");
      m.tensors.push_back(std::move(e));
    } else {
      fail(ErrorKind::SchemaError, where + ": unknown keyword '" + keyword + "'");
    }
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(npy::read_file(path), path.string());
}

inline std::string format_manifest(const Manifest& m) {
  std::string out = "total_param_count " + std::to_string(m.total_param_count) + "\n";
  for (const auto& t : m.tensors) {
    out += "tensor " + t.name + " " + std::to_string(t.rows) + " " + std::to_string(t.cols) +
           (t.editable ? " editable\n" : " frozen\n");
  }
  return out;
}

inline Manifest manifest_of(const WeightBundle& bundle) {
  Manifest m;
  m.total_param_count = bundle.declared_total();
  for (const auto& e : bundle.entries()) {
    m.tensors.push_back(ManifestEntry{e.name, e.matrix.rows(), e.matrix.cols(), bundle.is_editable(e.name)});
  }
  return m;
}

/// Replaces the bundle's editable set (and total count, when the manifest
/// declares one) with the manifest's. Shapes of the listed tensors must agree.
inline WeightBundle apply_manifest(const WeightBundle& bundle, const Manifest& manifest) {
  for (const auto& t : manifest.tensors) {
    const WeightEntry* e = bundle.find(t.name);
    if (e == nullptr) fail(ErrorKind::SchemaError, "manifest names tensor '" + t.name + "' missing from the bundle");
    if (e->matrix.rows() != t.rows || e->matrix.cols() != t.cols) {
      fail(ErrorKind::DimensionMismatch, "tensor '" + t.name + "' is " + std::to_string(e->matrix.rows()) + "x" +
                                             std::to_string(e->matrix.cols()) + ", manifest says " +
                                             std::to_string(t.rows) + "x" + std::to_string(t.cols));
    }
  }
  const auto total = manifest.total_param_count > 0 ? manifest.total_param_count : bundle.declared_total();
  return WeightBundle(bundle.entries(), manifest.editable_names(), total);
}

/// Same, from a bare list of editable names.
inline WeightBundle apply_editable(const WeightBundle& bundle, const std::vector<std::string>& names) {
  return WeightBundle(bundle.entries(), std::set<std::string>(names.begin(), names.end()), bundle.declared_total());
}

inline WeightBundle read_bundle(const std::filesystem::path& dir) {
  const Manifest m = read_manifest(dir / kManifestFile);
  std::vector<WeightEntry> entries;
  entries.reserve(m.tensors.size());
  for (const auto& t : m.tensors) {
    npy::Tensor tensor = npy::read_tensor(dir / (t.name + ".npy"));
    if (tensor.data.rows() != t.rows || tensor.data.cols() != t.cols) {
      fail(ErrorKind::DimensionMismatch, "tensor file for '" + t.name + "' does not match its manifest shape");
    }
    entries.push_back(WeightEntry{t.name, std::move(tensor.data)});
  }
  return WeightBundle(std::move(entries), m.editable_names(), m.total_param_count);
}

inline void write_bundle(const std::filesystem::path& dir, const WeightBundle& bundle, npy::Dtype dtype = npy::Dtype::f8) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& e : bundle.entries()) npy::write_tensor(dir / (e.name + ".npy"), e.matrix, dtype);
  npy::write_file(dir / kManifestFile, format_manifest(manifest_of(bundle)));
}

/// Random weights with the manifest's shapes (entries scaled by 1/sqrt(cols)).
inline WeightBundle synthesize_bundle(const Manifest& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<WeightEntry> entries;
  entries.reserve(m.tensors.size());
  for (const auto& t : m.tensors) {
    Matrix w(t.rows, t.cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(t.cols));
    for (Eigen::Index j = 0; j < t.cols; ++j)
      for (Eigen::Index i = 0; i < t.rows; ++i) w(i, j) = scale * normal(rng);
    entries.push_back(WeightEntry{t.name, std::move(w)});
  }
  return WeightBundle(std::move(entries), m.editable_names(), m.total_param_count);
}

}  // namespace cure
