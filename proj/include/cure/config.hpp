#pragma once

// JSON job files. The schema is strict: unknown keys, wrong types and
// missing required fields all raise SchemaError naming the offending path.
//
//   {
//     "forget":  ["concept.npy", {"path": "b.npy", "label": "b"}, {"data": [[...]], "label": "c"}],
//     "retain":  [...],                       optional
//     "alpha":   2 | "inf",
//     "mode":    "stacked" | "sequential",    optional, default stacked
//     "weights_in":  "bundle_dir",            optional until erase time
//     "manifest":    "file.manifest" | ["name", ...],  optional
//     "weights_out": "out_dir",
//     "report_out":  "report.json",
//     "out_dtype":   "<f8" | "<f4"            optional, default <f8
//   }
//
// Relative paths resolve against the config file's directory.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "cure/bundle.hpp"
#include "cure/editor.hpp"
#include "cure/npy.hpp"
#include "cure/oracle.hpp"

namespace cure {

using Json = nlohmann::json;

struct EmbeddingSource {
  std::filesystem::path path;  // empty when the matrix is inline
  std::string label;
  std::optional<Matrix> inline_data;
};

struct JobConfig {
  std::vector<EmbeddingSource> forget;
  std::optional<std::vector<EmbeddingSource>> retain;
  Alpha alpha{2.0};
  Mode mode = Mode::stacked;
  std::optional<std::filesystem::path> weights_in;
  std::variant<std::monostate, std::filesystem::path, std::vector<std::string>> manifest;
  std::optional<std::filesystem::path> weights_out;
  std::optional<std::filesystem::path> report_out;
  npy::Dtype out_dtype = npy::Dtype::f8;
};

namespace detail {

[[noreturn]] inline void schema(const std::string& where, const std::string& what) {
  fail(ErrorKind::SchemaError, where + ": " + what);
}

inline void only_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) schema(where.empty() ? key : where + "." + key, "unknown field");
  }
}

inline std::string string_at(const Json& v, const std::string& where) {
  if (!v.is_string()) schema(where, "expected a string");
  return v.get<std::string>();
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline void require_exists(const std::filesystem::path& p, const std::string& where) {
  if (!std::filesystem::exists(p)) fail(ErrorKind::IoError, where + ": '" + p.string() + "' does not exist");
}

inline Matrix inline_matrix(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) schema(where, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  Eigen::Index cols = -1;
  Matrix m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = v[static_cast<std::size_t>(i)];
    const std::string rw = where + "[" + std::to_string(i) + "]";
    if (!row.is_array() || row.empty()) schema(rw, "expected a non-empty array of numbers");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      schema(rw, "ragged row");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      const Json& x = row[static_cast<std::size_t>(j)];
      if (!x.is_number()) schema(rw + "[" + std::to_string(j) + "]", "expected a number");
      m(i, j) = x.get<double>();
    }
  }
  return m;
}

inline std::vector<EmbeddingSource> sources(const Json& v, const std::string& where,
                                            const std::filesystem::path& base) {
  if (!v.is_array() || v.empty()) schema(where, "expected a non-empty list");
  std::vector<EmbeddingSource> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    const Json& item = v[i];
    EmbeddingSource src;
    if (item.is_string()) {
      src.path = resolve(base, item.get<std::string>());
    } else if (item.is_object()) {
      only_keys(item, w, {"path", "data", "label"});
      const bool has_path = item.contains("path");
      const bool has_data = item.contains("data");
      if (has_path == has_data) schema(w, "exactly one of 'path' or 'data' is required");
      if (has_path) src.path = resolve(base, string_at(item["path"], w + ".path"));
      if (has_data) src.inline_data = inline_matrix(item["data"], w + ".data");
      if (item.contains("label")) src.label = string_at(item["label"], w + ".label");
    } else {
      schema(w, "expected a path string or an object");
    }
    if (!src.inline_data) {
      require_exists(src.path, w);
      if (src.label.empty()) src.label = src.path.stem().string();
    } else if (src.label.empty()) {
      src.label = where + std::to_string(i);
    }
    out.push_back(std::move(src));
  }
  return out;
}

inline Alpha alpha_at(const Json& v, const std::string& where) {
  try {
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s != "inf") schema(where, "string value must be \"inf\"");
      return Alpha::infinity();
    }
    if (v.is_number()) return Alpha(v.get<double>());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SchemaError) throw;
    schema(where, e.detail());
  }
  schema(where, "expected a number >= 1 or \"inf\"");
}

inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::SchemaError, origin + ": invalid JSON: " + e.what());
  }
}

}  // namespace detail

inline JobConfig parse_job(const Json& j, const std::filesystem::path& base_dir = ".") {
  using namespace detail;
  if (!j.is_object()) schema("$", "job config must be a JSON object");
  only_keys(j, "", {"forget", "retain", "alpha", "mode", "weights_in", "manifest", "weights_out", "report_out",
                    "out_dtype"});
  if (!j.contains("forget")) schema("forget", "required field missing");
  if (!j.contains("alpha")) schema("alpha", "required field missing");

  JobConfig cfg;
  cfg.forget = sources(j["forget"], "forget", base_dir);
  if (j.contains("retain") && !j["retain"].is_null()) cfg.retain = sources(j["retain"], "retain", base_dir);
  cfg.alpha = alpha_at(j["alpha"], "alpha");
  if (j.contains("mode")) {
    try {
      cfg.mode = parse_mode(string_at(j["mode"], "mode"));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ModeError) schema("mode", e.detail());
      throw;
    }
  }
  if (j.contains("weights_in")) {
    cfg.weights_in = resolve(base_dir, string_at(j["weights_in"], "weights_in"));
    require_exists(*cfg.weights_in, "weights_in");
  }
  if (j.contains("manifest")) {
    const Json& m = j["manifest"];
    if (m.is_string()) {
      auto p = resolve(base_dir, m.get<std::string>());
      require_exists(p, "manifest");
      cfg.manifest = p;
    } else if (m.is_array()) {
      std::vector<std::string> names;
      for (std::size_t i = 0; i < m.size(); ++i) names.push_back(string_at(m[i], "manifest[" + std::to_string(i) + "]"));
      if (names.empty()) schema("manifest", "inline manifest must list at least one tensor");
      cfg.manifest = std::move(names);
    } else {
      schema("manifest", "expected a path or a list of tensor names");
    }
  }
  if (j.contains("weights_out")) cfg.weights_out = resolve(base_dir, string_at(j["weights_out"], "weights_out"));
  if (j.contains("report_out")) cfg.report_out = resolve(base_dir, string_at(j["report_out"], "report_out"));
  if (j.contains("out_dtype")) {
    try {
      cfg.out_dtype = npy::parse_dtype(string_at(j["out_dtype"], "out_dtype"));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::SchemaError) throw;
      schema("out_dtype", e.detail());
    }
  }
  return cfg;
}

inline JobConfig load_job(const std::filesystem::path& path) {
  const Json j = detail::parse_json(npy::read_file(path), path.string());
  return parse_job(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

inline EmbeddingMatrix load_embedding(const EmbeddingSource& src) {
  if (src.inline_data) return EmbeddingMatrix(*src.inline_data, src.label);
  return npy::read_embedding(src.path, src.label);
}

/// Loads every embedding the config names into an in-memory job.
inline ErasureJob materialize(const JobConfig& cfg) {
  ErasureJob job;
  job.alpha = cfg.alpha;
  job.mode = cfg.mode;
  for (const auto& s : cfg.forget) job.forget.push_back(load_embedding(s));
  if (cfg.retain) {
    job.retain.emplace();
    for (const auto& s : *cfg.retain) job.retain->push_back(load_embedding(s));
  }
  return job;
}

/// Reads weights_in and applies the config's manifest, if any.
inline WeightBundle load_target_bundle(const JobConfig& cfg) {
  if (!cfg.weights_in) fail(ErrorKind::SchemaError, "weights_in: required for erase");
  WeightBundle bundle = read_bundle(*cfg.weights_in);
  if (const auto* p = std::get_if<std::filesystem::path>(&cfg.manifest)) return apply_manifest(bundle, read_manifest(*p));
  if (const auto* names = std::get_if<std::vector<std::string>>(&cfg.manifest)) return apply_editable(bundle, *names);
  return bundle;
}

/// Harness seed: CURE_SEED when set to an unsigned integer, otherwise 42.
inline std::uint64_t harness_seed() {
  if (const char* env = std::getenv("CURE_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != nullptr && *end == '\0') return v;
    fail(ErrorKind::SchemaError, "CURE_SEED: expected an unsigned integer, got '" + std::string(env) + "'");
  }
  return 42;
}

/// Synthetic pair description for sweeps:
///   {"d": 16, "k_f": 4, "k_r": 4, "overlap": 2, "seed": 7, "decay": 0.5, "extra_tokens": 2}
/// seed, decay and extra_tokens are optional.
struct SweepConfig {
  Eigen::Index d = 0;
  Eigen::Index k_f = 0;
  Eigen::Index k_r = 0;
  Eigen::Index overlap = 0;
  std::uint64_t seed = 42;
  ConceptOptions options;

  SyntheticConceptPair make_pair() const { return make_concepts(d, k_f, k_r, overlap, seed, options); }
};

inline SweepConfig parse_sweep(const Json& j) {
  using namespace detail;
  if (!j.is_object()) schema("$", "sweep config must be a JSON object");
  only_keys(j, "", {"d", "k_f", "k_r", "overlap", "seed", "decay", "extra_tokens"});
  auto integer = [&](const char* key, bool required, std::int64_t fallback) -> std::int64_t {
    if (!j.contains(key)) {
      if (required) schema(key, "required field missing");
      return fallback;
    }
    if (!j[key].is_number_integer() || j[key].get<std::int64_t>() < 0) schema(key, "expected a non-negative integer");
    return j[key].get<std::int64_t>();
  };
  SweepConfig cfg;
  cfg.d = integer("d", true, 0);
  cfg.k_f = integer("k_f", true, 0);
  cfg.k_r = integer("k_r", true, 0);
  cfg.overlap = integer("overlap", true, 0);
  cfg.seed = j.contains("seed") ? static_cast<std::uint64_t>(integer("seed", false, 0)) : harness_seed();
  cfg.options.extra_tokens = integer("extra_tokens", false, cfg.options.extra_tokens);
  if (j.contains("decay")) {
    if (!j["decay"].is_number()) schema("decay", "expected a number");
    cfg.options.decay = j["decay"].get<double>();
  }
  return cfg;
}

inline SweepConfig load_sweep(const std::filesystem::path& path) {
  return parse_sweep(detail::parse_json(npy::read_file(path), path.string()));
}

}  // namespace cure
