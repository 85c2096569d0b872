#pragma once

// Weight surgery: right-multiply the cross-attention key/value projections by
// P_unlearn so every future text embedding is projected implicitly.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cure/projector.hpp"

namespace cure {

struct WeightEntry {
  std::string name;
  Matrix matrix;
};

/// Named weight matrices plus the subset flagged editable. total_param_count
/// is the size of the whole model the bundle was cut from; zero means "just
/// this bundle".
class WeightBundle {
 public:
  WeightBundle() = default;

  WeightBundle(std::vector<WeightEntry> entries, std::set<std::string> editable, std::int64_t total_param_count = 0)
      : entries_(std::move(entries)), editable_(std::move(editable)), total_(total_param_count) {
    std::unordered_set<std::string> seen;
    for (const auto& entry : entries_) {
      if (!seen.insert(entry.name).second) fail(ErrorKind::SchemaError, "duplicate tensor name '" + entry.name + "'");
    }
    for (const auto& name : editable_) {
      if (!seen.count(name)) fail(ErrorKind::SchemaError, "manifest names unknown tensor '" + name + "'");
    }
    if (total_ < 0) fail(ErrorKind::SchemaError, "total_param_count must be non-negative");
  }

  const std::vector<WeightEntry>& entries() const noexcept { return entries_; }
  const std::set<std::string>& editable() const noexcept { return editable_; }
  bool is_editable(const std::string& name) const { return editable_.count(name) != 0; }

  const WeightEntry* find(std::string_view name) const {
    auto it = std::find_if(entries_.begin(), entries_.end(), [&](const WeightEntry& e) { return e.name == name; });
    return it == entries_.end() ? nullptr : &*it;
  }

  std::int64_t bundle_param_count() const {
    std::int64_t n = 0;
    for (const auto& entry : entries_) n += static_cast<std::int64_t>(entry.matrix.size());
    return n;
  }

  std::int64_t editable_param_count() const {
    std::int64_t n = 0;
    for (const auto& entry : entries_) {
      if (is_editable(entry.name)) n += static_cast<std::int64_t>(entry.matrix.size());
    }
    return n;
  }

  std::int64_t total_param_count() const { return total_ > 0 ? total_ : bundle_param_count(); }
  std::int64_t declared_total() const noexcept { return total_; }

 private:
  std::vector<WeightEntry> entries_;
  std::set<std::string> editable_;
  std::int64_t total_ = 0;
};

struct EditReport {
  std::vector<std::string> edited;
  std::int64_t edited_params = 0;
  std::int64_t total_params = 0;
  double fraction = 0.0;
};

struct EditResult {
  WeightBundle bundle;
  EditReport report;
};

/// Replaces every editable W by W * P_unlearn. Other entries are copied
/// untouched. Entries are processed on up to `threads` workers (0 picks the
/// hardware concurrency); output order always follows the input bundle.
inline EditResult edit_weights(const WeightBundle& bundle, const ProjectionOperator& unlearn, unsigned threads = 0) {
  if (unlearn.role() != Role::unlearn) {
    fail(ErrorKind::RoleError, "edit_weights needs an unlearn operator, got " + std::string(to_string(unlearn.role())));
  }
  if (bundle.editable().empty()) fail(ErrorKind::EmptyManifest, "no tensor in the bundle is flagged editable");

  const auto& entries = bundle.entries();
  std::vector<std::size_t> jobs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!bundle.is_editable(entries[i].name)) continue;
    if (entries[i].matrix.cols() != unlearn.dim()) {
      fail(ErrorKind::DimensionMismatch, "tensor '" + entries[i].name + "' has " +
                                             std::to_string(entries[i].matrix.cols()) + " columns, operator is " +
                                             std::to_string(unlearn.dim()) + "x" + std::to_string(unlearn.dim()));
    }
    jobs.push_back(i);
  }

  std::vector<WeightEntry> out;
  out.reserve(entries.size());
  for (const auto& entry : entries) {
    out.push_back(bundle.is_editable(entry.name) ? WeightEntry{entry.name, Matrix()} : entry);
  }
  const Matrix& p = unlearn.matrix();
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      out[jobs[j]].matrix.noalias() = entries[jobs[j]].matrix * p;
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  EditReport report;
  for (std::size_t i : jobs) report.edited.push_back(entries[i].name);
  report.edited_params = bundle.editable_param_count();
  report.total_params = bundle.total_param_count();
  report.fraction = report.total_params > 0
                        ? static_cast<double>(report.edited_params) / static_cast<double>(report.total_params)
                        : 0.0;
  return EditResult{WeightBundle(std::move(out), bundle.editable(), bundle.declared_total()), std::move(report)};
}

enum class Mode { stacked, sequential };

constexpr std::string_view to_string(Mode mode) noexcept {
  return mode == Mode::stacked ? "stacked" : "sequential";
}

inline Mode parse_mode(std::string_view text) {
  if (text == "stacked") return Mode::stacked;
  if (text == "sequential") return Mode::sequential;
  fail(ErrorKind::ModeError, "unknown mode '" + std::string(text) + "' (expected stacked or sequential)");
}

struct ErasureJob {
  std::vector<EmbeddingMatrix> forget;
  std::optional<std::vector<EmbeddingMatrix>> retain;
  Alpha alpha{2.0};
  Mode mode = Mode::stacked;
};

struct ConceptSpectrum {
  std::string label;
  Role role;
  Eigen::Index rank;
  Vector sigma;
};

/// One P_unlearn application: all concepts at once in stacked mode, one per
/// forget concept in sequential mode.
struct EditStep {
  std::vector<std::string> forget_labels;
  Eigen::Index forget_rank = 0;
  Eigen::Index retain_rank = 0;
};

struct JobReport {
  Alpha alpha{2.0};
  Mode mode = Mode::stacked;
  std::vector<ConceptSpectrum> concepts;
  std::vector<EditStep> steps;
  EditReport edit;
  double elapsed_seconds = 0.0;
};

struct JobResult {
  WeightBundle bundle;
  JobReport report;
};

/// Column-wise concatenation of several embedding sets of equal dimension.
inline EmbeddingMatrix stack_embeddings(const std::vector<EmbeddingMatrix>& parts) {
  if (parts.empty()) fail(ErrorKind::SchemaError, "cannot stack an empty list of embeddings");
  const auto d = parts.front().dim();
  Eigen::Index n = 0;
  std::string label;
  for (const auto& part : parts) {
    if (part.dim() != d) {
      fail(ErrorKind::DimensionMismatch, "embedding '" + part.label() + "' has dimension " +
                                             std::to_string(part.dim()) + ", expected " + std::to_string(d));
    }
    n += part.tokens();
    label += (label.empty() ? "" : "+") + part.label();
  }
  Matrix data(d, n);
  Eigen::Index col = 0;
  for (const auto& part : parts) {
    data.middleCols(col, part.tokens()) = part.data();
    col += part.tokens();
  }
  return EmbeddingMatrix(std::move(data), std::move(label));
}

inline JobResult run_job(const ErasureJob& job, const WeightBundle& bundle, unsigned threads = 0) {
  if (job.forget.empty()) fail(ErrorKind::SchemaError, "job has no forget concepts");
  if (job.retain && job.retain->empty()) fail(ErrorKind::SchemaError, "retain list is present but empty");

  const auto start = std::chrono::steady_clock::now();
  JobReport report;
  report.alpha = job.alpha;
  report.mode = job.mode;

  const auto d = job.forget.front().dim();
  auto record = [&](const EmbeddingMatrix& e, Role role) {
    if (e.dim() != d) {
      fail(ErrorKind::DimensionMismatch, "embedding '" + e.label() + "' has dimension " + std::to_string(e.dim()) +
                                             ", expected " + std::to_string(d));
    }
    SvdFactors f = thin_svd(e);
    report.concepts.push_back(ConceptSpectrum{e.label(), role, f.rank(), f.sigma()});
  };
  for (const auto& e : job.forget) record(e, Role::forget);
  if (job.retain) {
    for (const auto& e : *job.retain) record(e, Role::retain);
  }

  std::optional<ProjectionOperator> retain_op;
  Eigen::Index retain_rank = 0;
  if (job.retain) {
    SvdFactors rf = thin_svd(stack_embeddings(*job.retain));
    retain_rank = rf.rank();
    std::vector<std::string> labels;
    for (const auto& e : *job.retain) labels.push_back(e.label());
    retain_op = build_projector(rf, job.alpha, Role::retain, std::move(labels));
  }

  auto apply = [&](const std::vector<const EmbeddingMatrix*>& group, const WeightBundle& current) {
    std::vector<EmbeddingMatrix> parts;
    std::vector<std::string> labels;
    for (const auto* e : group) {
      parts.push_back(*e);
      labels.push_back(e->label());
    }
    SvdFactors ff = thin_svd(parts.size() == 1 ? parts.front() : stack_embeddings(parts));
    ProjectionOperator pf = build_projector(ff, job.alpha, Role::forget, labels);
    ProjectionOperator unlearn = unlearn_operator(compose_discriminative(pf, retain_op));
    report.steps.push_back(EditStep{std::move(labels), ff.rank(), retain_rank});
    return edit_weights(current, unlearn, threads);
  };

  std::optional<EditResult> result;
  switch (job.mode) {
    case Mode::stacked: {
      std::vector<const EmbeddingMatrix*> all;
      for (const auto& e : job.forget) all.push_back(&e);
      result = apply(all, bundle);
      break;
    }
    case Mode::sequential: {
      for (const auto& e : job.forget) result = apply({&e}, result ? result->bundle : bundle);
      break;
    }
  }

  report.edit = std::move(result->report);
  report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return JobResult{std::move(result->bundle), std::move(report)};
}

/// Reference single-query cross-attention: softmax over the n token scores
/// q . (W_k e_j), output W_v E p. Used to check weight-space edits.
inline Vector attention_forward(const Vector& query, const Matrix& w_k, const Matrix& w_v,
                                const EmbeddingMatrix& embeddings) {
  const Matrix& e = embeddings.data();
  if (w_k.cols() != e.rows() || w_v.cols() != e.rows()) {
    fail(ErrorKind::DimensionMismatch, "projection weights do not accept " + std::to_string(e.rows()) +
                                           "-dimensional embeddings");
  }
  if (query.size() != w_k.rows()) fail(ErrorKind::DimensionMismatch, "query length does not match key width");

  const Matrix keys = w_k * e;
  Vector scores = keys.transpose() * query;
  const double top = scores.maxCoeff();
  Vector prob = (scores.array() - top).exp();
  prob /= prob.sum();
  const Matrix values = w_v * e;
  return values * prob;
}

}  // namespace cure
