// Command-line front end.
//
//   cure erase   --config job.json
//   cure inspect --embeddings e.npy --alpha 2 --out spectrum.csv [--projector-out p.npy]
//   cure sweep   --config pair.json [--alphas 1,2,inf] --out metrics.csv
//   cure verify  [--inject-fault asymmetric-forget]
//   cure synth   --manifest m.manifest --out bundle_dir [--seed 42] [--dtype <f4|<f8]
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical or
// contract violation. Failures print one line to stderr:
//   error kind=<ErrorKind> message="<detail>"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cure/cure.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

int report_error(const cure::Error& e) {
  std::string msg = e.detail();
  for (auto& c : msg)
    if (c == '"' || c == '\n') c = '\'';
  std::cerr << "error kind=" << cure::to_string(e.kind()) << " message=\"" << msg << "\"\n";
  return cure::is_config_error(e.kind()) ? kExitConfig : kExitNumerical;
}

cure::Alpha parse_alpha_flag(const std::string& text, const std::string& flag) {
  try {
    return cure::Alpha::parse(text);
  } catch (const cure::Error& e) {
    cure::fail(cure::ErrorKind::SchemaError, flag + ": " + e.detail());
  }
}

std::vector<cure::Alpha> parse_alpha_list(const std::string& text) {
  std::vector<cure::Alpha> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_alpha_flag(item, "--alphas"));
  if (out.empty()) cure::fail(cure::ErrorKind::SchemaError, "--alphas: empty list");
  return out;
}

int cmd_erase(const std::string& config_path) {
  const cure::JobConfig cfg = cure::load_job(config_path);
  if (!cfg.weights_out) cure::fail(cure::ErrorKind::SchemaError, "weights_out: required for erase");
  if (!cfg.report_out) cure::fail(cure::ErrorKind::SchemaError, "report_out: required for erase");

  const cure::WeightBundle bundle = cure::load_target_bundle(cfg);
  const cure::ErasureJob job = cure::materialize(cfg);
  const cure::JobResult result = cure::run_job(job, bundle);

  cure::write_bundle(*cfg.weights_out, result.bundle, cfg.out_dtype);
  cure::emit_report(result.report, *cfg.report_out);

  const auto& edit = result.report.edit;
  std::printf("edited_tensors=%zu\n", edit.edited.size());
  std::printf("edited_params=%lld total_params=%lld\n", static_cast<long long>(edit.edited_params),
              static_cast<long long>(edit.total_params));
  std::printf("edited_fraction_percent=%.4f\n", 100.0 * edit.fraction);
  std::printf("edit_seconds=%.3f\n", result.report.elapsed_seconds);
  return kExitOk;
}

int cmd_inspect(const std::string& embeddings, const std::string& alpha_text, const std::string& out,
                const std::string& projector_out) {
  const cure::Alpha alpha = parse_alpha_flag(alpha_text, "--alpha");
  const cure::EmbeddingMatrix e = cure::npy::read_embedding(embeddings);
  const cure::SvdFactors factors = cure::thin_svd(e);
  cure::npy::write_file(out, cure::spectrum_csv(cure::spectrum_table(factors.sigma(), alpha)));
  if (!projector_out.empty()) {
    cure::npy::write_tensor(projector_out, cure::build_projector(factors, alpha, cure::Role::forget, {e.label()}).matrix());
  }
  std::printf("rank=%lld dim=%lld tokens=%lld\n", static_cast<long long>(factors.rank()),
              static_cast<long long>(e.dim()), static_cast<long long>(e.tokens()));
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& alphas_text, const std::string& out) {
  const cure::SweepConfig cfg = cure::load_sweep(config_path);
  const auto alphas = alphas_text.empty() ? cure::default_alpha_grid() : parse_alpha_list(alphas_text);
  const auto rows = cure::sweep(cfg.make_pair(), alphas);
  cure::emit_report(rows, out);
  std::fputs(cure::metrics_csv(rows).c_str(), stdout);
  const bool suppress = cure::non_increasing(rows, [](const cure::ErasureMetrics& m) { return m.suppression_residual; });
  const bool retain = cure::non_decreasing(rows, [](const cure::ErasureMetrics& m) { return m.retention_error; });
  std::printf("suppression_residual non-increasing: %s\n", suppress ? "yes" : "no");
  std::printf("retention_error non-decreasing: %s\n", retain ? "yes" : "no");
  return kExitOk;
}

int cmd_verify(const std::string& fault) {
  cure::verify::Options opts;
  opts.seed = cure::harness_seed();
  if (fault == "asymmetric-forget") {
    opts.inject_asymmetric_forget = true;
  } else if (!fault.empty()) {
    cure::fail(cure::ErrorKind::SchemaError, "--inject-fault: unknown fault '" + fault + "'");
  }
  const auto results = cure::verify::run_all(opts);
  std::size_t passed = 0;
  for (const auto& r : results) {
    if (r.passed) {
      ++passed;
      std::printf("PASS %s\n", r.name.c_str());
    } else {
      std::printf("FAIL %s: %s\n", r.name.c_str(), r.detail.c_str());
    }
  }
  std::printf("%zu/%zu properties passed (seed %llu)\n", passed, results.size(),
              static_cast<unsigned long long>(opts.seed));
  return passed == results.size() ? kExitOk : kExitNumerical;
}

int cmd_synth(const std::string& manifest, const std::string& out, std::uint64_t seed, const std::string& dtype) {
  const cure::Manifest m = cure::read_manifest(manifest);
  cure::write_bundle(out, cure::synthesize_bundle(m, seed), cure::npy::parse_dtype(dtype));
  std::printf("tensors=%zu editable_fraction_percent=%.4f\n", m.tensors.size(), 100.0 * m.editable_fraction());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-form concept erasure for cross-attention weights"};
  app.require_subcommand(1);

  std::string config, embeddings, alpha = "2", out, projector_out, alphas, fault, manifest, dtype = "<f8";
  std::uint64_t seed = 42;

  auto* erase = app.add_subcommand("erase", "Run an erasure job and write the edited bundle");
  erase->add_option("--config", config, "Job configuration (JSON)")->required();

  auto* inspect = app.add_subcommand("inspect", "Tabulate sigma, r_i, f and g for an embedding file");
  inspect->add_option("--embeddings", embeddings, "d x n NPY embedding file")->required();
  inspect->add_option("--alpha", alpha, "Expansion strength (number >= 1 or inf)");
  inspect->add_option("--out", out, "CSV output path")->required();
  inspect->add_option("--projector-out", projector_out, "Optional NPY path for the d x d forget operator");

  auto* sweep = app.add_subcommand("sweep", "Erasure metrics of a synthetic concept pair across alpha");
  sweep->add_option("--config", config, "Synthetic pair description (JSON)")->required();
  sweep->add_option("--alphas", alphas, "Comma-separated alpha grid (default 1,2,5,10,100,1000,inf)");
  sweep->add_option("--out", out, "CSV output path")->required();

  auto* verify = app.add_subcommand("verify", "Run the invariant suite");
  verify->add_option("--inject-fault", fault, "Negative control (asymmetric-forget)");

  auto* synth = app.add_subcommand("synth", "Write a random weight bundle with a manifest's shapes");
  synth->add_option("--manifest", manifest, "Manifest text file")->required();
  synth->add_option("--out", out, "Bundle directory")->required();
  synth->add_option("--seed", seed, "RNG seed");
  synth->add_option("--dtype", dtype, "Tensor dtype (<f8 or <f4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*erase) return cmd_erase(config);
    if (*inspect) return cmd_inspect(embeddings, alpha, out, projector_out);
    if (*sweep) return cmd_sweep(config, alphas, out);
    if (*verify) return cmd_verify(fault);
    if (*synth) return cmd_synth(manifest, out, seed, dtype);
  } catch (const cure::Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << "error kind=Internal message=\"" << e.what() << "\"\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
