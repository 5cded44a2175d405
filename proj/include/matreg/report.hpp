#pragma once

// JSON views of library results. nlohmann::json objects keep keys sorted,
// so dumps are byte-stable for equal inputs.

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include "json.hpp"
#endif

#include <string>
#include <vector>

#include "matreg/estimators.hpp"
#include "matreg/kernels.hpp"
#include "matreg/simulation.hpp"
#include "matreg/tuning.hpp"

namespace matreg {

using json = nlohmann::json;

inline constexpr int kReportFormatVersion = 1;

inline std::string to_string(LambdaScale s) {
  return s == LambdaScale::penalty ? "penalty" : "threshold";
}

inline std::string to_string(CvMode m) { return m == CvMode::fixed ? "fixed" : "retune"; }

inline json to_json(const KernelSpec& k) {
  return {{"family", std::string(to_string(k.family()))},
          {"bandwidth", k.bandwidth()},
          {"dim", k.dim()}};
}

inline json to_json(const FitConfig& c) {
  return {{"kernel", to_json(c.kernel)},
          {"lambda", c.lambda},
          {"lambda_scale", to_string(c.scale)},
          {"penalty", std::string(to_string(c.penalty))}};
}

inline json to_json(const TuneGrid& g) {
  return {{"bandwidths", g.bandwidths()}, {"lambdas", g.lambdas()}};
}

inline json to_json(const BicEntry& e, bool per_sample = false) {
  json j = {{"bandwidth", e.bandwidth}, {"lambda", e.lambda}, {"rss", e.rss},
            {"rss_term", e.rss_term},   {"df", e.df},         {"bic", e.bic}};
  if (e.mean_rank) j["mean_rank"] = *e.mean_rank;
  if (per_sample) {
    j["per_sample_rss"] = e.per_sample_rss;
    if (!e.per_sample_rank.empty()) j["per_sample_rank"] = e.per_sample_rank;
  }
  return j;
}

inline json to_json(const BicReport& r) {
  json entries = json::array();
  for (const BicEntry& e : r.entries) entries.push_back(to_json(e));
  json failures = json::array();
  for (const auto& f : r.failures)
    failures.push_back({{"bandwidth", f.bandwidth}, {"lambda", f.lambda}, {"message", f.message}});
  return {{"penalty", std::string(to_string(r.penalty))},
          {"kernel_family", std::string(to_string(r.family))},
          {"entries", std::move(entries)},
          {"selected_index", r.selected},
          {"selected", to_json(r.best(), true)},
          {"failures", std::move(failures)}};
}

inline json to_json(const FitResult& f) {
  return {{"rank", f.rank},
          {"singular_values", f.singular_values},
          {"effective_tau", f.effective_tau},
          {"weight_sum", f.weight_sum},
          {"objective", f.objective},
          {"frobenius_norm", std::sqrt(frobenius_sq(f.estimate))}};
}

inline json to_json(const CvResult& r) {
  json j = {{"per_sample_errors", r.per_sample_errors}, {"mean", r.mean}, {"sd", r.sd}};
  if (r.config) j["config"] = to_json(*r.config);
  return j;
}

inline json to_json(const SimSpec& s) {
  json j = {{"setting", std::string(to_string(s.setting))},
            {"shape", std::string(to_string(s.shape.kind))},
            {"image_size", s.shape.size},
            {"fill_value", s.shape.fill_value},
            {"n_train", s.n_train},
            {"n_test", s.n_test},
            {"seed", s.seed},
            {"error_model", std::string(to_string(s.error_model))},
            {"ar_rho", s.ar_rho},
            {"replicates", s.replicate_count},
            {"noise_scale", s.noise_scale},
            {"covariate_dim", s.dim()}};
  if (s.dim() == 2) {
    const auto [rows, cols] = covariate_grid_shape(s.n_train);
    j["covariate_grid"] = {{"rows", rows}, {"cols", cols}, {"order", "row-major, truncated to n"}};
  }
  return j;
}

inline json to_json(const ColumnSummary& c) { return {{"mean", c.mean}, {"se", c.se}}; }

inline json to_json(const ReplicateResult& r) {
  return {{"replicate", r.replicate},
          {"seed", r.seed},
          {"err_ours", r.err_ours},
          {"err_nw", r.err_nw},
          {"err_lasso", r.err_lasso},
          {"avg_selected_rank", r.avg_selected_rank},
          {"config_ours", to_json(r.ours)},
          {"config_nw", to_json(r.nw)},
          {"config_lasso", to_json(r.lasso)}};
}

inline json to_json(const SimResult& r) {
  json reps = json::array();
  for (const auto& x : r.per_replicate) reps.push_back(to_json(x));
  json failures = json::array();
  for (const auto& f : r.failures) failures.push_back({{"replicate", f.index}, {"message", f.message}});
  return {{"per_replicate", std::move(reps)},
          {"summary",
           {{"err_ours", to_json(r.ours)},
            {"err_nw", to_json(r.nw)},
            {"err_lasso", to_json(r.lasso)},
            {"avg_selected_rank", to_json(r.rank)}}},
          {"failures", std::move(failures)}};
}

/// Per-replicate CSV: replicate,err_ours,err_nw,err_lasso,avg_rank.
inline std::string replicate_csv(const SimResult& r) {
  std::string out = "replicate,err_ours,err_nw,err_lasso,avg_rank\n";
  char buf[160];
  for (const auto& x : r.per_replicate) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", x.replicate, x.err_ours,
                  x.err_nw, x.err_lasso, x.avg_selected_rank);
    out += buf;
  }
  return out;
}

/// Top-level report: the echoed command, its configuration and results.
inline json run_report(const std::string& command, const std::vector<std::string>& argv,
                       json config, json results) {
  return {{"format_version", kReportFormatVersion},
          {"command", {{"name", command}, {"argv", argv}}},
          {"config", std::move(config)},
          {"results", std::move(results)}};
}

}  // namespace matreg
