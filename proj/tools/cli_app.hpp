#pragma once

// Command-line front end. Kept in a header so tests can drive run_cli()
// in-process.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "matreg/matreg.hpp"
#include "matreg/report.hpp"

namespace matreg::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kInvalidArgument = 3,
  kMalformedFile = 4,
  kIo = 5,
  kExhaustedGrid = 6,
  kDegenerate = 7,
  kPartialFailure = 8,
  kNoConvergence = 9,
};

inline const char* exit_code_help() {
  return "Exit codes:\n"
         "  0  success\n"
         "  1  internal error\n"
         "  2  usage error (unknown flag, missing or malformed flag value)\n"
         "  3  invalid argument (value out of domain, inconsistent dimensions)\n"
         "  4  malformed input file (message carries the byte offset)\n"
         "  5  file could not be opened, read or written\n"
         "  6  every tuning grid cell failed\n"
         "  7  degenerate neighbourhood, spectrum or fit\n"
         "  8  some evaluation points or folds failed\n"
         "  9  SVD did not converge\n"
         "Errors are written to stderr as a JSON object {\"error\": {...}}.\n"
         "MATREG_THREADS caps the number of worker threads.";
}

struct Failure {
  int code;
  json error;
};

/// Maps an in-flight exception to an exit code and a structured report.
inline Failure classify(const std::exception_ptr& ep) {
  const auto make = [](int code, const char* kind, const std::string& msg) {
    return Failure{code, {{"kind", kind}, {"message", msg}, {"exit_code", code}}};
  };
  try {
    std::rethrow_exception(ep);
  } catch (const ParseError& e) {
    Failure f = make(kMalformedFile, "malformed_file", e.what());
    f.error["offset"] = e.offset();
    return f;
  } catch (const IoError& e) {
    return make(kIo, "io_error", e.what());
  } catch (const ExhaustedGridError& e) {
    Failure f = make(kExhaustedGrid, "exhausted_grid", e.what());
    json cells = json::array();
    for (const auto& c : e.cells())
      cells.push_back({{"bandwidth", c.bandwidth}, {"lambda", c.lambda}, {"message", c.message}});
    f.error["cells"] = std::move(cells);
    return f;
  } catch (const DegenerateNeighborhoodError& e) {
    Failure f = make(kDegenerate, "degenerate_neighborhood", e.what());
    f.error["x"] = e.point();
    f.error["bandwidth"] = e.bandwidth();
    return f;
  } catch (const DegenerateSpectrumError& e) {
    Failure f = make(kDegenerate, "degenerate_spectrum", e.what());
    f.error["sample"] = e.sample();
    return f;
  } catch (const DegenerateFitError& e) {
    return make(kDegenerate, "degenerate_fit", e.what());
  } catch (const PathError& e) {
    Failure f = make(kPartialFailure, "partial_failure", e.what());
    json items = json::array();
    for (const auto& x : e.failures()) items.push_back({{"index", x.index}, {"message", x.message}});
    f.error["failures"] = std::move(items);
    return f;
  } catch (const ConvergenceError& e) {
    return make(kNoConvergence, "no_convergence", e.what());
  } catch (const ArgumentError& e) {
    return make(kInvalidArgument, "invalid_argument", e.what());
  } catch (const std::exception& e) {
    return make(kInternal, "internal", e.what());
  } catch (...) {
    return make(kInternal, "internal", "unknown exception");
  }
}

inline std::vector<double> parse_number_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      while (used < tok.size() && (tok[used] == ' ' || tok[used] == '\t')) ++used;
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw ArgumentError(std::string(flag) + ": cannot parse '" + tok + "' as a number");
    }
  }
  if (out.empty()) throw ArgumentError(std::string(flag) + ": empty list");
  return out;
}

/// --eval-points: an existing file (CSV, one point per row), "lin:a:b:k"
/// (k equispaced values on [a, b] in every coordinate, Cartesian product),
/// or inline points "x1,x2;y1,y2".
inline std::vector<std::vector<double>> parse_eval_points(const std::string& arg,
                                                          std::size_t dim) {
  std::vector<std::vector<double>> pts;
  if (std::filesystem::is_regular_file(arg)) {
    pts = parse_csv_rows(read_text_file(arg));
  } else if (arg.rfind("lin:", 0) == 0) {
    const auto parts = parse_number_list(
        [&] {
          std::string s = arg.substr(4);
          for (char& c : s)
            if (c == ':') c = ',';
          return s;
        }(),
        "--eval-points");
    if (parts.size() != 3 || parts[2] < 1 || parts[2] != std::floor(parts[2]))
      throw ArgumentError("--eval-points: expected lin:a:b:k with integer k >= 1");
    const auto k = static_cast<std::size_t>(parts[2]);
    std::vector<double> axis(k);
    for (std::size_t i = 0; i < k; ++i)
      axis[i] = k == 1 ? parts[0]
                       : parts[0] + (parts[1] - parts[0]) * static_cast<double>(i) /
                                        static_cast<double>(k - 1);
    std::size_t total = 1;
    for (std::size_t d = 0; d < dim; ++d) total *= k;
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::vector<double> x(dim);
      std::size_t rem = idx;
      for (std::size_t d = dim; d-- > 0;) {
        x[d] = axis[rem % k];
        rem /= k;
      }
      pts.push_back(std::move(x));
    }
  } else {
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, ';'))
      if (!item.empty()) pts.push_back(parse_number_list(item, "--eval-points"));
  }
  if (pts.empty()) throw ArgumentError("--eval-points: no points");
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts[i].size() != dim)
      throw ArgumentError("--eval-points: point " + std::to_string(i) + " has " +
                          std::to_string(pts[i].size()) + " coordinates, data has " +
                          std::to_string(dim));
  return pts;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw IoError("write to '" + path + "' failed");
}

struct Options {
  std::string input;
  std::string output;
  std::string kernel = "gaussian";
  std::string penalty = "nuclear";
  std::optional<double> bandwidth;
  std::optional<double> lambda;
  std::optional<double> tau;
  std::string grid_h;
  std::string grid_lambda;
  std::string eval_points;
  std::string csv_prefix;
  std::string csv;
  std::string stack_out;
  std::string setting = "I";
  std::string shape = "square";
  std::size_t n = 200;
  std::size_t n_test = 500;
  std::size_t replicates = 1;
  std::uint64_t seed = 20240611;
  std::size_t image_size = 64;
  bool zero_noise = false;
  bool retune = false;
  bool strict_df = false;
  std::size_t window = 100;
  std::size_t stride = 1;
};

inline std::optional<TuneGrid> explicit_grid(const Options& o) {
  if (o.grid_h.empty() && o.grid_lambda.empty()) return std::nullopt;
  if (o.grid_h.empty() || o.grid_lambda.empty())
    throw ArgumentError("--grid-h and --grid-lambda must be given together");
  return TuneGrid(parse_number_list(o.grid_h, "--grid-h"),
                  parse_number_list(o.grid_lambda, "--grid-lambda"));
}

inline FitConfig fixed_config(const Options& o, std::size_t dim) {
  if (!o.bandwidth) throw ArgumentError("--bandwidth is required");
  FitConfig cfg{KernelSpec(parse_kernel_family(o.kernel), *o.bandwidth, dim)};
  cfg.penalty = parse_penalty(o.penalty);
  if (o.tau) {
    cfg.lambda = *o.tau;
    cfg.scale = LambdaScale::threshold;
  } else {
    cfg.lambda = o.lambda.value_or(0.0);
  }
  if (cfg.penalty != Penalty::none && !o.tau && !o.lambda)
    throw ArgumentError("--lambda or --tau is required for penalty " + o.penalty);
  return cfg;
}

inline json cmd_fit(const Options& o, json& config) {
  const Dataset data = read_stack(o.input);
  const FitConfig cfg = fixed_config(o, data.s());
  const auto xs = o.eval_points.empty() ? data.covariates()
                                        : parse_eval_points(o.eval_points, data.s());
  // A lone point reports its own failure rather than a partial batch.
  const std::vector<FitResult> fits =
      xs.size() == 1 ? std::vector<FitResult>{fit(data, cfg, xs[0])} : fit_path(data, cfg, xs);
  config = {{"fit", to_json(cfg)}, {"eval_points", xs}};
  json points = json::array();
  for (std::size_t i = 0; i < fits.size(); ++i) {
    json j = to_json(fits[i]);
    j["index"] = i;
    j["x"] = xs[i];
    if (!o.csv_prefix.empty()) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_%04zu.csv", i);
      const std::string path = o.csv_prefix + suffix;
      write_csv_matrix(fits[i].estimate, path);
      j["csv"] = std::filesystem::path(path).filename().string();
    }
    points.push_back(std::move(j));
  }
  return {{"points", std::move(points)},
          {"data", {{"n", data.size()}, {"s", data.s()}, {"p", data.p()}, {"q", data.q()}}}};
}

inline json cmd_tune(const Options& o, json& config) {
  const Dataset data = read_stack(o.input);
  const Penalty penalty = parse_penalty(o.penalty);
  const KernelFamily family = parse_kernel_family(o.kernel);
  const auto given = explicit_grid(o);
  const TuneGrid grid = given ? *given : default_grid(data, penalty, family);
  config = {{"grid", to_json(grid)},
            {"grid_source", given ? "flags" : "default"},
            {"penalty", o.penalty},
            {"kernel_family", o.kernel},
            {"strict_df", o.strict_df}};
  const BicReport report = tune(data, grid, penalty, family, DfOptions{o.strict_df});
  json r = to_json(report);
  r["selected_config"] = to_json(selected_config(report, data.s()));
  return r;
}

inline json cmd_simulate(const Options& o, json& config) {
  SimSpec spec = make_sim_spec(parse_setting(o.setting), parse_shape(o.shape), o.n,
                               o.replicates, o.seed, o.image_size);
  spec.n_test = o.n_test;
  if (o.zero_noise) spec.noise_scale = 0.0;
  spec.validate();
  const auto given = explicit_grid(o);
  const TuneGrid grid = given ? *given : simulation_grid(spec);
  config = {{"spec", to_json(spec)},
            {"grid", to_json(grid)},
            {"grid_source", given ? "flags" : "default"}};
  if (!o.stack_out.empty()) write_stack(generate(spec, 0).train, o.stack_out);
  const SimResult result = run_study(spec, grid);
  if (!o.csv.empty()) write_text(o.csv, replicate_csv(result));
  return to_json(result);
}

inline json cmd_cv(const Options& o, json& config) {
  const Dataset data = read_stack(o.input);
  if (o.bandwidth) {
    if (o.retune) throw ArgumentError("--retune needs a grid, not --bandwidth");
    const FitConfig cfg = fixed_config(o, data.s());
    config = {{"mode", "given"}, {"fit", to_json(cfg)}};
    return to_json(loocv(data, cfg));
  }
  const Penalty penalty = parse_penalty(o.penalty);
  const KernelFamily family = parse_kernel_family(o.kernel);
  const auto given = explicit_grid(o);
  const TuneGrid grid = given ? *given : default_grid(data, penalty, family);
  const CvMode mode = o.retune ? CvMode::retune : CvMode::fixed;
  config = {{"mode", to_string(mode)},
            {"grid", to_json(grid)},
            {"grid_source", given ? "flags" : "default"},
            {"penalty", o.penalty},
            {"kernel_family", o.kernel}};
  return to_json(loocv(data, grid, penalty, mode, family));
}

inline json cmd_slidecov(const Options& o, json& config) {
  if (o.stack_out.empty()) throw ArgumentError("--stack-out is required");
  const Mat series = read_csv_matrix(o.input);
  const Dataset out = sliding_covariance(series, o.window, o.stride);
  write_stack(out, o.stack_out);
  config = {{"window", o.window}, {"stride", o.stride}};
  std::vector<double> centres;
  for (const auto& x : out.covariates()) centres.push_back(x[0]);
  return {{"series", {{"length", series.rows()}, {"channels", series.cols()}}},
          {"count", out.size()},
          {"matrix_size", out.p()},
          {"covariates", centres}};
}

/// Runs the CLI on `args` (args[0] is the program name). The report goes to
/// --output or `out`; errors go to `err` as JSON.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonparametric matrix-response regression with nuclear-norm shrinkage", "matreg"};
  app.footer(exit_code_help());
  app.require_subcommand(1);
  Options o;

  const auto add_output = [&](CLI::App* c) {
    c->add_option("--output", o.output, "RunReport JSON path (default: stdout)");
  };
  const auto add_kernel = [&](CLI::App* c) {
    c->add_option("--kernel", o.kernel, "Kernel family")
        ->check(CLI::IsMember({"gaussian", "epanechnikov"}))
        ->capture_default_str();
  };
  const auto add_penalty = [&](CLI::App* c) {
    c->add_option("--penalty", o.penalty, "Penalty")
        ->check(CLI::IsMember({"none", "nuclear", "lasso"}))
        ->capture_default_str();
  };
  const auto add_fixed = [&](CLI::App* c) {
    c->add_option("--bandwidth", o.bandwidth, "Bandwidth h")->check(CLI::PositiveNumber);
    auto* lam = c->add_option("--lambda", o.lambda, "Penalty weight lambda_n")
                    ->check(CLI::NonNegativeNumber);
    auto* tau = c->add_option("--tau", o.tau, "Effective threshold tau (overrides lambda scale)")
                    ->check(CLI::NonNegativeNumber);
    lam->excludes(tau);
  };
  const auto add_grid = [&](CLI::App* c) {
    c->add_option("--grid-h", o.grid_h, "Comma-separated increasing bandwidths");
    c->add_option("--grid-lambda", o.grid_lambda, "Comma-separated increasing lambdas");
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit at evaluation points");
  fit->add_option("--input", o.input, "MRS1 stack file")->required();
  add_kernel(fit);
  add_penalty(fit);
  add_fixed(fit);
  fit->add_option("--eval-points", o.eval_points,
                  "CSV file, lin:a:b:k, or inline points 'x1,x2;y1,y2' (default: training covariates)");
  fit->add_option("--csv-prefix", o.csv_prefix, "Write each estimate to <prefix>_NNNN.csv");
  add_output(fit);

  CLI::App* tn = app.add_subcommand("tune", "BIC grid search over (h, lambda)");
  tn->add_option("--input", o.input, "MRS1 stack file")->required();
  add_kernel(tn);
  add_penalty(tn);
  add_grid(tn);
  tn->add_flag("--strict-df", o.strict_df, "Fail on tied singular values instead of using the limit");
  add_output(tn);

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study");
  sim->add_option("--setting", o.setting, "Simulation setting")
      ->check(CLI::IsMember({"I", "II", "III", "IV"}))
      ->capture_default_str();
  sim->add_option("--shape", o.shape, "Planted shape")
      ->check(CLI::IsMember({"cross", "square", "tshape"}))
      ->capture_default_str();
  sim->add_option("--n", o.n, "Training sample size")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--n-test", o.n_test, "Test sample size")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--replicates", o.replicates, "Replicates")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--seed", o.seed, "Base seed")->capture_default_str();
  sim->add_option("--image-size", o.image_size, "Image side length")->check(CLI::Range(8, 4096))->capture_default_str();
  sim->add_flag("--zero-noise", o.zero_noise, "Noise-free responses");
  add_grid(sim);
  sim->add_option("--csv", o.csv, "Per-replicate CSV path");
  sim->add_option("--stack-out", o.stack_out, "Write replicate 0's training set as an MRS1 stack");
  add_output(sim);

  CLI::App* cv = app.add_subcommand("cv", "Leave-one-out cross-validation");
  cv->add_option("--input", o.input, "MRS1 stack file")->required();
  add_kernel(cv);
  add_penalty(cv);
  add_fixed(cv);
  add_grid(cv);
  cv->add_flag("--retune", o.retune, "Re-tune on every fold (default: tune once on all data)");
  add_output(cv);

  CLI::App* sc = app.add_subcommand("slidecov", "Sliding-window covariance matrices from a series");
  sc->add_option("--input", o.input, "CSV series, one time point per row")->required();
  sc->add_option("--window", o.window, "Window length")->capture_default_str();
  sc->add_option("--stride", o.stride, "Window stride")->capture_default_str();
  sc->add_option("--stack-out", o.stack_out, "Output MRS1 stack")->required();
  add_output(sc);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    const json j = {{"error", {{"kind", "usage"}, {"message", e.what()}, {"exit_code", kUsage}}}};
    err << j.dump() << '\n';
    return kUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    json config;
    json results;
    if (chosen == fit) results = cmd_fit(o, config);
    else if (chosen == tn) results = cmd_tune(o, config);
    else if (chosen == sim) results = cmd_simulate(o, config);
    else if (chosen == cv) results = cmd_cv(o, config);
    else results = cmd_slidecov(o, config);
    const std::string text = run_report(name, args, std::move(config), std::move(results)).dump(2) + "\n";
    if (o.output.empty())
      out << text;
    else
      write_text(o.output, text);
    return kOk;
  } catch (...) {
    const Failure f = classify(std::current_exception());
    err << json{{"error", f.error}}.dump() << '\n';
    return f.code;
  }
}

}  // namespace matreg::cli
