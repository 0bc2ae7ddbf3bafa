/*
 * Copyright (c) 2026 the dmfdyn authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// dmf: reconstruction experiments and training-dynamics analysis for deep
// matrix factorization.
//
// Exit codes: 0 success, 2 config/input error, 3 solver failure,
// 4 certification negative. stdout carries machine-readable summaries only;
// human-facing logs go to stderr.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <string>

#include "dmf/csv.hpp"
#include "dmf/experiment.hpp"
#include "dmf/version.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kSolverError = 3;
constexpr int kNotCertified = 4;

std::filesystem::path default_out(const std::string& flag_value, const std::string& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("DMF_OUTPUT_DIR")) return env;
  return config_value;
}

int cmd_run(const std::string& config_path, std::string method, double rate_flag, int trial,
            const std::string& out_flag) {
  dmf::ExperimentConfig config;
  try {
    config = dmf::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "dmf run: " << config_path << ": " << e.what() << '\n';
    return kInputError;
  }
  if (method.empty()) method = config.methods.front();
  double rate = rate_flag > 0 ? rate_flag : config.sampling_rates.front();
  if (!(rate > 0.0 && rate <= 1.0)) {
    std::cerr << "dmf run: rate must be in (0,1]\n";
    return kInputError;
  }
  if (method != "dmf" && method != "nnm" && method != "omf") {
    std::cerr << "dmf run: unknown method '" << method << "'\n";
    return kInputError;
  }
  if (method != "dmf") std::cerr << "dmf run: optimizer block ignored for method '" << method << "'\n";

  dmf::RunTrialOptions options;
  options.out_dir = default_out(out_flag, config.output_dir);
  options.write_checkpoint = true;
  options.write_problem = true;
  dmf::TrialResult result = dmf::run_trial(config, method, rate, trial, options);
  if (!result.ok) {
    std::cerr << "dmf run: trial failed: " << result.error << '\n';
    return kSolverError;
  }
  dmf::write_trials_csv({result}, config.sv_topk, options.out_dir / "trials.csv");
  dmf::write_timings_csv({result}, options.out_dir / "timings.csv");

  std::cout << "method=" << result.method << " rate=" << dmf::format_double(result.rate)
            << " trial=" << result.trial_index << " rlne=" << dmf::format_double(result.rlne)
            << " iters=" << result.iters
            << " stages=" << (result.spe ? std::to_string(result.spe->stage_count) : "-")
            << " certified="
            << (result.cert ? (result.cert->is_second_order ? "yes" : "no") : "-") << '\n';
  return kOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out_flag, int jobs) {
  dmf::ExperimentConfig config;
  try {
    config = dmf::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "dmf sweep: " << config_path << ": " << e.what() << '\n';
    return kInputError;
  }
  if (jobs < 1) {
    std::cerr << "dmf sweep: --jobs must be >= 1\n";
    return kInputError;
  }
  std::filesystem::path out = default_out(out_flag, config.output_dir);
  dmf::SweepResult result = dmf::sweep(config, jobs, out, &std::cerr);
  for (const auto& cell : result.cells)
    std::cout << "method=" << cell.method << " rate=" << dmf::format_double(cell.rate)
              << " mean_rlne=" << dmf::format_double(cell.mean_rlne)
              << " std_rlne=" << dmf::format_double(cell.std_rlne) << " ok=" << cell.n_ok
              << " failed=" << cell.n_failed << '\n';
  if (result.failed > 0)
    std::cerr << "dmf sweep: " << result.failed << " trial(s) failed; see trials.csv\n";
  return kOk;
}

int cmd_analyze(const std::string& trajectory_path, double rate_threshold, int window,
                int min_segment) {
  dmf::Trajectory traj;
  try {
    traj = dmf::read_trajectory_csv(trajectory_path);
  } catch (const std::exception& e) {
    std::cerr << "dmf analyze: " << trajectory_path << ": " << e.what() << '\n';
    return kInputError;
  }
  dmf::SegmentationParams params;
  params.rate_threshold = rate_threshold;
  params.window = window;
  params.min_segment = min_segment;
  try {
    dmf::SpeReport report = dmf::detect_spe(traj, params);
    std::cout << dmf::spe_report_to_json(report) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "dmf analyze: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}

int cmd_certify(const std::string& checkpoint_dir, const std::string& problem_path, double tau_g,
                double tau_h, double tol, int max_iters, std::uint64_t seed) {
  dmf::WeightStack stack;
  dmf::Problem prob;
  try {
    stack = dmf::load_checkpoint(checkpoint_dir).first;
    prob = dmf::load_problem(problem_path);
  } catch (const std::exception& e) {
    std::cerr << "dmf certify: " << e.what() << '\n';
    return kInputError;
  }
  dmf::CriticalityCert cert;
  try {
    dmf::CertifyOptions options;
    options.tol = tol;
    options.max_iters = max_iters;
    options.seed = seed;
    cert = dmf::certify(stack, prob, tau_g, tau_h, options);
  } catch (const std::invalid_argument& e) {
    std::cerr << "dmf certify: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "dmf certify: " << e.what() << '\n';
    return kSolverError;
  }
  std::cout << dmf::cert_to_json(cert) << '\n';
  return cert.is_second_order ? kOk : kNotCertified;
}

int cmd_tune(const std::string& config_path, const std::string& method,
             const std::string& out_flag, int tuning_seeds) {
  dmf::ExperimentConfig config;
  try {
    config = dmf::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "dmf tune: " << config_path << ": " << e.what() << '\n';
    return kInputError;
  }
  const std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  const std::vector<double> ridge_grid{0.0, 1e-6, 1e-3};
  std::string json = "{\n  \"rates\": [\n";
  bool first = true;
  for (double rate : config.sampling_rates) {
    if (!first) json += ",\n";
    first = false;
    json += "    {\"rate\": " + dmf::format_double(rate);
    try {
      if (method == "nnm" || method == "all") {
        dmf::NnmConfig best = dmf::tune_nnm(config, rate, lambda_grid, tuning_seeds);
        json += ", \"nnm_lambda\": " + dmf::format_double(best.lambda);
      }
      if (method == "omf" || method == "all") {
        dmf::OmfConfig best = dmf::tune_omf(config, rate, ridge_grid, tuning_seeds);
        json += ", \"omf_ridge\": " + dmf::format_double(best.ridge);
      }
    } catch (const std::exception& e) {
      std::cerr << "dmf tune: " << e.what() << '\n';
      return kSolverError;
    }
    json += "}";
  }
  json += "\n  ]\n}";
  std::cout << json << '\n';
  if (!out_flag.empty()) {
    std::filesystem::create_directories(out_flag);
    std::ofstream out(std::filesystem::path(out_flag) / "tuned.json");
    out << json << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep matrix factorization dynamics toolkit"};
  app.set_version_flag("--version", std::string("dmf ") + dmf::kVersion);
  app.require_subcommand(1);

  std::string config_path, method, out_dir, trajectory_path, checkpoint_dir, problem_path;
  double rate = -1.0;
  int trial = 0;
  int jobs = 1;
  double rate_threshold = dmf::SegmentationParams{}.rate_threshold;
  int window = dmf::SegmentationParams{}.window;
  int min_segment = dmf::SegmentationParams{}.min_segment;
  double tau_g = 1e-3, tau_h = 1e-2, tol = 1e-6;
  int max_iters = 200;
  std::uint64_t seed = 0;
  std::string tune_method = "all";
  int tuning_seeds = 5;

  auto* run = app.add_subcommand("run", "run one (method, rate, trial) cell");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--method", method, "dmf|nnm|omf (default: first in config)");
  run->add_option("--rate", rate, "sampling rate (default: first in config)");
  run->add_option("--seed", trial, "trial index");
  run->add_option("--out", out_dir, "output directory (default: $DMF_OUTPUT_DIR or config)");

  auto* sweep = app.add_subcommand("sweep", "run the full methods x rates x trials grid");
  sweep->add_option("--config", config_path, "experiment config JSON")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--jobs", jobs, "parallel workers");

  auto* analyze = app.add_subcommand("analyze", "segment a saved trajectory into SPE stages");
  analyze->add_option("--trajectory", trajectory_path, "trajectory CSV")->required();
  analyze->add_option("--rate-threshold", rate_threshold, "decline threshold (decades/sample)");
  analyze->add_option("--window", window, "slope smoothing window");
  analyze->add_option("--min-segment", min_segment, "minimum run length in samples");

  auto* certify = app.add_subcommand("certify", "second-order criticality check of a checkpoint");
  certify->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
  certify->add_option("--problem", problem_path, "problem JSON")->required();
  certify->add_option("--tau-g", tau_g, "gradient-norm tolerance");
  certify->add_option("--tau-h", tau_h, "Hessian eigenvalue tolerance");
  certify->add_option("--tol", tol, "eigenvalue solver tolerance");
  certify->add_option("--max-iters", max_iters, "eigenvalue solver iteration cap");
  certify->add_option("--seed", seed, "eigenvalue solver start seed");

  auto* tune = app.add_subcommand("tune", "grid-tune baseline hyperparameters");
  tune->add_option("--config", config_path, "experiment config JSON")->required();
  tune->add_option("--method", tune_method, "nnm|omf|all");
  tune->add_option("--out", out_dir, "where to write tuned.json");
  tune->add_option("--tuning-seeds", tuning_seeds, "held-out seeds per grid point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, method, rate, trial, out_dir);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir, jobs);
    if (analyze->parsed())
      return cmd_analyze(trajectory_path, rate_threshold, window, min_segment);
    if (certify->parsed())
      return cmd_certify(checkpoint_dir, problem_path, tau_g, tau_h, tol, max_iters, seed);
    if (tune->parsed()) return cmd_tune(config_path, tune_method, out_dir, tuning_seeds);
  } catch (const std::exception& e) {
    std::cerr << "dmf: " << e.what() << '\n';
    return kSolverError;
  }
  return kInputError;
}
