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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmf/baselines.hpp"
#include "dmf/criticality.hpp"
#include "dmf/model.hpp"
#include "dmf/optimizer.hpp"
#include "dmf/trajectory.hpp"

namespace dmf {

/// Config-file problem: JSON parse or validation failure, with the 1-based
/// line when it came from a file.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& message, long line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string((long)line) + ": " + message
                                    : message),
        line(line) {}
  long line;
};

/// Optional settling phase run after the main loop: the same algorithm
/// continued at a smaller step size until the gradient norm drops below
/// grad_floor. At a fixed eta the scalar-EMA iterate orbits the minimum with
/// gradient norm ~ curvature * eta, so runs that must end at a small-gradient
/// point finish with one of these.
struct PolishConfig {
  double eta = 0.0;  ///< 0 disables the phase.
  long max_iters = 30000;
  double grad_floor = 5e-4;
  int grad_patience = 5;
};

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::RmsProp;
  double eta = 1e-3;
  double r = 1e-2;
  double alpha = 0.99;
  double epsilon = 1e-8;
  long t_spe = 500;
  long t_burnin = 100;
  long max_iters = 200000;
  long record_every = 100;
  StopRule stop;
  PolishConfig polish;

  /// When positive, stop once the recorded loss curve shows this many
  /// completed decline stages and the run has sat on the trailing plateau for
  /// stage_patience recorded samples. Synthetic-protocol counterpart of
  /// handing the factorization baseline the true rank: the rule sees only the
  /// observed loss trajectory.
  int stage_target = 0;
  int stage_patience = 50;

  RmsPropState make_state() const;
};

struct CertifyConfig {
  bool enabled = false;
  double tau_g = 1e-3;
  double tau_h = 1e-2;
  double tol = 1e-6;
  int max_iters = 200;
};

struct ExperimentConfig {
  int n = 10;
  int rank = 1;
  int depth = 2;
  double std_init = 1e-3;
  std::optional<double> snr_db;
  std::vector<double> sampling_rates{1.0};
  int trials = 1;
  std::vector<std::string> methods{"dmf"};
  std::uint64_t seed = 0;
  long record_every = 100;
  int sv_topk = 10;
  std::string output_dir = "out";
  OptimizerConfig optimizer;
  SegmentationParams segmentation;
  CertifyConfig certify;
  NnmConfig nnm;
  OmfConfig omf;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& config);

/// Rank-r ground truth X = A B^T with standard Gaussian factors.
Mat gen_low_rank(int n, int rank, std::uint64_t seed);

/// Adds Gaussian noise rescaled so the measured SNR is exactly snr_db
/// (average power = mean squared entry). snr_db caps at 300.
Mat add_noise_snr(const Mat& x, double snr_db, std::uint64_t seed);

/// Exactly round(rate * n^2) observed entries, uniform without replacement.
Mask gen_mask(int n, double rate, std::uint64_t seed);

/// || y - x ||_F / || x ||_F against the noise-free ground truth.
double rlne(const Mat& x, const Mat& y);

/// Deterministic per-trial seed: any one (method, rate, trial) cell can be
/// regenerated without touching the others.
std::uint64_t trial_seed(std::uint64_t base, const std::string& method, double rate,
                         int trial_index);

struct TrialResult {
  std::string method;
  double rate = 1.0;
  int trial_index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double rlne = 0.0;
  Vec sv_final;
  std::optional<SpeReport> spe;
  std::optional<CriticalityCert> cert;
  double wall_time_s = 0.0;
  long iters = 0;
  std::string stop_reason;
};

struct RunTrialOptions {
  /// Artifact root; nothing is written when empty.
  std::filesystem::path out_dir;
  bool write_checkpoint = false;
  bool write_problem = false;
};

std::string trial_id(const std::string& method, double rate, int trial_index);

/// One (method, rate, trial) cell: generates data from derived substream
/// seeds, runs the method, scores RLNE against the noise-free truth. Solver
/// failures come back as a failed TrialResult, not an exception.
TrialResult run_trial(const ExperimentConfig& config, const std::string& method, double rate,
                      int trial_index, const RunTrialOptions& options = {});

/// The Problem a given trial solves (used to re-derive inputs for offline
/// certification).
Problem trial_problem(const ExperimentConfig& config, const std::string& method, double rate,
                      int trial_index);

struct SweepCell {
  std::string method;
  double rate = 0.0;
  int n_ok = 0;
  int n_failed = 0;
  double mean_rlne = 0.0;
  double std_rlne = 0.0;
};

struct SweepResult {
  std::vector<TrialResult> trials;  ///< sorted by (method, rate, trial).
  std::vector<SweepCell> cells;
  int failed = 0;
};

/// Aggregates recomputed from a trial list; pure and reusable for
/// re-aggregation from disk.
std::vector<SweepCell> aggregate(const std::vector<TrialResult>& trials);

/// methods x rates x trials over a bounded worker pool. Artifacts land under
/// out_dir: trials.csv, timings.csv, sweep.json, manifest.json,
/// trajectories/, spe/, cert/. trials.csv content is independent of the job
/// count.
SweepResult sweep(const ExperimentConfig& config, int jobs, const std::filesystem::path& out_dir,
                  std::ostream* progress = nullptr);

void write_trials_csv(const std::vector<TrialResult>& trials, int sv_topk,
                      const std::filesystem::path& path);
void write_timings_csv(const std::vector<TrialResult>& trials, const std::filesystem::path& path);
void write_sweep_json(const SweepResult& result, const std::filesystem::path& path);
void write_manifest_json(const ExperimentConfig& config, const std::filesystem::path& path);

/// Problem files: a small JSON naming target/mask/ground-truth CSVs.
void save_problem(const Problem& prob, const std::filesystem::path& json_path);
Problem load_problem(const std::filesystem::path& json_path);

/// Baseline tuning per the synthetic-experiment protocol: grid search
/// scored by mean RLNE over a tuning seed set disjoint from evaluation
/// trials (trial indices offset by 1e6). Ties break to the first grid entry.
NnmConfig tune_nnm(const ExperimentConfig& config, double rate,
                   const std::vector<double>& lambda_grid, int tuning_seeds);
OmfConfig tune_omf(const ExperimentConfig& config, double rate,
                   const std::vector<double>& ridge_grid, int tuning_seeds);

}  // namespace dmf
