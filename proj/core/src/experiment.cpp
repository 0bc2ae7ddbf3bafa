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

#include "dmf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "dmf/csv.hpp"
#include "dmf/rng.hpp"

namespace dmf {

RmsPropState OptimizerConfig::make_state() const {
  RmsPropState state;
  state.alpha = alpha;
  state.epsilon = epsilon;
  state.eta = eta;
  state.r = r;
  state.t_spe = t_spe;
  state.t_burnin = t_burnin;
  state.validate();
  return state;
}

Mat gen_low_rank(int n, int rank, std::uint64_t seed) {
  if (rank < 1 || rank > n) throw std::invalid_argument("gen_low_rank: need 1 <= rank <= n");
  Mat a = gaussian(n, rank, 1.0, derive_seed(seed, "factor_a"));
  Mat b = gaussian(n, rank, 1.0, derive_seed(seed, "factor_b"));
  return a * b.transpose();
}

Mat add_noise_snr(const Mat& x, double snr_db, std::uint64_t seed) {
  double signal_power = x.squaredNorm() / static_cast<double>(x.size());
  if (signal_power == 0.0) throw std::invalid_argument("add_noise_snr: zero signal");
  snr_db = std::min(snr_db, 300.0);
  Mat noise = gaussian(x.rows(), x.cols(), 1.0, derive_seed(seed, "noise"));
  double noise_power = noise.squaredNorm() / static_cast<double>(noise.size());
  double target_power = signal_power / std::pow(10.0, snr_db / 10.0);
  noise *= std::sqrt(target_power / noise_power);
  return x + noise;
}

Mask gen_mask(int n, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("gen_mask: rate must be in (0,1]");
  const auto total = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
  const auto keep = static_cast<std::uint64_t>(std::llround(rate * static_cast<double>(total)));
  std::vector<std::uint32_t> cells(total);
  std::iota(cells.begin(), cells.end(), 0u);
  Rng rng(derive_seed(seed, "mask"));
  // partial Fisher-Yates: the first `keep` slots end up a uniform sample
  for (std::uint64_t i = 0; i < keep && i + 1 < total; ++i) {
    std::uint64_t j = i + rng.uniform_below(total - i);
    std::swap(cells[i], cells[j]);
  }
  Mask mask(n, n);
  for (std::uint64_t i = 0; i < keep; ++i)
    mask.observed[cells[i]] = 1;
  return mask;
}

double rlne(const Mat& x, const Mat& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("rlne: shape mismatch");
  double denom = x.norm();
  if (denom == 0.0) throw std::invalid_argument("rlne: zero ground truth");
  return (y - x).norm() / denom;
}

std::uint64_t trial_seed(std::uint64_t base, const std::string& method, double rate,
                         int trial_index) {
  std::uint64_t s = derive_seed(base, hash64(method));
  s = derive_seed(s, double_bits(rate));
  return derive_seed(s, static_cast<std::uint64_t>(trial_index));
}

namespace {

std::string format_rate(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", rate);
  return buf;
}

struct TrialInputs {
  Mat truth;
  Problem problem;
};

TrialInputs make_inputs(const ExperimentConfig& config, const std::string& method, double rate,
                        int trial_index) {
  std::uint64_t seed = trial_seed(config.seed, method, rate, trial_index);
  TrialInputs in;
  in.truth = gen_low_rank(config.n, config.rank, derive_seed(seed, "truth"));
  Mat observed = config.snr_db ? add_noise_snr(in.truth, *config.snr_db, derive_seed(seed, "snr"))
                               : in.truth;
  Mask mask = gen_mask(config.n, rate, derive_seed(seed, "sampling"));
  in.problem = Problem::from_observations(observed, std::move(mask), in.truth);
  return in;
}

Vec top_singular_values(const Mat& m, int k) {
  Vec sv = singular_values(m);
  return sv.head(std::min<Index>(k, sv.size()));
}

}  // namespace

Problem trial_problem(const ExperimentConfig& config, const std::string& method, double rate,
                      int trial_index) {
  return make_inputs(config, method, rate, trial_index).problem;
}

std::string trial_id(const std::string& method, double rate, int trial_index) {
  return method + "_r" + format_rate(rate) + "_t" + std::to_string(trial_index);
}

TrialResult run_trial(const ExperimentConfig& config, const std::string& method, double rate,
                      int trial_index, const RunTrialOptions& options) {
  TrialResult result;
  result.method = method;
  result.rate = rate;
  result.trial_index = trial_index;
  result.seed = trial_seed(config.seed, method, rate, trial_index);
  const std::string id = trial_id(method, rate, trial_index);

  auto start = std::chrono::steady_clock::now();
  try {
    TrialInputs in = make_inputs(config, method, rate, trial_index);
    Mat reconstruction;

    if (method == "dmf") {
      std::vector<Index> dims(static_cast<std::size_t>(config.depth) + 1, config.n);
      WeightStack stack = init_balanced(dims, config.std_init, derive_seed(result.seed, "init"));
      RmsPropState state = config.optimizer.make_state();
      if (config.optimizer.algorithm == Algorithm::SpeRmsProp && state.t_burnin > 0)
        state = burnin(state, stack, in.problem, state.t_burnin);

      Trajectory traj;
      traj.sv_k = config.sv_topk;
      Recorder recorder = [&](long iter, const WeightStack& s, const RmsPropState& st, double l,
                              double g) { record_precomputed(traj, s, iter, l, g, st); };
      ExternalStop stage_stop = nullptr;
      if (config.optimizer.stage_target > 0) {
        stage_stop = [&](long) {
          if (traj.samples.size() <
              static_cast<std::size_t>(2 * config.segmentation.min_segment))
            return false;
          SpeReport report = detect_spe(traj, config.segmentation);
          if (report.stage_count < config.optimizer.stage_target) return false;
          const Segment& tail = report.segments.back();
          return tail.kind == Segment::Kind::Plateau &&
                 tail.end_index - tail.start_index + 1 >= config.optimizer.stage_patience;
        };
      }
      TrainOutcome outcome =
          train(stack, state, in.problem, config.optimizer.algorithm, config.optimizer.max_iters,
                config.optimizer.stop, config.optimizer.record_every, recorder, stage_stop);
      result.iters = outcome.steps;
      result.stop_reason = to_string(outcome.reason);

      const PolishConfig& polish = config.optimizer.polish;
      if (polish.eta > 0 && outcome.reason != StopReason::LossFloor) {
        long offset = outcome.steps;
        state.eta = polish.eta;
        StopRule polish_stop;
        polish_stop.loss_floor = config.optimizer.stop.loss_floor;
        polish_stop.grad_floor = polish.grad_floor;
        polish_stop.grad_patience = polish.grad_patience;
        Recorder polish_recorder = [&](long iter, const WeightStack& s, const RmsPropState& st,
                                       double l, double g) {
          long absolute = offset + iter;
          if (!traj.samples.empty() && traj.samples.back().iter >= absolute) return;
          record_precomputed(traj, s, absolute, l, g, st);
        };
        TrainOutcome polished =
            train(stack, state, in.problem, config.optimizer.algorithm, polish.max_iters,
                  polish_stop, config.optimizer.record_every, polish_recorder);
        result.iters += polished.steps;
        result.stop_reason = to_string(polished.reason) + "+polish";
      }
      reconstruction = product(stack);

      if (traj.samples.size() >= static_cast<std::size_t>(2 * config.segmentation.min_segment))
        result.spe = detect_spe(traj, config.segmentation);
      if (config.certify.enabled) {
        CertifyOptions copts;
        copts.tol = config.certify.tol;
        copts.max_iters = config.certify.max_iters;
        copts.seed = derive_seed(result.seed, "cert");
        result.cert =
            certify(stack, in.problem, config.certify.tau_g, config.certify.tau_h, copts);
      }
      if (!options.out_dir.empty()) {
        write_trajectory_csv(traj, options.out_dir / "trajectories" / (id + ".csv"));
        if (result.spe) write_spe_report_json(*result.spe, options.out_dir / "spe" / (id + ".json"));
        if (result.cert) write_cert_json(*result.cert, options.out_dir / "cert" / (id + ".json"));
        if (options.write_checkpoint)
          save_checkpoint(stack, options.out_dir / "checkpoints" / id, result.iters);
      }
    } else if (method == "nnm") {
      SolveInfo info;
      reconstruction = nnm_solve(in.problem, config.nnm, &info);
      result.iters = info.iters;
      result.stop_reason = info.converged ? "tol" : "max_iters";
    } else if (method == "omf") {
      OmfConfig omf = config.omf;
      omf.seed = derive_seed(result.seed, "init");
      SolveInfo info;
      reconstruction = omf_solve(in.problem, omf, &info);
      result.iters = info.iters;
      result.stop_reason = info.converged ? "tol" : "max_iters";
    } else {
      throw std::invalid_argument("unknown method: '" + method + "'");
    }

    result.rlne = rlne(in.truth, reconstruction);
    result.sv_final = top_singular_values(reconstruction, config.sv_topk);
    result.ok = true;
    if (!options.out_dir.empty() && options.write_problem)
      save_problem(in.problem, options.out_dir / "problems" / (id + ".json"));
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<SweepCell> aggregate(const std::vector<TrialResult>& trials) {
  std::vector<SweepCell> cells;
  auto find_cell = [&](const std::string& method, double rate) -> SweepCell& {
    for (auto& c : cells)
      if (c.method == method && c.rate == rate) return c;
    cells.push_back(SweepCell{method, rate, 0, 0, 0.0, 0.0});
    return cells.back();
  };
  for (const auto& t : trials) {
    SweepCell& c = find_cell(t.method, t.rate);
    if (t.ok) {
      ++c.n_ok;
      c.mean_rlne += t.rlne;
    } else {
      ++c.n_failed;
    }
  }
  for (auto& c : cells)
    if (c.n_ok > 0) c.mean_rlne /= c.n_ok;
  for (const auto& t : trials) {
    if (!t.ok) continue;
    SweepCell& c = find_cell(t.method, t.rate);
    double d = t.rlne - c.mean_rlne;
    c.std_rlne += d * d;
  }
  for (auto& c : cells)
    c.std_rlne = c.n_ok > 1 ? std::sqrt(c.std_rlne / (c.n_ok - 1)) : 0.0;
  return cells;
}

SweepResult sweep(const ExperimentConfig& config, int jobs,
                  const std::filesystem::path& out_dir, std::ostream* progress) {
  config.validate();
  if (jobs < 1) throw std::invalid_argument("sweep: jobs must be >= 1");

  struct Cell {
    std::string method;
    double rate;
    int trial;
  };
  std::vector<Cell> cells;
  for (const auto& method : config.methods)
    for (double rate : config.sampling_rates)
      for (int trial = 0; trial < config.trials; ++trial) cells.push_back({method, rate, trial});

  std::vector<TrialResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;

  RunTrialOptions options;
  options.out_dir = out_dir;

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& c = cells[i];
      results[i] = run_trial(config, c.method, c.rate, c.trial, options);
      std::size_t finished = done.fetch_add(1) + 1;
      if (progress) {
        std::scoped_lock lock(log_mutex);
        *progress << "[" << finished << "/" << cells.size() << "] "
                  << trial_id(c.method, c.rate, c.trial)
                  << (results[i].ok ? " rlne=" + format_double(results[i].rlne)
                                    : " FAILED: " + results[i].error)
                  << '\n';
      }
    }
  };

  int n_threads = std::min<int>(jobs, static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  SweepResult out;
  out.trials = std::move(results);
  std::stable_sort(out.trials.begin(), out.trials.end(),
                   [](const TrialResult& a, const TrialResult& b) {
                     return std::tie(a.method, a.rate, a.trial_index) <
                            std::tie(b.method, b.rate, b.trial_index);
                   });
  out.cells = aggregate(out.trials);
  for (const auto& t : out.trials)
    if (!t.ok) ++out.failed;

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_trials_csv(out.trials, config.sv_topk, out_dir / "trials.csv");
    write_timings_csv(out.trials, out_dir / "timings.csv");
    write_sweep_json(out, out_dir / "sweep.json");
    write_manifest_json(config, out_dir / "manifest.json");
  }
  return out;
}

void write_trials_csv(const std::vector<TrialResult>& trials, int sv_topk,
                      const std::filesystem::path& path) {
  CsvTable table;
  table.header = {"method",      "rate",     "trial",       "seed",     "ok",
                  "error",       "rlne",     "iters",       "stop_reason", "stage_count",
                  "certified",   "grad_norm", "lambda_min"};
  for (int i = 1; i <= sv_topk; ++i) table.header.push_back("sv_" + std::to_string(i));
  for (const auto& t : trials) {
    std::vector<std::string> row;
    row.push_back(t.method);
    row.push_back(format_double(t.rate));
    row.push_back(std::to_string(t.trial_index));
    row.push_back(std::to_string(t.seed));
    row.push_back(t.ok ? "1" : "0");
    std::string err = t.error;
    std::replace(err.begin(), err.end(), ',', ';');
    row.push_back(err);
    row.push_back(format_double(t.rlne));
    row.push_back(std::to_string(t.iters));
    row.push_back(t.stop_reason);
    row.push_back(t.spe ? std::to_string(t.spe->stage_count) : "");
    row.push_back(t.cert ? (t.cert->is_second_order ? "1" : "0") : "");
    row.push_back(t.cert ? format_double(t.cert->grad_norm) : "");
    row.push_back(t.cert ? format_double(t.cert->lambda_min_estimate) : "");
    for (int i = 0; i < sv_topk; ++i)
      row.push_back(i < t.sv_final.size() ? format_double(t.sv_final(i)) : "");
    table.rows.push_back(std::move(row));
  }
  write_table_csv(table, path);
}

void write_timings_csv(const std::vector<TrialResult>& trials,
                       const std::filesystem::path& path) {
  CsvTable table;
  table.header = {"method", "rate", "trial", "wall_time_s"};
  for (const auto& t : trials)
    table.rows.push_back({t.method, format_double(t.rate), std::to_string(t.trial_index),
                          format_double(t.wall_time_s)});
  write_table_csv(table, path);
}

void write_sweep_json(const SweepResult& result, const std::filesystem::path& path) {
  nlohmann::json j;
  j["failed"] = result.failed;
  j["trials"] = result.trials.size();
  j["cells"] = nlohmann::json::array();
  for (const auto& c : result.cells)
    j["cells"].push_back({{"method", c.method},
                          {"rate", c.rate},
                          {"n_ok", c.n_ok},
                          {"n_failed", c.n_failed},
                          {"mean_rlne", c.mean_rlne},
                          {"std_rlne", c.std_rlne}});
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void save_problem(const Problem& prob, const std::filesystem::path& json_path) {
  std::filesystem::path dir = json_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::string stem = json_path.stem().string();
  write_matrix_csv(prob.target, dir / (stem + "_target.csv"));
  write_mask_csv(prob.mask, dir / (stem + "_mask.csv"));
  nlohmann::json j;
  j["target"] = stem + "_target.csv";
  j["mask"] = stem + "_mask.csv";
  if (prob.ground_truth) {
    write_matrix_csv(*prob.ground_truth, dir / (stem + "_truth.csv"));
    j["ground_truth"] = stem + "_truth.csv";
  }
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot write " + json_path.string());
  out << j.dump(2) << '\n';
}

Problem load_problem(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open problem file: " + json_path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  std::filesystem::path dir = json_path.parent_path();
  Mat target = read_matrix_csv(dir / j.at("target").get<std::string>());
  Mask mask = read_mask_csv(dir / j.at("mask").get<std::string>());
  std::optional<Mat> truth;
  if (j.contains("ground_truth"))
    truth = read_matrix_csv(dir / j.at("ground_truth").get<std::string>());
  return Problem::from_observations(target, std::move(mask), std::move(truth));
}

namespace {

constexpr int kTuningTrialOffset = 1000000;

double mean_rlne_over_seeds(const ExperimentConfig& config, const std::string& method, double rate,
                            int tuning_seeds, const NnmConfig* nnm, const OmfConfig* omf) {
  double acc = 0.0;
  for (int s = 0; s < tuning_seeds; ++s) {
    int trial = kTuningTrialOffset + s;
    TrialInputs in = make_inputs(config, method, rate, trial);
    Mat recon;
    if (nnm) {
      recon = nnm_solve(in.problem, *nnm);
    } else {
      OmfConfig cfg = *omf;
      cfg.seed = derive_seed(trial_seed(config.seed, method, rate, trial), "init");
      recon = omf_solve(in.problem, cfg);
    }
    acc += rlne(in.truth, recon);
  }
  return acc / tuning_seeds;
}

}  // namespace

NnmConfig tune_nnm(const ExperimentConfig& config, double rate,
                   const std::vector<double>& lambda_grid, int tuning_seeds) {
  if (lambda_grid.empty()) throw std::invalid_argument("tune_nnm: empty grid");
  std::size_t best = tune_grid(lambda_grid.size(), [&](std::size_t i) {
    NnmConfig cfg = config.nnm;
    cfg.lambda = lambda_grid[i];
    return mean_rlne_over_seeds(config, "nnm", rate, tuning_seeds, &cfg, nullptr);
  });
  NnmConfig out = config.nnm;
  out.lambda = lambda_grid[best];
  return out;
}

OmfConfig tune_omf(const ExperimentConfig& config, double rate,
                   const std::vector<double>& ridge_grid, int tuning_seeds) {
  if (ridge_grid.empty()) throw std::invalid_argument("tune_omf: empty grid");
  std::size_t best = tune_grid(ridge_grid.size(), [&](std::size_t i) {
    OmfConfig cfg = config.omf;
    cfg.ridge = ridge_grid[i];
    return mean_rlne_over_seeds(config, "omf", rate, tuning_seeds, nullptr, &cfg);
  });
  OmfConfig out = config.omf;
  out.ridge = ridge_grid[best];
  return out;
}

}  // namespace dmf
