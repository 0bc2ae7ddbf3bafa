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

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "dmf/csv.hpp"
#include "dmf/experiment.hpp"
#include "dmf/model.hpp"
#include "dmf/trajectory.hpp"

using namespace dmf;

namespace {

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string cli_path() {
  const char* env = std::getenv("DMF_CLI");
  REQUIRE_MESSAGE(env != nullptr, "DMF_CLI must point at the dmf binary");
  return env;
}

std::filesystem::path work_dir() {
  auto dir = std::filesystem::temp_directory_path() / "dmfdyn_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

CliResult run_cli(const std::string& args) {
  auto out_file = work_dir() / "stdout.txt";
  auto err_file = work_dir() / "stderr.txt";
  std::string cmd = cli_path() + " " + args + " >" + out_file.string() + " 2>" + err_file.string();
  int status = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

std::filesystem::path write_tiny_config(const std::string& name, const std::string& extra = "") {
  auto path = work_dir() / name;
  std::ofstream out(path);
  out << R"({
    "n": 4, "rank": 1, "depth": 2, "std": 0.01,
    "sampling_rates": [1.0], "trials": 1, "methods": ["dmf", "nnm", "omf"],
    "seed": 3, "record_every": 50,
    "optimizer": {"eta": 0.01, "max_iters": 20000, "loss_floor": 1e-12},
    "baselines": {"nnm": {"lambda": 1e-4, "max_iters": 1500, "tol": 1e-8},
                  "omf": {"rank": 1}})"
      << extra << "\n}\n";
  return path;
}

}  // namespace

TEST_CASE("cli: missing config exits 2 and names the path") {
  CliResult r = run_cli("run --config /nonexistent/nope.json");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("/nonexistent/nope.json") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("cli run: tiny config produces a one-row trials.csv and a summary line") {
  auto config = write_tiny_config("tiny.json");
  auto out = work_dir() / "run_out";
  std::filesystem::remove_all(out);
  CliResult r = run_cli("run --config " + config.string() + " --out " + out.string());
  CAPTURE(r.err);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("method=dmf") != std::string::npos);
  CHECK(r.out.find("rlne=") != std::string::npos);
  CsvTable trials = read_table_csv(out / "trials.csv");
  CHECK(trials.rows.size() == 1);
}

TEST_CASE("cli run: non-dmf method warns that the optimizer block is ignored") {
  auto config = write_tiny_config("tiny2.json");
  auto out = work_dir() / "run_nnm";
  CliResult r = run_cli("run --config " + config.string() + " --method nnm --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(r.err.find("optimizer block ignored") != std::string::npos);
}

TEST_CASE("cli run: rerunning with unchanged inputs overwrites with identical content") {
  auto config = write_tiny_config("tiny3.json");
  auto out = work_dir() / "run_idem";
  std::filesystem::remove_all(out);
  CliResult r1 = run_cli("run --config " + config.string() + " --out " + out.string());
  std::string first = slurp(out / "trials.csv");
  CliResult r2 = run_cli("run --config " + config.string() + " --out " + out.string());
  CHECK(r1.exit_code == 0);
  CHECK(r2.exit_code == 0);
  CHECK(slurp(out / "trials.csv") == first);
}

TEST_CASE("cli sweep: empty sampling_rates exits 2") {
  auto path = work_dir() / "bad_rates.json";
  std::ofstream(path) << R"({"n": 4, "rank": 1, "depth": 2, "sampling_rates": [],
                             "trials": 1, "methods": ["dmf"]})";
  CliResult r = run_cli("sweep --config " + path.string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("sampling_rates") != std::string::npos);
}

TEST_CASE("cli sweep: job counts do not change trials.csv") {
  auto config = write_tiny_config("sweep.json");
  auto out1 = work_dir() / "sweep1";
  auto out2 = work_dir() / "sweep8";
  std::filesystem::remove_all(out1);
  std::filesystem::remove_all(out2);
  CliResult r1 = run_cli("sweep --config " + config.string() + " --out " + out1.string() + " --jobs 1");
  CliResult r2 = run_cli("sweep --config " + config.string() + " --out " + out2.string() + " --jobs 8");
  CHECK(r1.exit_code == 0);
  CHECK(r2.exit_code == 0);
  CHECK(slurp(out1 / "trials.csv") == slurp(out2 / "trials.csv"));
  CHECK(r1.out == r2.out);
}

TEST_CASE("cli analyze: staircase fixture counts three stages") {
  // build a staircase trajectory CSV fixture
  Trajectory traj;
  traj.sv_k = 1;
  double level = 100.0;
  long iter = 0;
  auto push = [&](double loss) {
    TrajectorySample s;
    s.iter = iter;
    iter += 100;
    s.loss = loss;
    s.sv_topk = Vec::Zero(1);
    traj.samples.push_back(s);
  };
  for (int stage = 0; stage < 3; ++stage) {
    for (int i = 0; i < 30; ++i) push(level);
    for (int i = 1; i <= 15; ++i) push(level * std::pow(10.0, -2.0 * i / 15.0));
    level *= 1e-2;
  }
  for (int i = 0; i < 20; ++i) push(level);
  auto fixture = work_dir() / "staircase.csv";
  write_trajectory_csv(traj, fixture);

  CliResult r = run_cli("analyze --trajectory " + fixture.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("\"stage_count\": 3") != std::string::npos);
}

TEST_CASE("cli analyze: constant-loss fixture has zero stages") {
  Trajectory traj;
  traj.sv_k = 1;
  for (int i = 0; i < 40; ++i) {
    TrajectorySample s;
    s.iter = i * 100;
    s.loss = 2.0;
    s.sv_topk = Vec::Zero(1);
    traj.samples.push_back(s);
  }
  auto fixture = work_dir() / "constant.csv";
  write_trajectory_csv(traj, fixture);
  CliResult r = run_cli("analyze --trajectory " + fixture.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("\"stage_count\": 0") != std::string::npos);
}

TEST_CASE("cli analyze: malformed csv exits 2 with a row number") {
  auto fixture = work_dir() / "broken.csv";
  std::ofstream(fixture) << "iter,loss,eff_lr\n0,1.0,0\n100,banana,0\n";
  CliResult r = run_cli("analyze --trajectory " + fixture.string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("row 3") != std::string::npos);
}

TEST_CASE("cli analyze reproduces a stored spe report") {
  auto config = write_tiny_config("tiny4.json");
  auto out = work_dir() / "run_spe";
  std::filesystem::remove_all(out);
  CliResult r = run_cli("run --config " + config.string() + " --out " + out.string());
  REQUIRE(r.exit_code == 0);
  std::string id = trial_id("dmf", 1.0, 0);
  std::string stored = slurp(out / "spe" / (id + ".json"));
  REQUIRE_FALSE(stored.empty());
  CliResult again =
      run_cli("analyze --trajectory " + (out / "trajectories" / (id + ".csv")).string());
  CHECK(again.exit_code == 0);
  CHECK(again.out == stored);
}

TEST_CASE("cli certify: perfect fit passes, saddle fails with exit 4") {
  auto dir = work_dir() / "certify";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  Mat target = Mat::Constant(1, 1, 1.0);
  Problem prob = Problem::from_observations(target, Mask::full(1, 1));
  save_problem(prob, dir / "problem.json");

  WeightStack fit;
  fit.layers = {Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, 1.0)};
  save_checkpoint(fit, dir / "ckpt_fit", 10);
  WeightStack saddle;
  saddle.layers = {Mat::Zero(1, 1), Mat::Zero(1, 1)};
  save_checkpoint(saddle, dir / "ckpt_saddle", 0);

  CliResult good = run_cli("certify --checkpoint " + (dir / "ckpt_fit").string() + " --problem " +
                           (dir / "problem.json").string() + " --tau-g 1e-3 --tau-h 1e-2");
  CHECK(good.exit_code == 0);
  CHECK(good.out.find("\"is_second_order\": true") != std::string::npos);

  CliResult bad = run_cli("certify --checkpoint " + (dir / "ckpt_saddle").string() + " --problem " +
                          (dir / "problem.json").string() + " --tau-g 1e-3 --tau-h 0.5");
  CHECK(bad.exit_code == 4);
  CHECK(bad.out.find("\"is_second_order\": false") != std::string::npos);

  CliResult vacuous = run_cli("certify --checkpoint " + (dir / "ckpt_saddle").string() +
                              " --problem " + (dir / "problem.json").string() +
                              " --tau-g 1e9 --tau-h 1e9");
  CHECK(vacuous.exit_code == 0);
}

TEST_CASE("cli certify: dimension mismatch exits 2") {
  auto dir = work_dir() / "certify_mismatch";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  Mat target = gaussian(3, 3, 1.0, 1);
  save_problem(Problem::from_observations(target, Mask::full(3, 3)), dir / "problem.json");
  WeightStack stack;
  stack.layers = {Mat::Zero(2, 2)};
  save_checkpoint(stack, dir / "ckpt", 0);
  CliResult r = run_cli("certify --checkpoint " + (dir / "ckpt").string() + " --problem " +
                        (dir / "problem.json").string());
  CHECK(r.exit_code == 2);
}

TEST_CASE("cli tune: prints per-rate selections") {
  auto path = work_dir() / "tune.json";
  std::ofstream(path) << R"({"n": 10, "rank": 1, "depth": 2, "sampling_rates": [0.6],
                             "trials": 1, "methods": ["nnm"], "seed": 4,
                             "baselines": {"nnm": {"max_iters": 600, "tol": 1e-6}}})";
  CliResult r = run_cli("tune --config " + path.string() + " --method nnm --tuning-seeds 2");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("nnm_lambda") != std::string::npos);
}
