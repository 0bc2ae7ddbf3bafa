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

#include "dmf/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dmf/csv.hpp"

namespace dmf {

namespace {

TrajectorySample make_sample(const Trajectory& traj, const WeightStack& stack, long iter,
                             double loss_value, double grad_norm, const RmsPropState& state) {
  TrajectorySample s;
  s.iter = iter;
  s.loss = loss_value;
  Vec sv = singular_values(product(stack));
  int k = std::min<int>(traj.sv_k, static_cast<int>(sv.size()));
  s.sv_topk = sv.head(k);
  s.eff_lr = state.last_eff_lr;
  s.theta_balance = balancedness(stack);
  s.grad_norm = grad_norm;
  return s;
}

}  // namespace

void record(Trajectory& traj, const WeightStack& stack, const Problem& prob,
            const RmsPropState& state) {
  EvalResult eval = evaluate(stack, prob);
  traj.samples.push_back(
      make_sample(traj, stack, state.t, eval.loss, std::sqrt(eval.grad_sq_sum), state));
}

void record_precomputed(Trajectory& traj, const WeightStack& stack, long iter, double loss_value,
                        double grad_norm, const RmsPropState& state) {
  traj.samples.push_back(make_sample(traj, stack, iter, loss_value, grad_norm, state));
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
  CsvTable table;
  int k = traj.sv_k;
  table.header = {"iter", "loss"};
  for (int i = 1; i <= k; ++i) table.header.push_back("sv_" + std::to_string(i));
  table.header.insert(table.header.end(), {"eff_lr", "theta", "grad_norm"});
  for (const auto& s : traj.samples) {
    std::vector<std::string> row;
    row.push_back(std::to_string(s.iter));
    row.push_back(format_double(s.loss));
    for (int i = 0; i < k; ++i)
      row.push_back(format_double(i < s.sv_topk.size() ? s.sv_topk(i) : 0.0));
    row.push_back(format_double(s.eff_lr));
    row.push_back(format_double(s.theta_balance));
    row.push_back(format_double(s.grad_norm));
    table.rows.push_back(std::move(row));
  }
  write_table_csv(table, path);
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  CsvTable table = read_table_csv(path);
  auto column = [&](const std::string& name) -> int {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw CsvError(1, "missing column: " + name);
    return static_cast<int>(it - table.header.begin());
  };
  int c_iter = column("iter");
  int c_loss = column("loss");
  std::vector<int> c_sv;
  for (int i = 1;; ++i) {
    auto it = std::find(table.header.begin(), table.header.end(), "sv_" + std::to_string(i));
    if (it == table.header.end()) break;
    c_sv.push_back(static_cast<int>(it - table.header.begin()));
  }
  auto optional_column = [&](const std::string& name) -> int {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    return it == table.header.end() ? -1 : static_cast<int>(it - table.header.begin());
  };
  int c_lr = optional_column("eff_lr");
  int c_theta = optional_column("theta");
  int c_grad = optional_column("grad_norm");

  Trajectory traj;
  traj.sv_k = static_cast<int>(c_sv.size());
  long lineno = 1;
  for (const auto& row : table.rows) {
    ++lineno;
    TrajectorySample s;
    try {
      s.iter = static_cast<long>(parse_double(row[c_iter]));
      s.loss = parse_double(row[c_loss]);
      s.sv_topk.resize(static_cast<Index>(c_sv.size()));
      for (std::size_t i = 0; i < c_sv.size(); ++i) s.sv_topk(static_cast<Index>(i)) = parse_double(row[c_sv[i]]);
      if (c_lr >= 0) s.eff_lr = parse_double(row[c_lr]);
      if (c_theta >= 0) s.theta_balance = parse_double(row[c_theta]);
      if (c_grad >= 0) s.grad_norm = parse_double(row[c_grad]);
    } catch (const std::invalid_argument& e) {
      throw CsvError(lineno, e.what());
    }
    traj.samples.push_back(std::move(s));
  }
  return traj;
}

namespace {

struct Run {
  bool decline;
  int begin;  // inclusive sample indices
  int end;
};

std::vector<Run> coalesce(std::vector<Run> runs) {
  std::vector<Run> out;
  for (const Run& r : runs) {
    if (!out.empty() && out.back().decline == r.decline)
      out.back().end = r.end;
    else
      out.push_back(r);
  }
  return out;
}

}  // namespace

SpeReport detect_spe(const Trajectory& traj, const SegmentationParams& params) {
  const int n = static_cast<int>(traj.samples.size());
  if (params.min_segment < 1) throw std::invalid_argument("detect_spe: min_segment must be >= 1");
  if (params.window < 1) throw std::invalid_argument("detect_spe: window must be >= 1");
  if (n < 2 * params.min_segment)
    throw std::invalid_argument("detect_spe: trajectory too short (" + std::to_string(n) +
                                " samples, need " + std::to_string(2 * params.min_segment) + ")");

  std::vector<double> loglosses(n);
  for (int i = 0; i < n; ++i)
    loglosses[i] = std::log10(std::max(traj.samples[i].loss, 1e-300));

  // centered slope, one-sided at the ends
  std::vector<double> slope(n, 0.0);
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - 1);
    int hi = std::min(n - 1, i + 1);
    if (hi > lo) slope[i] = (loglosses[hi] - loglosses[lo]) / static_cast<double>(hi - lo);
  }
  std::vector<double> smooth(n, 0.0);
  int half = params.window / 2;
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - half);
    int hi = std::min(n - 1, i + half);
    double acc = 0.0;
    for (int j = lo; j <= hi; ++j) acc += slope[j];
    smooth[i] = acc / static_cast<double>(hi - lo + 1);
  }

  std::vector<Run> runs;
  for (int i = 0; i < n; ++i) {
    bool decline = smooth[i] < -params.rate_threshold;
    if (runs.empty() || runs.back().decline != decline)
      runs.push_back({decline, i, i});
    else
      runs.back().end = i;
  }

  // absorb short runs, leftmost first, until every run meets min_segment
  bool merged = true;
  while (merged && runs.size() > 1) {
    merged = false;
    for (std::size_t j = 0; j < runs.size(); ++j) {
      if (runs[j].end - runs[j].begin + 1 < params.min_segment) {
        if (j > 0) {
          runs[j - 1].end = runs[j].end;
        } else {
          runs[1].begin = runs[0].begin;
        }
        runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(j));
        runs = coalesce(std::move(runs));
        merged = true;
        break;
      }
    }
  }

  SpeReport report;
  report.params = params;
  for (const Run& r : runs) {
    Segment seg;
    seg.kind = r.decline ? Segment::Kind::Decline : Segment::Kind::Plateau;
    seg.start_index = r.begin;
    seg.end_index = r.end;
    seg.start_iter = traj.samples[r.begin].iter;
    seg.end_iter = traj.samples[r.end].iter;
    double acc = 0.0;
    for (int i = r.begin; i <= r.end; ++i) acc += smooth[i];
    seg.mean_loss_rate = acc / static_cast<double>(r.end - r.begin + 1);
    report.segments.push_back(seg);
  }

  for (std::size_t j = 0; j < report.segments.size(); ++j) {
    if (report.segments[j].kind != Segment::Kind::Decline) continue;
    SpeStage stage;
    stage.decline = report.segments[j];
    if (j > 0 && report.segments[j - 1].kind == Segment::Kind::Plateau)
      stage.plateau = report.segments[j - 1];
    report.stages.push_back(std::move(stage));
  }
  report.stage_count = static_cast<int>(report.stages.size());
  return report;
}

namespace {

nlohmann::json segment_to_json(const Segment& seg) {
  return {{"kind", seg.kind == Segment::Kind::Decline ? "decline" : "plateau"},
          {"start_index", seg.start_index},
          {"end_index", seg.end_index},
          {"start_iter", seg.start_iter},
          {"end_iter", seg.end_iter},
          {"mean_loss_rate", seg.mean_loss_rate}};
}

}  // namespace

std::string spe_report_to_json(const SpeReport& report) {
  nlohmann::json j;
  j["stage_count"] = report.stage_count;
  j["params"] = {{"rate_threshold", report.params.rate_threshold},
                 {"window", report.params.window},
                 {"min_segment", report.params.min_segment}};
  j["segments"] = nlohmann::json::array();
  for (const auto& seg : report.segments) j["segments"].push_back(segment_to_json(seg));
  j["stages"] = nlohmann::json::array();
  for (const auto& stage : report.stages) {
    nlohmann::json js;
    js["decline"] = segment_to_json(stage.decline);
    if (stage.plateau) js["plateau"] = segment_to_json(*stage.plateau);
    j["stages"].push_back(std::move(js));
  }
  return j.dump(2);
}

void write_spe_report_json(const SpeReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << spe_report_to_json(report) << '\n';
}

}  // namespace dmf
