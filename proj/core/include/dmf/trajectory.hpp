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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmf/model.hpp"
#include "dmf/optimizer.hpp"

namespace dmf {

struct TrajectorySample {
  long iter = 0;
  double loss = 0.0;
  Vec sv_topk;            ///< leading singular values of the product, descending.
  double eff_lr = 0.0;    ///< step size applied by the preceding step; 0 at iter 0.
  double theta_balance = 0.0;
  double grad_norm = 0.0; ///< Frobenius norm of the concatenated layer gradients.
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  int sv_k = 10;
};

/// Appends one sample computed from scratch at the current stack.
void record(Trajectory& traj, const WeightStack& stack, const Problem& prob,
            const RmsPropState& state);

/// Same sample, with loss and gradient norm already in hand (the training
/// loop computes them anyway). Only the singular values and balancedness are
/// recomputed.
void record_precomputed(Trajectory& traj, const WeightStack& stack, long iter, double loss,
                        double grad_norm, const RmsPropState& state);

/// CSV layout: iter,loss,sv_1..sv_k,eff_lr,theta,grad_norm with a header row.
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

struct SegmentationParams {
  /// Decline threshold on the smoothed loss slope, in decades of loss per
  /// recorded sample (0.005 = half a decade per 100 samples).
  double rate_threshold = 0.005;
  int window = 11;      ///< centered moving-average width for the slope.
  int min_segment = 5;  ///< runs shorter than this merge into a neighbor.
};

struct Segment {
  enum class Kind { Plateau, Decline };
  Kind kind = Kind::Plateau;
  int start_index = 0;  ///< sample indices, inclusive.
  int end_index = 0;
  long start_iter = 0;  ///< iteration numbers of those samples.
  long end_iter = 0;
  double mean_loss_rate = 0.0;  ///< mean smoothed slope, decades per sample.
};

/// One saddle-point-escape stage: a decline and the plateau leading into it.
/// The plateau is absent for a decline that opens the trajectory.
struct SpeStage {
  std::optional<Segment> plateau;
  Segment decline;
};

struct SpeReport {
  std::vector<Segment> segments;  ///< tiles the trajectory, kinds alternating.
  std::vector<SpeStage> stages;
  int stage_count = 0;
  SegmentationParams params;
};

/// Segments the loss curve into plateau/decline runs from the smoothed slope
/// of log10(loss) and counts escape stages. Requires at least
/// 2*min_segment samples. A decline with no preceding plateau still counts as
/// a stage.
SpeReport detect_spe(const Trajectory& traj, const SegmentationParams& params = {});

std::string spe_report_to_json(const SpeReport& report);
void write_spe_report_json(const SpeReport& report, const std::filesystem::path& path);

}  // namespace dmf
