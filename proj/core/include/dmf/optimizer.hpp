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

#include <functional>
#include <string>

#include "dmf/model.hpp"

namespace dmf {

/// Full-batch RMSProp with a single scalar EMA accumulator over the summed
/// squared gradient norms of every layer. The adaptive coefficient
/// A(t) = 1 / (sqrt(V(t+1) / (1 - alpha^(t+1))) + epsilon) multiplies all
/// layers alike, so the update is a global adaptive step size rather than
/// per-parameter scaling.
struct RmsPropState {
  double v = 0.0;      ///< EMA accumulator V(t).
  long t = 0;          ///< iterations taken.
  double alpha = 0.99;
  double epsilon = 1e-8;
  double eta = 1e-3;   ///< base learning rate.
  double r = 1e-2;     ///< periodic large learning rate (spe variant only).
  long t_spe = 500;    ///< large-step period.
  long t_burnin = 100;

  /// Step size actually applied by the most recent step (eta*A or r*A);
  /// zero before the first step.
  double last_eff_lr = 0.0;

  void validate() const;
};

enum class Algorithm { RmsProp, SpeRmsProp };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm algorithm);

/// One step of the plain variant. All layer gradients are evaluated at the
/// incoming stack and applied simultaneously. Returns the effective learning
/// rate eta*A(t). Throws std::runtime_error on non-finite gradients.
double rmsprop_step(WeightStack& stack, RmsPropState& state, const Problem& prob);

/// One step of the increasing-learning-rate variant: identical except the
/// base step is r instead of eta whenever t mod t_spe == 0.
double spe_rmsprop_step(WeightStack& stack, RmsPropState& state, const Problem& prob);

/// Runs t_burnin plain steps on a scratch copy of the stack and returns a
/// fresh state whose accumulator is the resulting V(T_burnin) with the
/// iteration counter reset. The scratch weights are discarded.
RmsPropState burnin(RmsPropState state, const WeightStack& stack, const Problem& prob,
                    long t_burnin);

struct StopRule {
  double loss_floor = 1e-10;
  /// Gradient-norm stop; disabled when <= 0. Fires after the norm stays below
  /// the floor for `grad_patience` consecutive recorded points.
  double grad_floor = 0.0;
  int grad_patience = 100;
};

enum class StopReason { MaxIters, LossFloor, GradFloor, StageTarget };
std::string to_string(StopReason reason);

struct TrainOutcome {
  StopReason reason = StopReason::MaxIters;
  long steps = 0;          ///< optimizer steps applied.
  double final_loss = 0.0;
  /// Diagnostics for the sufficient-decrease check: of the steps taken from a
  /// point with residual norm >= 1e-3, how many increased the loss.
  long large_grad_steps = 0;
  long decrease_violations = 0;
};

/// Called at the recording cadence with the current (pre-step) stack state.
using Recorder = std::function<void(long iter, const WeightStack& stack,
                                    const RmsPropState& state, double loss, double grad_norm)>;

/// Checked at the recording cadence, right after the recorder; returning true
/// ends the run with StopReason::StageTarget. Lets callers stop on conditions
/// computed from the recorded trajectory (e.g. a target number of loss-curve
/// stages).
using ExternalStop = std::function<bool(long iter)>;

/// Drives the configured step op until a stop rule fires or max_iters steps
/// have been applied. The recorder runs every record_every iterations
/// (including iteration 0) when provided.
TrainOutcome train(WeightStack& stack, RmsPropState& state, const Problem& prob,
                   Algorithm algorithm, long max_iters, const StopRule& stop, long record_every,
                   const Recorder& recorder, const ExternalStop& external_stop = nullptr);

/// User-supplied constants of the convergence analysis. gamma enters the
/// schedule scaled by sqrt(tau), which is what fixes the documented
/// tau-dependencies of every derived quantity.
struct TheoryConstants {
  double K = 1.0;
  double nu = 1.0;
  double gamma = 1.0;
  double delta = 1.0;
  double Lambda = 1.0;
  double M = 1.0;
  double B = 1.0;
  double rho = 1.0;
  double lambda_minus = 1.0;
  int depth = 1;
};

struct ScheduleParams {
  double tau;
  double eta;         // O(tau^2)
  double r;           // O(tau)
  double omega;       // O(tau^-1/2)
  double ell_thresh;  // O(tau^2)
  double t_thresh;    // O(tau^-3)
  double g_thresh;    // O(tau^5)
};

/// Derives the parameter schedule from the accuracy target tau. Throws
/// std::invalid_argument on non-positive constants.
ScheduleParams schedule_from_tau(const TheoryConstants& constants, double tau);

}  // namespace dmf
