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

#include "dmf/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace dmf {

void RmsPropState::validate() const {
  if (v < 0) throw std::invalid_argument("RmsPropState: v must be nonnegative");
  if (t < 0) throw std::invalid_argument("RmsPropState: t must be nonnegative");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("RmsPropState: alpha must be in (0,1)");
  if (!(epsilon > 0)) throw std::invalid_argument("RmsPropState: epsilon must be positive");
  if (!(eta > 0)) throw std::invalid_argument("RmsPropState: eta must be positive");
  if (!(r > 0)) throw std::invalid_argument("RmsPropState: r must be positive");
  if (t_spe < 1) throw std::invalid_argument("RmsPropState: t_spe must be positive");
  if (t_burnin < 0) throw std::invalid_argument("RmsPropState: t_burnin must be nonnegative");
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "rmsprop") return Algorithm::RmsProp;
  if (name == "spe_rmsprop") return Algorithm::SpeRmsProp;
  throw std::invalid_argument("unknown algorithm: '" + name + "' (expected rmsprop|spe_rmsprop)");
}

std::string to_string(Algorithm algorithm) {
  return algorithm == Algorithm::RmsProp ? "rmsprop" : "spe_rmsprop";
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::MaxIters: return "max_iters";
    case StopReason::LossFloor: return "loss_floor";
    case StopReason::GradFloor: return "grad_floor";
    case StopReason::StageTarget: return "stage_target";
  }
  return "unknown";
}

namespace {

double base_lr(const RmsPropState& state, Algorithm algorithm) {
  if (algorithm == Algorithm::SpeRmsProp && state.t % state.t_spe == 0) return state.r;
  return state.eta;
}

/// V/A update and simultaneous weight update from gradients evaluated at the
/// incoming stack. Returns the effective learning rate.
double apply_update(WeightStack& stack, RmsPropState& state, const EvalResult& eval,
                    Algorithm algorithm) {
  if (!std::isfinite(eval.grad_sq_sum))
    throw std::runtime_error("rmsprop step: non-finite gradient at iteration " +
                             std::to_string(state.t));
  double lr0 = base_lr(state, algorithm);
  state.v = state.alpha * state.v + (1.0 - state.alpha) * eval.grad_sq_sum;
  double vhat = state.v / (1.0 - std::pow(state.alpha, static_cast<double>(state.t) + 1.0));
  double coeff = 1.0 / (std::sqrt(vhat) + state.epsilon);
  double eff_lr = lr0 * coeff;
  if (!(std::isfinite(eff_lr) && eff_lr > 0))
    throw std::runtime_error("rmsprop step: effective learning rate not positive/finite");
  for (int l = 0; l < stack.depth(); ++l) {
    if (eval.gradients[l].squaredNorm() != 0.0) stack.layers[l] -= eff_lr * eval.gradients[l];
  }
  state.t += 1;
  state.last_eff_lr = eff_lr;
  return eff_lr;
}

}  // namespace

double rmsprop_step(WeightStack& stack, RmsPropState& state, const Problem& prob) {
  state.validate();
  return apply_update(stack, state, evaluate(stack, prob), Algorithm::RmsProp);
}

double spe_rmsprop_step(WeightStack& stack, RmsPropState& state, const Problem& prob) {
  state.validate();
  return apply_update(stack, state, evaluate(stack, prob), Algorithm::SpeRmsProp);
}

RmsPropState burnin(RmsPropState state, const WeightStack& stack, const Problem& prob,
                    long t_burnin) {
  if (t_burnin < 0) throw std::invalid_argument("burnin: t_burnin must be nonnegative");
  state.validate();
  WeightStack scratch = stack;
  RmsPropState warm = state;
  warm.v = 0.0;
  warm.t = 0;
  for (long i = 0; i < t_burnin; ++i) rmsprop_step(scratch, warm, prob);
  RmsPropState out = state;
  out.v = warm.v;
  out.t = 0;
  out.last_eff_lr = 0.0;
  return out;
}

TrainOutcome train(WeightStack& stack, RmsPropState& state, const Problem& prob,
                   Algorithm algorithm, long max_iters, const StopRule& stop, long record_every,
                   const Recorder& recorder, const ExternalStop& external_stop) {
  if (max_iters < 1) throw std::invalid_argument("train: max_iters must be >= 1");
  state.validate();
  stack.validate();

  // Residual-norm scale above which a step counts toward the
  // sufficient-decrease diagnostics.
  constexpr double kLargeGradResidual = 1e-3;

  TrainOutcome outcome;
  int below_floor_streak = 0;
  double prev_loss = 0.0;
  bool prev_large = false;
  EvalWorkspace ws;

  for (long t = 0;; ++t) {
    evaluate_into(stack, prob, ws);
    const EvalResult& eval = ws.result;
    double grad_norm = std::sqrt(eval.grad_sq_sum);

    if (prev_large) {
      ++outcome.large_grad_steps;
      if (eval.loss > prev_loss) ++outcome.decrease_violations;
    }

    bool at_record = record_every > 0 && (t % record_every == 0);
    if (recorder && at_record) recorder(t, stack, state, eval.loss, grad_norm);

    outcome.final_loss = eval.loss;
    if (eval.loss < stop.loss_floor) {
      outcome.reason = StopReason::LossFloor;
      break;
    }
    if (external_stop && at_record && external_stop(t)) {
      outcome.reason = StopReason::StageTarget;
      break;
    }
    if (stop.grad_floor > 0 && at_record) {
      if (grad_norm < stop.grad_floor) {
        if (++below_floor_streak >= stop.grad_patience) {
          outcome.reason = StopReason::GradFloor;
          break;
        }
      } else {
        below_floor_streak = 0;
      }
    }
    if (t >= max_iters) {
      outcome.reason = StopReason::MaxIters;
      break;
    }

    prev_loss = eval.loss;
    prev_large = eval.residual.norm() >= kLargeGradResidual;
    apply_update(stack, state, eval, algorithm);
    outcome.steps = t + 1;
  }
  return outcome;
}

ScheduleParams schedule_from_tau(const TheoryConstants& c, double tau) {
  auto positive = [](double value, const char* name) {
    if (!(value > 0)) throw std::invalid_argument(std::string("schedule_from_tau: ") + name +
                                                  " must be positive");
  };
  positive(c.K, "K");
  positive(c.nu, "nu");
  positive(c.gamma, "gamma");
  positive(c.delta, "delta");
  positive(c.Lambda, "Lambda");
  positive(c.M, "M");
  positive(c.B, "B");
  positive(c.rho, "rho");
  positive(c.lambda_minus, "lambda_minus");
  positive(tau, "tau");
  if (c.depth < 1) throw std::invalid_argument("schedule_from_tau: depth must be >= 1");

  const double L = static_cast<double>(c.depth);
  // The curvature scale at the saddles targeted by the analysis is
  // O(sqrt(tau)); folding that into gamma gives every derived parameter its
  // stated tau exponent.
  const double gamma = c.gamma * std::sqrt(tau);

  ScheduleParams p;
  p.tau = tau;
  p.omega = std::pow(tau, -0.5);
  p.eta = (c.K * c.K * c.nu * c.nu * std::pow(gamma, 6.0) * c.delta * c.delta) /
          (64.0 * std::pow(L, 10.0) * std::pow(c.Lambda, 10.0) * std::pow(c.M, 10.0 * L - 10.0) *
           std::pow(c.B, 4.0) * c.rho * c.rho * tau * tau * p.omega * p.omega);
  p.r = (c.K * c.nu * std::pow(gamma, 4.0) * c.delta) /
        (8.0 * std::pow(L, 5.0) * std::pow(c.Lambda, 5.0) * std::pow(c.M, 5.0 * L - 5.0) *
         c.B * c.B * c.rho * tau);
  p.ell_thresh = (c.K * c.K * c.nu * c.nu * std::pow(gamma, 6.0) * c.delta) /
                 (2.0 * std::pow(L, 6.0) * std::pow(c.Lambda, 6.0) *
                  std::pow(c.M, 4.0 * L - 2.0) * c.B * c.B * c.rho * c.rho * tau);
  p.t_thresh = p.omega / (p.eta * gamma);
  p.g_thresh = p.ell_thresh / p.t_thresh;
  return p;
}

}  // namespace dmf
