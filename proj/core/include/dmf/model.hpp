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
#include <optional>
#include <vector>

#include "dmf/matrix.hpp"

namespace dmf {

/// Deep linear factorization W = W_L ... W_1. layers[l] holds W_{l+1} with
/// shape n_{l+1} x n_l, so adjacent shapes chain. The (identity) input matrix
/// is implicit and never stored or updated.
struct WeightStack {
  std::vector<Mat> layers;

  int depth() const { return static_cast<int>(layers.size()); }

  /// [n_0, n_1, ..., n_L].
  std::vector<Index> dims() const;

  Index param_count() const;

  /// Throws std::invalid_argument if shapes do not chain or entries are
  /// non-finite.
  void validate() const;
};

/// Matrix-completion instance: observed entries of S (zero off-mask) plus the
/// observation pattern. ground_truth is the noise-free matrix, used only for
/// error reporting, never visible to solvers.
struct Problem {
  Mat target;
  Mask mask;
  std::optional<Mat> ground_truth;

  /// Masks `observations` down to the pattern and validates shapes.
  static Problem from_observations(const Mat& observations, Mask mask,
                                   std::optional<Mat> ground_truth = std::nullopt);

  Index rows() const { return target.rows(); }
  Index cols() const { return target.cols(); }
};

/// i.i.d. N(0, std^2) layers for the given dimension chain [n_0..n_L].
/// Small-std Gaussian initialization is approximately balanced; the realized
/// balancedness is measured, not constructed.
WeightStack init_balanced(const std::vector<Index>& dims, double std, std::uint64_t seed);

/// End-to-end product W_L ... W_1.
Mat product(const WeightStack& stack);

/// 0.5 * || P_mask(product - target) ||_F^2.
double loss(const WeightStack& stack, const Problem& prob);

/// P_mask(product - target); the gradient of the loss with respect to the
/// product matrix.
Mat residual(const WeightStack& stack, const Problem& prob);

/// Analytic per-layer gradients G_l = (W_{l+1:L})^T * residual * (W_{1:l-1})^T
/// with empty side products read as identity. Same shapes as the layers.
std::vector<Mat> layer_gradients(const WeightStack& stack, const Problem& prob);

/// Smallest theta for which the stack is theta-balanced:
/// max_l || W_{l+1}^T W_{l+1} - W_l W_l^T ||_F. Zero for depth 1.
double balancedness(const WeightStack& stack);

/// One fused pass computing everything a training step needs from the current
/// stack. Matches the individual operations exactly.
struct EvalResult {
  double loss = 0.0;
  Mat residual;
  std::vector<Mat> gradients;
  double grad_sq_sum = 0.0;
};
EvalResult evaluate(const WeightStack& stack, const Problem& prob);

/// Reusable buffers for the training loop; repeated evaluate() allocations
/// dominate the per-iteration cost otherwise.
struct EvalWorkspace {
  std::vector<Mat> prefixes;
  std::vector<Mat> suffixes;
  Mat left;
  EvalResult result;
};

/// Identical math to evaluate(), writing into ws.result.
void evaluate_into(const WeightStack& stack, const Problem& prob, EvalWorkspace& ws);

/// Concatenated column-major layer entries, layer 1 first.
Vec flatten(const std::vector<Mat>& mats);
Vec flatten_stack(const WeightStack& stack);
void add_scaled(WeightStack& stack, const Vec& direction, double scale);

/// Checkpoints: one CSV per layer plus manifest.json (dims, depth, iteration).
void save_checkpoint(const WeightStack& stack, const std::filesystem::path& dir, long iteration);
std::pair<WeightStack, long> load_checkpoint(const std::filesystem::path& dir);

}  // namespace dmf
