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
#include <vector>

#include "dmf/model.hpp"

namespace dmf {

/// Nuclear-norm minimization in the regularized form
/// min_X 0.5 ||P_mask(X - S)||_F^2 + lambda ||X||_*, solved by proximal
/// gradient with singular-value thresholding. The objective is monotone
/// non-increasing for step <= 1.
struct NnmConfig {
  double lambda = 1e-2;
  double step = 1.0;
  int max_iters = 500;
  double tol = 1e-5;  ///< relative-change stop.

  void validate() const;
};

/// Explicit rank-k factorization min_{U,V} 0.5 ||P_mask(U V^T - S)||_F^2 +
/// ridge/2 (||U||_F^2 + ||V||_F^2), solved by alternating per-row ridge least
/// squares.
struct OmfConfig {
  int rank = 1;
  int max_iters = 200;
  double tol = 1e-9;  ///< relative objective-change stop.
  double ridge = 1e-6;
  std::uint64_t seed = 0;

  void validate(Index rows, Index cols) const;
};

/// Proximal operator of threshold * ||.||_*: soft-thresholds every singular
/// value.
Mat svt_shrink(const Mat& m, double threshold);

struct SolveInfo {
  int iters = 0;
  double objective = 0.0;
  bool converged = false;
};

double nnm_objective(const Mat& x, const Problem& prob, double lambda);
double omf_objective(const Mat& u, const Mat& v, const Problem& prob, double ridge);

/// objective_trace, when given, receives the objective after every iteration
/// (NNM) or half-sweep (OMF), starting with the initial value.
Mat nnm_solve(const Problem& prob, const NnmConfig& config, SolveInfo* info = nullptr,
              std::vector<double>* objective_trace = nullptr);
Mat omf_solve(const Problem& prob, const OmfConfig& config, SolveInfo* info = nullptr,
              std::vector<double>* objective_trace = nullptr);

/// Grid tuner: returns the index of the config with the smallest score
/// (mean RLNE over a held-out seed set); ties break to the earliest entry.
template <typename Score>
std::size_t tune_grid(std::size_t grid_size, Score&& score) {
  if (grid_size == 0) throw std::invalid_argument("tune_grid: empty grid");
  std::size_t best = 0;
  double best_score = score(std::size_t{0});
  for (std::size_t i = 1; i < grid_size; ++i) {
    double s = score(i);
    if (s < best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

}  // namespace dmf
