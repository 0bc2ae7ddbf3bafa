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

#include "dmf/baselines.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "dmf/rng.hpp"

namespace dmf {

void NnmConfig::validate() const {
  if (!(lambda > 0)) throw std::invalid_argument("NnmConfig: lambda must be positive");
  if (!(step > 0)) throw std::invalid_argument("NnmConfig: step must be positive");
  if (max_iters < 1) throw std::invalid_argument("NnmConfig: max_iters must be >= 1");
  if (!(tol > 0 && tol < 1)) throw std::invalid_argument("NnmConfig: tol must be in (0,1)");
}

void OmfConfig::validate(Index rows, Index cols) const {
  if (rank < 1) throw std::invalid_argument("OmfConfig: rank must be positive");
  if (rank > std::min(rows, cols))
    throw std::invalid_argument("OmfConfig: rank exceeds min(rows, cols)");
  if (max_iters < 1) throw std::invalid_argument("OmfConfig: max_iters must be >= 1");
  if (!(tol > 0 && tol < 1)) throw std::invalid_argument("OmfConfig: tol must be in (0,1)");
  if (ridge < 0) throw std::invalid_argument("OmfConfig: ridge must be nonnegative");
}

Mat svt_shrink(const Mat& m, double threshold) {
  if (threshold < 0) throw std::invalid_argument("svt_shrink: threshold must be nonnegative");
  SvdResult dec = svd(m);
  Vec shrunk = (dec.singular_values.array() - threshold).max(0.0);
  return dec.u * shrunk.asDiagonal() * dec.vt;
}

double nnm_objective(const Mat& x, const Problem& prob, double lambda) {
  double fit = 0.5 * apply_mask(x - prob.target, prob.mask).squaredNorm();
  return fit + lambda * singular_values(x).sum();
}

Mat nnm_solve(const Problem& prob, const NnmConfig& config, SolveInfo* info,
              std::vector<double>* objective_trace) {
  config.validate();
  Mat x = Mat::Zero(prob.rows(), prob.cols());
  if (objective_trace) objective_trace->push_back(nnm_objective(x, prob, config.lambda));
  SolveInfo local;
  const double blowup = 1e9 * std::max(1.0, prob.target.norm());
  for (int it = 1; it <= config.max_iters; ++it) {
    Mat grad = apply_mask(x - prob.target, prob.mask);
    Mat next = svt_shrink(x - config.step * grad, config.step * config.lambda);
    double change = (next - x).norm() / std::max(x.norm(), 1.0);
    x = std::move(next);
    local.iters = it;
    if (objective_trace) objective_trace->push_back(nnm_objective(x, prob, config.lambda));
    if (x.norm() > blowup) throw std::runtime_error("nnm_solve: iterates diverged");
    if (change < config.tol) {
      local.converged = true;
      break;
    }
  }
  local.objective = nnm_objective(x, prob, config.lambda);
  if (info) *info = local;
  return x;
}

double omf_objective(const Mat& u, const Mat& v, const Problem& prob, double ridge) {
  double fit = 0.5 * apply_mask(u * v.transpose() - prob.target, prob.mask).squaredNorm();
  return fit + 0.5 * ridge * (u.squaredNorm() + v.squaredNorm());
}

namespace {

/// Ridge least-squares update of every row of `out` holding `other` fixed:
/// row i of `out` fits the observed entries of line i of the target.
/// `transposed` selects whether lines are rows or columns of the problem.
void als_half_sweep(Mat& out, const Mat& other, const Problem& prob, double ridge,
                    bool transposed) {
  const int k = static_cast<int>(out.cols());
  Mat normal(k, k);
  Vec rhs(k);
  for (Index i = 0; i < out.rows(); ++i) {
    normal.setZero();
    rhs.setZero();
    Index observed = 0;
    Index line_len = transposed ? prob.rows() : prob.cols();
    for (Index j = 0; j < line_len; ++j) {
      bool seen = transposed ? prob.mask.at(j, i) : prob.mask.at(i, j);
      if (!seen) continue;
      ++observed;
      double s = transposed ? prob.target(j, i) : prob.target(i, j);
      normal.noalias() += other.row(j).transpose() * other.row(j);
      rhs.noalias() += s * other.row(j).transpose();
    }
    normal.diagonal().array() += ridge;
    if (ridge == 0.0) {
      Eigen::FullPivLU<Mat> lu(normal);
      if (!lu.isInvertible())
        throw std::runtime_error(
            "omf_solve: singular normal equations (line " + std::to_string(i) + " has " +
            std::to_string(observed) + " observations for rank " + std::to_string(k) +
            "); set ridge > 0");
      out.row(i) = lu.solve(rhs).transpose();
    } else {
      out.row(i) = normal.ldlt().solve(rhs).transpose();
    }
  }
}

}  // namespace

Mat omf_solve(const Problem& prob, const OmfConfig& config, SolveInfo* info,
              std::vector<double>* objective_trace) {
  config.validate(prob.rows(), prob.cols());
  const int k = config.rank;
  std::uint64_t seed = derive_seed(config.seed, "omf");
  Mat u = gaussian(prob.rows(), k, 1.0, derive_seed(seed, "u"));
  Mat v = gaussian(prob.cols(), k, 1.0, derive_seed(seed, "v"));

  double objective = omf_objective(u, v, prob, config.ridge);
  if (objective_trace) objective_trace->push_back(objective);
  SolveInfo local;
  for (int it = 1; it <= config.max_iters; ++it) {
    als_half_sweep(v, u, prob, config.ridge, /*transposed=*/true);
    if (objective_trace) objective_trace->push_back(omf_objective(u, v, prob, config.ridge));
    als_half_sweep(u, v, prob, config.ridge, /*transposed=*/false);
    double next_objective = omf_objective(u, v, prob, config.ridge);
    if (objective_trace) objective_trace->push_back(next_objective);
    local.iters = it;
    double drop = objective - next_objective;
    objective = next_objective;
    if (std::abs(drop) < config.tol * std::max(1.0, objective)) {
      local.converged = true;
      break;
    }
  }
  local.objective = objective;
  if (info) *info = local;
  return u * v.transpose();
}

}  // namespace dmf
