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

#include "dmf/criticality.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "dmf/rng.hpp"

namespace dmf {

Vec hvp(const WeightStack& stack, const Problem& prob, const Vec& v, double step) {
  if (v.size() != stack.param_count())
    throw std::invalid_argument("hvp: direction length does not match parameter count");
  if (!(step > 0)) throw std::invalid_argument("hvp: step must be positive");
  if (v.squaredNorm() == 0.0) return Vec::Zero(v.size());

  WeightStack plus = stack;
  add_scaled(plus, v, step);
  WeightStack minus = stack;
  add_scaled(minus, v, -step);
  Vec g_plus = flatten(layer_gradients(plus, prob));
  Vec g_minus = flatten(layer_gradients(minus, prob));
  Vec result = (g_plus - g_minus) / (2.0 * step);
  if (!result.allFinite()) throw std::runtime_error("hvp: non-finite result");
  return result;
}

namespace {

double fd_step_for(const WeightStack& stack) {
  // Differencing scale for unit directions, tied to the parameter magnitude.
  double theta_norm = flatten_stack(stack).norm();
  return 1e-5 * std::max(1.0, theta_norm);
}

}  // namespace

MinEigResult min_eigenvalue(const WeightStack& stack, const Problem& prob, double tol,
                            int max_iters, std::uint64_t seed) {
  if (!(tol > 0)) throw std::invalid_argument("min_eigenvalue: tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("min_eigenvalue: max_iters must be >= 1");
  const Index dim = stack.param_count();
  const double step = fd_step_for(stack);
  const int kmax = static_cast<int>(std::min<Index>(max_iters, dim));

  Rng rng(derive_seed(seed, "lanczos"));
  Vec q(dim);
  for (Index i = 0; i < dim; ++i) q(i) = rng.gaussian();
  q.normalize();

  std::vector<Vec> basis;
  basis.reserve(static_cast<std::size_t>(kmax));
  std::vector<double> alphas, betas;
  basis.push_back(q);

  MinEigResult result;
  double prev_theta = std::numeric_limits<double>::quiet_NaN();
  int settle_streak = 0;

  for (int k = 0; k < kmax; ++k) {
    Vec w = hvp(stack, prob, basis[static_cast<std::size_t>(k)], step);
    double alpha = basis[static_cast<std::size_t>(k)].dot(w);
    alphas.push_back(alpha);
    w -= alpha * basis[static_cast<std::size_t>(k)];
    if (k > 0) w -= betas[static_cast<std::size_t>(k - 1)] * basis[static_cast<std::size_t>(k - 1)];
    // full reorthogonalization, twice
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& b : basis) w -= b.dot(w) * b;

    // Ritz values of the current tridiagonal
    int m = k + 1;
    Mat tri = Mat::Zero(m, m);
    for (int i = 0; i < m; ++i) tri(i, i) = alphas[static_cast<std::size_t>(i)];
    for (int i = 0; i + 1 < m; ++i) {
      tri(i, i + 1) = betas[static_cast<std::size_t>(i)];
      tri(i + 1, i) = betas[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(tri);
    int min_idx = 0;
    es.eigenvalues().minCoeff(&min_idx);
    double theta = es.eigenvalues()(min_idx);
    result.lambda_min = theta;
    result.iters = m;

    double beta = w.norm();
    double ritz_residual = beta * std::abs(es.eigenvectors()(m - 1, min_idx));
    double scale = std::max(1.0, std::abs(theta));
    if (std::isfinite(prev_theta) && std::abs(theta - prev_theta) <= tol * scale)
      ++settle_streak;
    else
      settle_streak = 0;
    if (ritz_residual <= tol * scale && (m >= 2 || dim == 1)) {
      result.converged = true;
      return result;
    }
    if (settle_streak >= 3 && m >= 5) {
      result.converged = true;
      return result;
    }
    prev_theta = theta;

    if (beta < 1e-14 * scale || m == dim) {
      // invariant subspace; Ritz values are exact for it
      result.converged = true;
      return result;
    }
    betas.push_back(beta);
    basis.push_back(w / beta);
  }
  return result;
}

CriticalityCert certify(const WeightStack& stack, const Problem& prob, double tau_g, double tau_h,
                        const CertifyOptions& options) {
  if (!(tau_g > 0) || !(tau_h > 0))
    throw std::invalid_argument("certify: tolerances must be positive");
  CriticalityCert cert;
  cert.tau_g = tau_g;
  cert.tau_h = tau_h;
  EvalResult eval = evaluate(stack, prob);
  cert.grad_norm = std::sqrt(eval.grad_sq_sum);
  cert.residual_norm = eval.residual.norm();
  MinEigResult eig = min_eigenvalue(stack, prob, options.tol, options.max_iters, options.seed);
  cert.lambda_min_estimate = eig.lambda_min;
  cert.lanczos_iters = eig.iters;
  cert.lanczos_converged = eig.converged;
  cert.is_second_order = cert.grad_norm <= tau_g && cert.lambda_min_estimate >= -tau_h;
  return cert;
}

std::string cert_to_json(const CriticalityCert& cert) {
  nlohmann::json j;
  j["tau_g"] = cert.tau_g;
  j["tau_h"] = cert.tau_h;
  j["grad_norm"] = cert.grad_norm;
  j["residual_norm"] = cert.residual_norm;
  j["lambda_min_estimate"] = cert.lambda_min_estimate;
  j["lanczos_iters"] = cert.lanczos_iters;
  j["lanczos_converged"] = cert.lanczos_converged;
  j["is_second_order"] = cert.is_second_order;
  return j.dump(2);
}

void write_cert_json(const CriticalityCert& cert, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << cert_to_json(cert) << '\n';
}

}  // namespace dmf
