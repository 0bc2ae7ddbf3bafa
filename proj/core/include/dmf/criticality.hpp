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
#include <string>

#include "dmf/model.hpp"

namespace dmf {

/// Hessian-vector product of the weight-space objective by central
/// differences of the analytic gradient:
/// (g(theta + step v) - g(theta - step v)) / (2 step).
/// v is a flat vector over all trainable parameters. Throws on length
/// mismatch, non-positive step, or non-finite output.
Vec hvp(const WeightStack& stack, const Problem& prob, const Vec& v, double step);

struct MinEigResult {
  double lambda_min = 0.0;
  int iters = 0;
  bool converged = false;
};

/// Smallest eigenvalue of the weight-space Hessian, estimated by Lanczos with
/// full reorthogonalization on the hvp operator. Returns the best estimate
/// with converged=false if max_iters runs out first.
MinEigResult min_eigenvalue(const WeightStack& stack, const Problem& prob, double tol,
                            int max_iters, std::uint64_t seed);

struct CriticalityCert {
  double tau_g = 0.0;
  double tau_h = 0.0;
  double grad_norm = 0.0;       ///< || nabla phi || over the weights.
  double residual_norm = 0.0;   ///< || nabla l(W) ||_F, reported for reference.
  double lambda_min_estimate = 0.0;
  int lanczos_iters = 0;
  bool lanczos_converged = false;
  bool is_second_order = false;  ///< grad_norm <= tau_g and lambda_min >= -tau_h.
};

struct CertifyOptions {
  double tol = 1e-6;
  int max_iters = 200;
  std::uint64_t seed = 0;
};

CriticalityCert certify(const WeightStack& stack, const Problem& prob, double tau_g, double tau_h,
                        const CertifyOptions& options = {});

std::string cert_to_json(const CriticalityCert& cert);
void write_cert_json(const CriticalityCert& cert, const std::filesystem::path& path);

}  // namespace dmf
