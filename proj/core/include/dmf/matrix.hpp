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

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace dmf {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Boolean observation pattern over a rows x cols matrix, row-major.
struct Mask {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint8_t> observed;

  Mask() = default;
  Mask(Index rows, Index cols, bool value = false);

  bool at(Index i, Index j) const { return observed[static_cast<std::size_t>(i * cols + j)] != 0; }
  void set(Index i, Index j, bool value) {
    observed[static_cast<std::size_t>(i * cols + j)] = value ? 1 : 0;
  }

  Index count() const;
  double sampling_rate() const;

  static Mask full(Index rows, Index cols) { return Mask(rows, cols, true); }
};

/// Thin SVD carrying every singular value of the input.
/// u * singular_values.asDiagonal() * vt reconstructs the input.
struct SvdResult {
  Mat u;
  Vec singular_values;
  Mat vt;
};

/// i.i.d. N(0, std^2) matrix, filled row-major from a dedicated stream so a
/// (rows, cols, std, seed) tuple is bit-reproducible.
Mat gaussian(Index rows, Index cols, double std, std::uint64_t seed);

/// Full (all singular values) SVD. Throws std::runtime_error if the
/// decomposition does not converge.
SvdResult svd(const Mat& m);

/// Singular values only, descending.
Vec singular_values(const Mat& m);

/// Zeroes the unobserved entries. Throws std::invalid_argument on shape
/// mismatch.
Mat apply_mask(const Mat& m, const Mask& mask);

double frobenius(const Mat& m);

/// Largest singular value.
double spectral(const Mat& m);

/// Throws std::invalid_argument naming `what` if any entry is NaN/Inf.
void require_finite(const Mat& m, const char* what);

}  // namespace dmf
