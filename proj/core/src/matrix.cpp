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

#include "dmf/matrix.hpp"

#include <Eigen/SVD>

#include <numeric>
#include <stdexcept>
#include <string>

#include "dmf/rng.hpp"

namespace dmf {

Mask::Mask(Index rows, Index cols, bool value)
    : rows(rows),
      cols(cols),
      observed(static_cast<std::size_t>(rows * cols), value ? 1 : 0) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("Mask: negative dimensions");
}

Index Mask::count() const {
  return std::accumulate(observed.begin(), observed.end(), Index{0},
                         [](Index acc, std::uint8_t b) { return acc + (b != 0); });
}

double Mask::sampling_rate() const {
  if (rows == 0 || cols == 0) return 0.0;
  return static_cast<double>(count()) / static_cast<double>(rows * cols);
}

Mat gaussian(Index rows, Index cols, double std, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("gaussian: dimensions must be positive");
  if (std < 0) throw std::invalid_argument("gaussian: std must be nonnegative");
  Mat m(rows, cols);
  if (std == 0.0) {
    m.setZero();
    return m;
  }
  Rng rng(derive_seed(seed, "gaussian"));
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = std * rng.gaussian();
  return m;
}

SvdResult svd(const Mat& m) {
  require_finite(m, "svd input");
  Eigen::BDCSVD<Mat> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) throw std::runtime_error("svd: decomposition did not converge");
  return SvdResult{dec.matrixU(), dec.singularValues(), dec.matrixV().transpose()};
}

Vec singular_values(const Mat& m) {
  require_finite(m, "singular_values input");
  Eigen::BDCSVD<Mat> dec(m);
  if (dec.info() != Eigen::Success)
    throw std::runtime_error("singular_values: decomposition did not converge");
  return dec.singularValues();
}

Mat apply_mask(const Mat& m, const Mask& mask) {
  if (m.rows() != mask.rows || m.cols() != mask.cols)
    throw std::invalid_argument("apply_mask: shape mismatch");
  Mat out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out(i, j) = mask.at(i, j) ? m(i, j) : 0.0;
  return out;
}

double frobenius(const Mat& m) { return m.norm(); }

double spectral(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return singular_values(m)(0);
}

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite())
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

}  // namespace dmf
