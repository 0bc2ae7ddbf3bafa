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

#include "dmf/model.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dmf/csv.hpp"
#include "dmf/rng.hpp"

namespace dmf {

std::vector<Index> WeightStack::dims() const {
  std::vector<Index> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().cols());
  for (const Mat& w : layers) d.push_back(w.rows());
  return d;
}

Index WeightStack::param_count() const {
  Index n = 0;
  for (const Mat& w : layers) n += w.size();
  return n;
}

void WeightStack::validate() const {
  if (layers.empty()) throw std::invalid_argument("WeightStack: no layers");
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    if (layers[l + 1].cols() != layers[l].rows())
      throw std::invalid_argument("WeightStack: layer shapes do not chain at layer " +
                                  std::to_string(l + 1));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) require_finite(layers[l], "WeightStack layer");
}

Problem Problem::from_observations(const Mat& observations, Mask mask,
                                   std::optional<Mat> ground_truth) {
  if (observations.rows() != mask.rows || observations.cols() != mask.cols)
    throw std::invalid_argument("Problem: observations/mask shape mismatch");
  if (ground_truth && (ground_truth->rows() != mask.rows || ground_truth->cols() != mask.cols))
    throw std::invalid_argument("Problem: ground truth shape mismatch");
  Problem prob;
  prob.target = apply_mask(observations, mask);
  prob.mask = std::move(mask);
  prob.ground_truth = std::move(ground_truth);
  return prob;
}

WeightStack init_balanced(const std::vector<Index>& dims, double std, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("init_balanced: need at least [n_0, n_1]");
  for (Index d : dims)
    if (d < 1) throw std::invalid_argument("init_balanced: dimensions must be >= 1");
  WeightStack stack;
  stack.layers.reserve(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    stack.layers.push_back(
        gaussian(dims[l + 1], dims[l], std, derive_seed(seed, static_cast<std::uint64_t>(l))));
  return stack;
}

namespace {

double masked_half_sq(const Mat& product, const Problem& prob, Mat* residual_out) {
  if (residual_out) residual_out->resize(product.rows(), product.cols());
  double acc = 0.0;
  for (Index i = 0; i < product.rows(); ++i)
    for (Index j = 0; j < product.cols(); ++j) {
      double r = prob.mask.at(i, j) ? product(i, j) - prob.target(i, j) : 0.0;
      if (residual_out) (*residual_out)(i, j) = r;
      acc += r * r;
    }
  return 0.5 * acc;
}

}  // namespace

Mat product(const WeightStack& stack) {
  if (stack.layers.empty()) throw std::invalid_argument("product: empty stack");
  Mat w = stack.layers[0];
  for (int l = 1; l < stack.depth(); ++l) w = stack.layers[l] * w;
  return w;
}

double loss(const WeightStack& stack, const Problem& prob) {
  Mat w = product(stack);
  if (w.rows() != prob.rows() || w.cols() != prob.cols())
    throw std::invalid_argument("loss: product/target shape mismatch");
  return masked_half_sq(w, prob, nullptr);
}

Mat residual(const WeightStack& stack, const Problem& prob) {
  Mat w = product(stack);
  if (w.rows() != prob.rows() || w.cols() != prob.cols())
    throw std::invalid_argument("residual: product/target shape mismatch");
  Mat res;
  masked_half_sq(w, prob, &res);
  return res;
}

std::vector<Mat> layer_gradients(const WeightStack& stack, const Problem& prob) {
  return evaluate(stack, prob).gradients;
}

double balancedness(const WeightStack& stack) {
  double worst = 0.0;
  for (int l = 0; l + 1 < stack.depth(); ++l) {
    const Mat& lower = stack.layers[l];
    const Mat& upper = stack.layers[l + 1];
    Mat gap = upper.transpose() * upper - lower * lower.transpose();
    worst = std::max(worst, gap.norm());
  }
  return worst;
}

void evaluate_into(const WeightStack& stack, const Problem& prob, EvalWorkspace& ws) {
  const int L = stack.depth();
  if (L < 1) throw std::invalid_argument("evaluate: empty stack");
  ws.prefixes.resize(static_cast<std::size_t>(L) + 1);
  ws.suffixes.resize(static_cast<std::size_t>(L));
  ws.result.gradients.resize(static_cast<std::size_t>(L));

  // prefixes[l] = W_l ... W_1 (prefixes[0] = I on n_0)
  ws.prefixes[0] = Mat::Identity(stack.layers[0].cols(), stack.layers[0].cols());
  for (int l = 0; l < L; ++l) ws.prefixes[l + 1].noalias() = stack.layers[l] * ws.prefixes[l];
  const Mat& w = ws.prefixes[L];
  if (w.rows() != prob.rows() || w.cols() != prob.cols())
    throw std::invalid_argument("evaluate: product/target shape mismatch");

  ws.result.loss = masked_half_sq(w, prob, &ws.result.residual);

  // suffixes[l] = W_L ... W_{l+2} (suffixes[L-1] = I on n_L)
  ws.suffixes[L - 1] = Mat::Identity(stack.layers[L - 1].rows(), stack.layers[L - 1].rows());
  for (int l = L - 2; l >= 0; --l)
    ws.suffixes[l].noalias() = ws.suffixes[l + 1] * stack.layers[l + 1];

  ws.result.grad_sq_sum = 0.0;
  for (int l = 0; l < L; ++l) {
    ws.left.noalias() = ws.suffixes[l].transpose() * ws.result.residual;
    ws.result.gradients[l].noalias() = ws.left * ws.prefixes[l].transpose();
    ws.result.grad_sq_sum += ws.result.gradients[l].squaredNorm();
  }
}

EvalResult evaluate(const WeightStack& stack, const Problem& prob) {
  stack.validate();
  EvalWorkspace ws;
  evaluate_into(stack, prob, ws);
  return std::move(ws.result);
}

Vec flatten(const std::vector<Mat>& mats) {
  Index total = 0;
  for (const Mat& m : mats) total += m.size();
  Vec v(total);
  Index offset = 0;
  for (const Mat& m : mats) {
    v.segment(offset, m.size()) = Eigen::Map<const Vec>(m.data(), m.size());
    offset += m.size();
  }
  return v;
}

Vec flatten_stack(const WeightStack& stack) { return flatten(stack.layers); }

void add_scaled(WeightStack& stack, const Vec& direction, double scale) {
  if (direction.size() != stack.param_count())
    throw std::invalid_argument("add_scaled: direction length mismatch");
  Index offset = 0;
  for (Mat& w : stack.layers) {
    Eigen::Map<Vec>(w.data(), w.size()) += scale * direction.segment(offset, w.size());
    offset += w.size();
  }
}

void save_checkpoint(const WeightStack& stack, const std::filesystem::path& dir, long iteration) {
  stack.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["depth"] = stack.depth();
  manifest["iteration"] = iteration;
  manifest["dims"] = stack.dims();
  std::vector<std::string> files;
  for (int l = 0; l < stack.depth(); ++l) {
    std::string name = "layer_" + std::to_string(l + 1) + ".csv";
    write_matrix_csv(stack.layers[l], dir / name);
    files.push_back(name);
  }
  manifest["layers"] = files;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write checkpoint manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

std::pair<WeightStack, long> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing checkpoint manifest: " + (dir / "manifest.json").string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  WeightStack stack;
  for (const auto& name : manifest.at("layers")) {
    stack.layers.push_back(read_matrix_csv(dir / name.get<std::string>()));
  }
  stack.validate();
  long iteration = manifest.value("iteration", 0L);
  return {std::move(stack), iteration};
}

}  // namespace dmf
