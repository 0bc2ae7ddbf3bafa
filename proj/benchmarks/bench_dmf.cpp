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

#include <benchmark/benchmark.h>

#include "dmf/baselines.hpp"
#include "dmf/criticality.hpp"
#include "dmf/experiment.hpp"
#include "dmf/model.hpp"
#include "dmf/optimizer.hpp"
#include "dmf/rng.hpp"

namespace {

using namespace dmf;

Problem make_problem(int n, int rank, double rate, std::uint64_t seed) {
  Mat truth = gen_low_rank(n, rank, seed);
  return Problem::from_observations(truth, gen_mask(n, rate, derive_seed(seed, "m")), truth);
}

void BM_Evaluate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int depth = static_cast<int>(state.range(1));
  Problem prob = make_problem(n, 6, 0.35, 1);
  auto stack = init_balanced(std::vector<Index>(depth + 1, n), 1e-3, 2);
  for (auto _ : state) {
    EvalResult eval = evaluate(stack, prob);
    benchmark::DoNotOptimize(eval.grad_sq_sum);
  }
}
BENCHMARK(BM_Evaluate)->Args({60, 4})->Args({100, 6});

void BM_RmspropStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int depth = static_cast<int>(state.range(1));
  Problem prob = make_problem(n, 6, 0.35, 3);
  auto stack = init_balanced(std::vector<Index>(depth + 1, n), 1e-3, 4);
  RmsPropState opt;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rmsprop_step(stack, opt, prob));
  }
}
BENCHMARK(BM_RmspropStep)->Args({60, 4})->Args({100, 6});

void BM_FullSvd(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Mat m = gen_low_rank(n, 6, 5) ;
  for (auto _ : state) {
    benchmark::DoNotOptimize(singular_values(m));
  }
}
BENCHMARK(BM_FullSvd)->Arg(60)->Arg(100);

void BM_SvtShrink(benchmark::State& state) {
  Mat m = gen_low_rank(static_cast<int>(state.range(0)), 6, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(svt_shrink(m, 0.5));
  }
}
BENCHMARK(BM_SvtShrink)->Arg(60)->Arg(100);

void BM_Hvp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Problem prob = make_problem(n, 6, 0.35, 7);
  auto stack = init_balanced(std::vector<Index>(5, n), 1e-3, 8);
  Vec v = Vec::Ones(stack.param_count()).normalized();
  for (auto _ : state) {
    benchmark::DoNotOptimize(hvp(stack, prob, v, 1e-5));
  }
}
BENCHMARK(BM_Hvp)->Arg(60);

void BM_OmfHalfSweepPair(benchmark::State& state) {
  Problem prob = make_problem(static_cast<int>(state.range(0)), 4, 0.5, 9);
  OmfConfig config;
  config.rank = 4;
  config.max_iters = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(omf_solve(prob, config));
  }
}
BENCHMARK(BM_OmfHalfSweepPair)->Arg(60);

}  // namespace

BENCHMARK_MAIN();
