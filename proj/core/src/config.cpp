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

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dmf/experiment.hpp"
#include "dmf/version.hpp"

namespace dmf {

namespace {

using nlohmann::json;

long line_of_offset(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

void parse_optimizer(const json& j, OptimizerConfig& opt) {
  if (j.contains("algorithm")) opt.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  read_field(j, "eta", opt.eta);
  read_field(j, "r", opt.r);
  read_field(j, "alpha", opt.alpha);
  read_field(j, "epsilon", opt.epsilon);
  read_field(j, "t_spe", opt.t_spe);
  read_field(j, "t_burnin", opt.t_burnin);
  read_field(j, "max_iters", opt.max_iters);
  read_field(j, "record_every", opt.record_every);
  read_field(j, "loss_floor", opt.stop.loss_floor);
  read_field(j, "grad_floor", opt.stop.grad_floor);
  read_field(j, "grad_patience", opt.stop.grad_patience);
  read_field(j, "stage_target", opt.stage_target);
  read_field(j, "stage_patience", opt.stage_patience);
  if (j.contains("polish")) {
    const json& polish = j.at("polish");
    read_field(polish, "eta", opt.polish.eta);
    read_field(polish, "max_iters", opt.polish.max_iters);
    read_field(polish, "grad_floor", opt.polish.grad_floor);
    read_field(polish, "grad_patience", opt.polish.grad_patience);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n < 1) throw ConfigError("'n' must be >= 1");
  if (rank < 1 || rank > n) throw ConfigError("'rank' must satisfy 1 <= rank <= n");
  if (depth < 1) throw ConfigError("'depth' must be >= 1");
  if (std_init <= 0) throw ConfigError("'std' must be positive");
  if (sampling_rates.empty()) throw ConfigError("'sampling_rates' must be non-empty");
  for (double rate : sampling_rates)
    if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("'sampling_rates' entries must be in (0,1]");
  if (trials < 1) throw ConfigError("'trials' must be >= 1");
  if (methods.empty()) throw ConfigError("'methods' must be non-empty");
  const std::set<std::string> known{"dmf", "nnm", "omf"};
  for (const auto& m : methods)
    if (!known.count(m)) throw ConfigError("unknown method '" + m + "' (expected dmf|nnm|omf)");
  if (record_every < 1) throw ConfigError("'record_every' must be >= 1");
  if (sv_topk < 1) throw ConfigError("'sv_topk' must be >= 1");
  if (optimizer.max_iters < 1) throw ConfigError("'optimizer.max_iters' must be >= 1");
  try {
    optimizer.make_state();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("optimizer block: ") + e.what());
  }
  if (std::find(methods.begin(), methods.end(), "nnm") != methods.end()) {
    try {
      nnm.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("baselines.nnm: ") + e.what());
    }
  }
  if (std::find(methods.begin(), methods.end(), "omf") != methods.end()) {
    try {
      omf.validate(n, n);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("baselines.omf: ") + e.what());
    }
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(e.what(), line_of_offset(text, e.byte));
  }
  ExperimentConfig config;
  read_field(j, "n", config.n);
  read_field(j, "rank", config.rank);
  read_field(j, "depth", config.depth);
  read_field(j, "std", config.std_init);
  if (j.contains("snr_db") && !j.at("snr_db").is_null())
    config.snr_db = j.at("snr_db").get<double>();
  read_field(j, "sampling_rates", config.sampling_rates);
  read_field(j, "trials", config.trials);
  read_field(j, "methods", config.methods);
  read_field(j, "seed", config.seed);
  read_field(j, "record_every", config.record_every);
  read_field(j, "sv_topk", config.sv_topk);
  read_field(j, "output_dir", config.output_dir);

  if (j.contains("optimizer")) parse_optimizer(j.at("optimizer"), config.optimizer);
  // the trajectory cadence lives in either place; the optimizer block wins
  if (j.contains("optimizer") && j.at("optimizer").contains("record_every"))
    config.record_every = config.optimizer.record_every;
  else
    config.optimizer.record_every = config.record_every;

  if (j.contains("segmentation")) {
    const json& seg = j.at("segmentation");
    read_field(seg, "rate_threshold", config.segmentation.rate_threshold);
    read_field(seg, "window", config.segmentation.window);
    read_field(seg, "min_segment", config.segmentation.min_segment);
  }
  if (j.contains("certify")) {
    const json& cert = j.at("certify");
    read_field(cert, "enabled", config.certify.enabled);
    read_field(cert, "tau_g", config.certify.tau_g);
    read_field(cert, "tau_h", config.certify.tau_h);
    read_field(cert, "tol", config.certify.tol);
    read_field(cert, "max_iters", config.certify.max_iters);
  }
  if (j.contains("baselines")) {
    const json& base = j.at("baselines");
    if (base.contains("nnm")) {
      const json& nnm = base.at("nnm");
      read_field(nnm, "lambda", config.nnm.lambda);
      read_field(nnm, "step", config.nnm.step);
      read_field(nnm, "max_iters", config.nnm.max_iters);
      read_field(nnm, "tol", config.nnm.tol);
    }
    if (base.contains("omf")) {
      const json& omf = base.at("omf");
      read_field(omf, "rank", config.omf.rank);
      read_field(omf, "max_iters", config.omf.max_iters);
      read_field(omf, "tol", config.omf.tol);
      read_field(omf, "ridge", config.omf.ridge);
    }
  } else {
    // sensible default: factor at the true rank
    config.omf.rank = config.rank;
  }
  if (!j.contains("baselines") || !j.at("baselines").contains("omf") ||
      !j.at("baselines").at("omf").contains("rank"))
    config.omf.rank = config.rank;

  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_json(const ExperimentConfig& config) {
  json j;
  j["n"] = config.n;
  j["rank"] = config.rank;
  j["depth"] = config.depth;
  j["std"] = config.std_init;
  if (config.snr_db) j["snr_db"] = *config.snr_db;
  j["sampling_rates"] = config.sampling_rates;
  j["trials"] = config.trials;
  j["methods"] = config.methods;
  j["seed"] = config.seed;
  j["record_every"] = config.record_every;
  j["sv_topk"] = config.sv_topk;
  j["output_dir"] = config.output_dir;
  j["optimizer"] = {{"algorithm", to_string(config.optimizer.algorithm)},
                    {"eta", config.optimizer.eta},
                    {"r", config.optimizer.r},
                    {"alpha", config.optimizer.alpha},
                    {"epsilon", config.optimizer.epsilon},
                    {"t_spe", config.optimizer.t_spe},
                    {"t_burnin", config.optimizer.t_burnin},
                    {"max_iters", config.optimizer.max_iters},
                    {"record_every", config.optimizer.record_every},
                    {"loss_floor", config.optimizer.stop.loss_floor},
                    {"grad_floor", config.optimizer.stop.grad_floor},
                    {"grad_patience", config.optimizer.stop.grad_patience},
                    {"stage_target", config.optimizer.stage_target},
                    {"stage_patience", config.optimizer.stage_patience},
                    {"polish",
                     {{"eta", config.optimizer.polish.eta},
                      {"max_iters", config.optimizer.polish.max_iters},
                      {"grad_floor", config.optimizer.polish.grad_floor},
                      {"grad_patience", config.optimizer.polish.grad_patience}}}};
  j["segmentation"] = {{"rate_threshold", config.segmentation.rate_threshold},
                       {"window", config.segmentation.window},
                       {"min_segment", config.segmentation.min_segment}};
  j["certify"] = {{"enabled", config.certify.enabled},
                  {"tau_g", config.certify.tau_g},
                  {"tau_h", config.certify.tau_h},
                  {"tol", config.certify.tol},
                  {"max_iters", config.certify.max_iters}};
  j["baselines"] = {{"nnm",
                     {{"lambda", config.nnm.lambda},
                      {"step", config.nnm.step},
                      {"max_iters", config.nnm.max_iters},
                      {"tol", config.nnm.tol}}},
                    {"omf",
                     {{"rank", config.omf.rank},
                      {"max_iters", config.omf.max_iters},
                      {"tol", config.omf.tol},
                      {"ridge", config.omf.ridge}}}};
  return j.dump(2);
}

void write_manifest_json(const ExperimentConfig& config, const std::filesystem::path& path) {
  json j;
  j["config"] = json::parse(config_to_json(config));
  j["tool"] = {{"name", "dmfdyn"}, {"version", kVersion}};
  j["platform"] = {{"compiler", kCompiler}, {"eigen", kEigenVersion}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace dmf
