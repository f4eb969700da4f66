// Copyright 2026 The CellOS Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Virtual network abstraction: the operator-facing builder that declares base
// stations, slices, per-slice objectives and constraints, and the engine.
//
//   auto nwk = VirtualNetwork::create(bs_num);
//   auto slices = nwk.get_slices();
//   nwk.set_utility("min(power)", slices[0]);
//   nwk.add_constraints(slices[0], {{"user_min_rate", {.rate = 1e6}}});
//   EngineConfig eng;
//   eng.set_opt_method("sub-gradient");
//   nwk.initialize_engine(eng);

#ifndef CELLOS_NETWORK_HPP_
#define CELLOS_NETWORK_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellos/dsl.hpp"

namespace cellos {

struct EngineConfig {
  std::string method = "subgradient";
  std::string decomposition = "lagrangian-dual";
  double alpha = 0.05;  // step size alpha / sqrt(k)
  int max_iterations = 500;
  double epsilon = 1e-3;
  // Relative headroom added to the local min-rate target.
  double rate_margin = 0.01;
  // After `inertia_warmup` iterations an agent adopts a new channel matching
  // with probability `inertia_switch`.
  int inertia_warmup = 3;
  double inertia_switch = 0.5;

  // Accepts "subgradient" and "sub-gradient"; throws InvalidEngineConfig.
  void set_opt_method(const std::string& name);
  void validate() const;
};

struct SliceDefinition {
  int slice_id = 0;
  double prb_share = 1.0;
  std::vector<int> user_ids;
  std::optional<std::string> objective_text;
  std::optional<Objective> objective;
  std::vector<std::string> constraint_keys;
  std::vector<ConstraintArgs> constraint_args;
  std::vector<ConstraintTemplate> constraints;
};

class VirtualNetwork {
 public:
  // Throws InvalidNetwork for bs_num < 1 and InvalidShare for bad shares.
  static VirtualNetwork create(int bs_num, std::vector<double> shares = {});

  int bs_count() const { return bs_count_; }
  std::vector<int> get_slices() const;
  const std::vector<SliceDefinition>& slices() const { return slices_; }
  const SliceDefinition& slice(int slice_id) const;

  VirtualNetwork& assign_users(int slice_id, std::vector<int> user_ids);
  VirtualNetwork& set_utility(const std::string& objective_text, int slice_id);
  VirtualNetwork& add_constraints(int slice_id, const std::map<std::string, ConstraintArgs>& specs);
  VirtualNetwork& initialize_engine(const EngineConfig& cfg);

  const std::optional<EngineConfig>& engine() const { return engine_; }
  // True when the engine is set and every slice with users has an objective.
  bool compile_ready() const;

 private:
  SliceDefinition& mutable_slice(int slice_id);

  int bs_count_ = 0;
  std::vector<SliceDefinition> slices_;
  std::optional<EngineConfig> engine_;
};

}  // namespace cellos

#endif  // CELLOS_NETWORK_HPP_
