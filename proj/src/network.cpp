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

#include "cellos/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cellos/error.hpp"

namespace cellos {

void EngineConfig::set_opt_method(const std::string& name) {
  if (name != "subgradient" && name != "sub-gradient") {
    throw InvalidEngineConfig("unsupported optimization method '" + name + "'");
  }
  method = "subgradient";
}

void EngineConfig::validate() const {
  if (method != "subgradient") throw InvalidEngineConfig("unsupported method " + method);
  if (decomposition != "lagrangian-dual" && decomposition != "partial-linearization") {
    throw InvalidEngineConfig("unknown decomposition " + decomposition);
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidEngineConfig("alpha must be positive");
  if (max_iterations < 1) throw InvalidEngineConfig("max_iterations must be >= 1");
  if (!(epsilon > 0.0)) throw InvalidEngineConfig("epsilon must be positive");
  if (rate_margin < 0.0) throw InvalidEngineConfig("rate_margin must be >= 0");
  if (inertia_warmup < 0 || !(inertia_switch > 0.0) || inertia_switch > 1.0) {
    throw InvalidEngineConfig("inertia settings out of range");
  }
}

VirtualNetwork VirtualNetwork::create(int bs_num, std::vector<double> shares) {
  if (bs_num < 1) throw InvalidNetwork("a network needs at least one base station");
  if (shares.empty()) shares = {1.0};
  double total = 0.0;
  for (double s : shares) {
    if (!(s > 0.0) || s > 1.0) throw InvalidShare("slice share must be in (0, 1]");
    total += s;
  }
  if (total > 1.0 + 1e-9) throw InvalidShare("slice shares sum above 1");
  VirtualNetwork nwk;
  nwk.bs_count_ = bs_num;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    SliceDefinition s;
    s.slice_id = static_cast<int>(i);
    s.prb_share = shares[i];
    nwk.slices_.push_back(std::move(s));
  }
  return nwk;
}

std::vector<int> VirtualNetwork::get_slices() const {
  std::vector<int> ids;
  for (const auto& s : slices_) ids.push_back(s.slice_id);
  return ids;
}

const SliceDefinition& VirtualNetwork::slice(int slice_id) const {
  for (const auto& s : slices_) {
    if (s.slice_id == slice_id) return s;
  }
  throw UnknownSlice(std::to_string(slice_id));
}

SliceDefinition& VirtualNetwork::mutable_slice(int slice_id) {
  return const_cast<SliceDefinition&>(static_cast<const VirtualNetwork*>(this)->slice(slice_id));
}

VirtualNetwork& VirtualNetwork::assign_users(int slice_id, std::vector<int> user_ids) {
  SliceDefinition& target = mutable_slice(slice_id);
  std::set<int> mine(user_ids.begin(), user_ids.end());
  if (mine.size() != user_ids.size()) throw InvalidNetwork("duplicate UE id in slice");
  for (const auto& s : slices_) {
    if (s.slice_id == slice_id) continue;
    for (int u : s.user_ids) {
      if (mine.count(u)) throw InvalidNetwork("UE " + std::to_string(u) + " already belongs to another slice");
    }
  }
  std::sort(user_ids.begin(), user_ids.end());
  target.user_ids = std::move(user_ids);
  return *this;
}

VirtualNetwork& VirtualNetwork::set_utility(const std::string& objective_text, int slice_id) {
  SliceDefinition& target = mutable_slice(slice_id);
  Objective parsed = parse_objective(objective_text);
  target.objective_text = objective_text;
  target.objective = std::move(parsed);
  return *this;
}

VirtualNetwork& VirtualNetwork::add_constraints(int slice_id,
                                                const std::map<std::string, ConstraintArgs>& specs) {
  SliceDefinition& target = mutable_slice(slice_id);
  std::vector<ConstraintTemplate> parsed;
  for (const auto& [key, args] : specs) {
    ConstraintTemplate t = parse_constraint(key, args);
    for (const auto& existing : target.constraints) {
      if (existing.kind == t.kind) throw DuplicateConstraint(key + " already set on slice " + std::to_string(slice_id));
    }
    parsed.push_back(std::move(t));
  }
  for (const auto& [key, args] : specs) {
    target.constraint_keys.push_back(key);
    target.constraint_args.push_back(args);
  }
  for (auto& t : parsed) target.constraints.push_back(std::move(t));
  return *this;
}

VirtualNetwork& VirtualNetwork::initialize_engine(const EngineConfig& cfg) {
  if (engine_) throw EngineAlreadySet("engine already initialized");
  cfg.validate();
  engine_ = cfg;
  return *this;
}

bool VirtualNetwork::compile_ready() const {
  if (!engine_) return false;
  return std::all_of(slices_.begin(), slices_.end(),
                     [](const SliceDefinition& s) { return s.user_ids.empty() || s.objective.has_value(); });
}

}  // namespace cellos
