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

#include "cellos/suite.hpp"

#include <chrono>

#include "cellos/decomposition.hpp"
#include "cellos/problem.hpp"

namespace cellos {

std::vector<DistributedProgram> compile_instance(const OracleInstance& inst, OracleObjective obj,
                                                 const EngineConfig& engine) {
  auto nwk = VirtualNetwork::create(inst.shape.bs_count());
  std::vector<int> users;
  for (const auto& us : inst.shape.users_by_bs) users.insert(users.end(), us.begin(), us.end());
  nwk.assign_users(0, users);
  nwk.set_utility(objective_sentence(obj), 0);
  std::map<std::string, ConstraintArgs> specs;
  ConstraintArgs budget;
  budget.pmax = inst.power_cap;
  specs["bs_power_budget"] = budget;
  if (inst.rate_floor) {
    ConstraintArgs floor;
    floor.rate = *inst.rate_floor;
    specs["user_min_rate"] = floor;
  }
  nwk.add_constraints(0, specs);
  nwk.initialize_engine(engine);
  auto prob = generate_problem(nwk, 0);
  return decompose(prob, build_coupling_graph(prob), parse_decomposition_method(engine.decomposition), engine);
}

RuntimeInputs runtime_inputs(const OracleInstance& inst) {
  RuntimeInputs in;
  in.shape = inst.shape;
  in.gains = inst.gains;
  in.noise = inst.noise;
  in.bandwidth = inst.bandwidth;
  in.rate_floor = inst.rate_floor;
  in.power_cap = inst.power_cap;
  return in;
}

Ensemble bind_instance(const OracleInstance& inst, OracleObjective obj, std::uint64_t seed,
                       const EngineConfig& engine) {
  RuntimeInputs in = runtime_inputs(inst);
  std::vector<BoundProgram> bound;
  for (const auto& dp : compile_instance(inst, obj, engine)) bound.push_back(bind_runtime(dp, in));
  return Ensemble(std::move(bound), seed);
}

ToyCase run_toy_case(std::uint64_t seed, OracleObjective obj, ExecutionMode mode) {
  ToyCase c;
  c.seed = seed;
  c.objective = obj;
  OracleInstance inst = toy_instance(seed);
  c.oracle = brute_force_solve(inst, obj);
  Ensemble ens = bind_instance(inst, obj, seed);
  RunOptions opt;
  opt.mode = mode;
  c.report = ens.run_until_converged(opt);
  c.dual = c.report.dual_value;
  PowerPlan plan = plan_from(inst.shape, ens.allocations());
  c.distributed = objective_value(inst, obj, plan);
  c.distributed_feasible = is_feasible(inst, plan);
  if (c.oracle.feasible) {
    c.slack = grid_slack(inst, obj, c.oracle.plan);
    if (maximizes(obj)) {
      c.within = c.distributed >= c.oracle.value - 0.05 * std::abs(c.oracle.value) - c.slack;
    } else {
      c.within = c.distributed <= c.oracle.value + 0.05 * std::abs(c.oracle.value) + c.slack;
    }
  }
  return c;
}

SuiteSummary run_toy_suite(OracleObjective obj, std::size_t count) {
  auto start = std::chrono::steady_clock::now();
  SuiteSummary s;
  for (std::uint64_t seed : feasible_toy_seeds(count)) {
    s.cases.push_back(run_toy_case(seed, obj));
    s.passed += s.cases.back().within;
    s.converged += s.cases.back().report.converged;
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

}  // namespace cellos
