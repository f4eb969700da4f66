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

// Oracle acceptance suite: compiles each toy instance through the full
// pipeline, runs the distributed agents to convergence and compares the
// result with exhaustive search.

#ifndef CELLOS_SUITE_HPP_
#define CELLOS_SUITE_HPP_

#include <cstdint>
#include <vector>

#include "cellos/network.hpp"
#include "cellos/oracle.hpp"
#include "cellos/runtime.hpp"

namespace cellos {

// Programs of every base station for the instance's single slice.
std::vector<DistributedProgram> compile_instance(const OracleInstance& inst, OracleObjective obj,
                                                 const EngineConfig& engine = {});
RuntimeInputs runtime_inputs(const OracleInstance& inst);
Ensemble bind_instance(const OracleInstance& inst, OracleObjective obj, std::uint64_t seed,
                       const EngineConfig& engine = {});

struct ToyCase {
  std::uint64_t seed = 0;
  OracleObjective objective = OracleObjective::MaxRate;
  OracleResult oracle;
  double slack = 0.0;
  double distributed = 0.0;  // objective of the converged allocation
  bool distributed_feasible = false;
  double dual = 0.0;
  ConvergenceReport report;
  bool within = false;  // within 5% plus grid slack, in the objective's direction
};

ToyCase run_toy_case(std::uint64_t seed, OracleObjective obj, ExecutionMode mode = ExecutionMode::Sequential);

struct SuiteSummary {
  std::vector<ToyCase> cases;
  std::size_t passed = 0;
  std::size_t converged = 0;
  double seconds = 0.0;
};

SuiteSummary run_toy_suite(OracleObjective obj, std::size_t count = 50);

}  // namespace cellos

#endif  // CELLOS_SUITE_HPP_
