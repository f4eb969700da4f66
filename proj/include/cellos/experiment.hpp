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

// Scenario files and end-to-end experiments: compile the slice objectives,
// drive the simulator with either a baseline scheduler or the distributed
// agents, and collect metrics and signaling overhead.
//
// Under the agents each slice's PRB range is split into contiguous PRB groups
// that play the role of channels. The runtime works in units normalized per
// slice and group: power as a fraction of the slice budget, noise 1, and rates
// in bit/s/Hz of the smallest group.

#ifndef CELLOS_EXPERIMENT_HPP_
#define CELLOS_EXPERIMENT_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellos/decomposition.hpp"
#include "cellos/network.hpp"
#include "cellos/ran.hpp"
#include "cellos/runtime.hpp"

namespace cellos {

inline constexpr int kScenarioVersion = 1;

struct SliceConfig {
  double share = 1.0;
  std::vector<int> users;
  std::optional<std::string> objective;
  std::map<std::string, ConstraintArgs> constraints;
  std::optional<int> channel_groups;  // defaults to the largest per-BS user count
};

struct Scenario {
  std::uint64_t seed = 0;
  ChannelModel channel;     // positions, pathloss, fading; channels = prb_count
  std::vector<int> serving; // per UE
  RanConfig ran;
  double bandwidth_hz = 10e6;
  long tti_count = 1000;
  bool full_buffer = true;
  double file_bytes = 0.0;
  std::vector<SliceConfig> slices;
  EngineConfig engine;
  int reopt_period = 10;

  int bs_count() const { return static_cast<int>(channel.bs_positions.size()); }
  int ue_count() const { return static_cast<int>(channel.ue_positions.size()); }
};

// Throws SchemaViolation naming the offending key or value.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

// Initial simulator state of a scenario.
RanState initial_state(const Scenario& sc);

struct CompileTiming {
  double parse_ms = 0.0;
  double generate_ms = 0.0;
  double decompose_ms = 0.0;
  double total_ms = 0.0;
};

struct CompiledScenario {
  std::vector<std::vector<DistributedProgram>> programs;  // per slice, per base station
  CompileTiming timing;
};

// Propagates the compiler's errors (NoObjective, SyntaxError, ...).
CompiledScenario compile_scenario(const Scenario& sc);

// PRB groups of one slice under the agents.
std::vector<PrbRange> channel_groups(const Scenario& sc, const RanState& state, int slice);

// Normalized runtime inputs of one slice for the given served users.
RuntimeInputs slice_inputs(const Scenario& sc, const RanState& state, const GainView& gains, int slice,
                           const std::vector<std::vector<int>>& users_by_bs);

enum class SchedulerKind : std::uint8_t { CellOS, RoundRobin, ProportionalFair, Greedy };
SchedulerKind parse_scheduler(const std::string& name);
const char* to_string(SchedulerKind k);

struct SliceSummary {
  int slice = 0;
  double sum_throughput = 0.0;
  double min_user_throughput = 0.0;
  double power_w = 0.0;  // mean transmit power
};

struct RunSummary {
  SchedulerKind scheduler = SchedulerKind::CellOS;
  long ttis = 0;
  MetricsRecord metrics;
  std::vector<SliceSummary> slices;
  std::size_t total_overhead_values = 0;
  std::size_t total_overhead_bytes = 0;
  int iterations = 0;
  int solves = 0;
};

struct RunSinks {
  std::ostream* metrics_csv = nullptr;
  std::ostream* overhead_csv = nullptr;
};

// Runs tti_count TTIs. Under the agents allocations are re-solved every
// reopt_period TTIs and whenever the set of backlogged UEs changes.
RunSummary run_experiment(const Scenario& sc, SchedulerKind kind, const RunSinks& sinks = {},
                          ExecutionMode mode = ExecutionMode::Sequential);

struct SweepPoint {
  double share = 0.0;  // of the first slice; the second gets the rest
  RunSummary summary;
};

// Throws SchemaViolation unless the scenario has exactly two slices.
std::vector<SweepPoint> sweep_slices(const Scenario& sc, const std::vector<double>& shares, SchedulerKind kind,
                                     ExecutionMode mode = ExecutionMode::Sequential);

}  // namespace cellos

#endif  // CELLOS_EXPERIMENT_HPP_
