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

// Edge runtime: binds distributed programs to run-time values, runs the local
// subgradient solve of each base-station agent, and exchanges publications
// over a simulated X2 interface in synchronous Jacobi rounds.

#ifndef CELLOS_RUNTIME_HPP_
#define CELLOS_RUNTIME_HPP_

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cellos/decomposition.hpp"
#include "cellos/expr.hpp"

namespace cellos {

// ---------------------------------------------------------------------------
// X2 wire format: sender u16, iteration u32, value count u32, the values as
// little-endian float32, then a CRC-32 of everything before it.

struct X2Message {
  std::uint16_t sender = 0;
  std::uint32_t iteration = 0;
  std::vector<float> payload;
  bool operator==(const X2Message&) const = default;
};

inline constexpr std::size_t kX2HeaderBytes = 10;
inline constexpr std::size_t kX2TrailerBytes = 4;

std::vector<std::uint8_t> encode(const X2Message& msg);
// Throws MalformedMessage on a truncated frame and ChecksumMismatch.
X2Message decode(std::span<const std::uint8_t> frame);

// ---------------------------------------------------------------------------
// Binding.

// Channel gains of every (base station, user, channel) triple the runtime may
// need. Missing entries are NaN.
class GainView {
 public:
  GainView() = default;
  GainView(int bs_count, int ue_count, int channels);

  void set(int b, int u, int n, double g);
  double get(int b, int u, int n) const;  // NaN when unknown or out of range
  int bs_count() const { return bs_; }
  int ue_count() const { return ues_; }
  int channels() const { return channels_; }

 private:
  int bs_ = 0, ues_ = 0, channels_ = 0;
  std::vector<double> values_;
};

struct RuntimeInputs {
  Shape shape;  // served users per base station and channel count
  GainView gains;
  double noise = 1.0;
  double bandwidth = 1.0;
  std::optional<double> rate_floor;  // replaces the compiled C_min
  std::optional<double> power_cap;   // replaces the compiled P_max
};

struct PairSlot {
  int user = 0;  // global UE id
  int channel = 0;
  SymbolId y = 0, p = 0;
  std::optional<SymbolId> aux, mu;
  CompiledExpr d1, d2;  // first and second derivative of the objective in p
  CompiledExpr h;       // interference from publications
  CompiledExpr mu_step;
};

struct RemoteSlots {
  int bs = 0;
  std::vector<std::optional<SymbolId>> x;  // u-major over that base station's users
};

struct BoundProgram {
  int owner = 0;
  int slice_id = 0;
  bool lagrangian = true;
  Shape shape;
  std::vector<int> users;  // served by owner
  int channels = 0;
  EngineConfig engine;

  SymbolTable table;
  std::vector<double> base;  // bound values, variables and multipliers zero
  Expr objective;  // in maximization form
  CompiledExpr objective_tape;
  bool separable = true;  // each pair derivative depends only on its own power

  std::vector<PairSlot> pairs;  // u-major
  std::optional<double> rate_floor;
  double power_cap = 0.0;
  std::vector<CompiledExpr> user_rate;  // per served user when a min-rate constraint exists
  std::vector<std::optional<SymbolId>> lambda;
  std::vector<CompiledExpr> lambda_step;
  std::vector<int> neighbors;
  std::vector<RemoteSlots> remotes;  // base stations whose publications enter h
  std::vector<GroundConstraint> checks;  // local constraints verified on every allocation

  std::size_t pair_index(std::size_t ui, int n) const { return ui * static_cast<std::size_t>(channels) + n; }
};

// Throws UnresolvedPlaceholder naming the symbol without a run-time source.
BoundProgram bind_runtime(const DistributedProgram& dp, const RuntimeInputs& in);

// ---------------------------------------------------------------------------
// Agent state and the local solve.

struct MultiplierState {
  std::vector<int> users;
  int channels = 0;
  std::vector<double> lambda;  // per user
  std::vector<double> mu;      // per (u,n)
  std::vector<double> aux;     // i per (u,n)
  int iteration = 0;

  static MultiplierState zero(const BoundProgram& bp);
};

struct LocalAllocation {
  int owner = 0;
  std::vector<int> users;
  int channels = 0;
  std::vector<std::uint8_t> y;  // u-major
  std::vector<double> p;

  static LocalAllocation empty(const BoundProgram& bp);
  double total_power() const;
  std::vector<int> matching() const;  // channel per user, -1 when unscheduled
  bool operator==(const LocalAllocation&) const = default;
};

// Publications received from neighbors, keyed by sender.
using Inbox = std::map<int, X2Message>;

struct IterationResult {
  LocalAllocation allocation;
  MultiplierState state;
  X2Message message;
  double objective = 0.0;
};

// Inner problem for fixed multipliers and interference. Returns the local
// objective value at the returned allocation (-inf when nothing is feasible).
double solve_inner(const BoundProgram& bp, std::span<const double> values, bool enforce_rate, double rate_target,
                   const std::optional<std::vector<int>>& keep_matching, LocalAllocation& out);

// Powers maximizing sum_k w_k log2(1 + p_k / a_k) with sum p <= budget.
std::vector<double> waterfill(std::span<const double> weights, std::span<const double> floors, double budget);

// One Jacobi iteration of an agent. The inbox must hold iteration k-1 from
// every neighbor for k >= 2. Throws InboxIncomplete and NumericalDivergence.
IterationResult local_solve_iteration(const BoundProgram& bp, const MultiplierState& ms, const Inbox& inbox,
                                      const LocalAllocation& previous, std::mt19937_64& rng);

// Publication of an allocation and multipliers: x per (u,n), then lambda.
X2Message publication(const BoundProgram& bp, const LocalAllocation& alloc, const MultiplierState& ms,
                      std::uint32_t iteration);

// Dual function of the local Lagrangian at the given multipliers: the exact
// supremum over assignments, powers and auxiliaries without the rate margin.
double dual_value(const BoundProgram& bp, const MultiplierState& ms);

// Local objective (Lagrangian) of an allocation with i = max(0, h) from inbox.
double local_objective(const BoundProgram& bp, const MultiplierState& ms, const LocalAllocation& alloc);

// ---------------------------------------------------------------------------
// Ensemble.

struct OverheadEntry {
  int iteration = 0;
  int sender = 0;
  std::size_t values = 0;
  std::size_t bytes = 0;
};

struct ConvergenceReport {
  int iterations = 0;
  bool converged = false;
  std::size_t total_values = 0;
  std::size_t total_bytes = 0;
  double dual_value = 0.0;
  std::vector<double> objectives;  // per agent
};

enum class ExecutionMode : std::uint8_t { Sequential, Threaded };

struct RunOptions {
  ExecutionMode mode = ExecutionMode::Sequential;
  std::chrono::milliseconds barrier_timeout{10000};
  int persistence = 5;
  // Called by each agent before its local solve (threaded mode included).
  std::function<void(int owner, int iteration)> before_step;
};

class Agent {
 public:
  Agent(BoundProgram bp, std::uint64_t seed);

  const BoundProgram& program() const { return bp_; }
  const MultiplierState& state() const { return ms_; }
  const LocalAllocation& allocation() const { return alloc_; }
  double objective() const { return objective_; }
  const X2Message& outbox() const { return outbox_; }
  Inbox& inbox() { return inbox_; }
  void set_multipliers(const MultiplierState& ms) { ms_ = ms; }

  void step();
  // Rebinds to a new program. Multipliers and assignments of surviving users
  // are kept; new users start from zero.
  void rebind(BoundProgram bp);

 private:
  BoundProgram bp_;
  MultiplierState ms_;
  LocalAllocation alloc_;
  std::mt19937_64 rng_;
  double objective_ = 0.0;
  X2Message outbox_;
  Inbox inbox_;
};

class Ensemble {
 public:
  Ensemble(std::vector<BoundProgram> programs, std::uint64_t seed);

  std::vector<Agent>& agents() { return agents_; }
  const std::vector<Agent>& agents() const { return agents_; }
  const std::vector<OverheadEntry>& ledger() const { return ledger_; }
  int iteration() const { return iteration_; }

  // Delivers every outbox to the sender's neighbors and records overhead.
  // Throws InvariantViolation when the exchange exceeds |U|(|N|+1) values.
  std::vector<OverheadEntry> exchange_round();
  ConvergenceReport run_until_converged(const RunOptions& opt = {});
  void rebind(std::vector<BoundProgram> programs);
  double dual_value() const;
  std::vector<LocalAllocation> allocations() const;

 private:
  bool static_problem() const;
  double change_since(const std::vector<double>& objectives, const std::vector<std::vector<double>>& lambdas) const;

  std::vector<Agent> agents_;
  std::vector<OverheadEntry> ledger_;
  int iteration_ = 0;
};

}  // namespace cellos

#endif  // CELLOS_RUNTIME_HPP_
