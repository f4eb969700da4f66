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

// Exhaustive solver for small instances of the centralized problem, used as
// ground truth for the distributed runtime.

#ifndef CELLOS_ORACLE_HPP_
#define CELLOS_ORACLE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cellos/expr.hpp"
#include "cellos/runtime.hpp"

namespace cellos {

enum class OracleObjective : std::uint8_t { MaxRate, SumLogRate, MinPower };
const char* to_string(OracleObjective o);
OracleObjective parse_oracle_objective(const std::string& s);
// The DSL sentence with the same meaning.
const char* objective_sentence(OracleObjective o);
bool maximizes(OracleObjective o);

struct OracleInstance {
  Shape shape;
  GainView gains;
  double noise = 1.0;
  double bandwidth = 1.0;
  std::optional<double> rate_floor;
  double power_cap = 1.0;
  std::vector<double> power_levels;  // candidate powers of a scheduled pair
};

inline constexpr int kOracleMaxBs = 3;
inline constexpr int kOracleMaxChannels = 3;
inline constexpr int kOracleMaxUsersPerBs = 3;
inline constexpr int kOracleMaxLevels = 6;
inline constexpr double kOracleMaxCombinations = 5e7;

// Powers per (b, global user, n); a pair is scheduled when its power is > 0.
class PowerPlan {
 public:
  PowerPlan() = default;
  explicit PowerPlan(const Shape& shape);

  double get(int b, int u, int n) const;
  void set(int b, int u, int n, double p);
  int bs_count() const { return bs_; }
  int ue_count() const { return ues_; }
  int channels() const { return channels_; }
  double total_power() const;
  bool operator==(const PowerPlan&) const = default;

 private:
  int bs_ = 0, ues_ = 0, channels_ = 0;
  std::vector<double> p_;
};

PowerPlan plan_from(const Shape& shape, const std::vector<LocalAllocation>& allocations);

// Shannon rates per user under the full interference model.
std::vector<double> user_rates(const OracleInstance& inst, const PowerPlan& plan);
double objective_value(const OracleInstance& inst, OracleObjective obj, const PowerPlan& plan);
// Min-rate, power budget and both one-to-one assignment readings.
bool is_feasible(const OracleInstance& inst, const PowerPlan& plan, double tol = 1e-9);

struct OracleResult {
  bool feasible = false;
  double value = 0.0;
  PowerPlan plan;
  std::uint64_t combinations = 0;
};

// Throws BudgetExceeded outside the enumeration limits. threads = 0 picks the
// hardware concurrency; results do not depend on the thread count.
OracleResult brute_force_solve(const OracleInstance& inst, OracleObjective obj, unsigned threads = 1);

// Largest objective change from moving one scheduled power by one grid step.
double grid_slack(const OracleInstance& inst, OracleObjective obj, const PowerPlan& plan);

// Two base stations 60 m apart, one or two users each at 10 to 50 m,
// two channels, gains (d/10)^-3 with unit-mean exponential fading.
OracleInstance toy_instance(std::uint64_t seed);
// Seeds of the first `count` toy instances with a feasible oracle solution.
std::vector<std::uint64_t> feasible_toy_seeds(std::size_t count);

}  // namespace cellos

#endif  // CELLOS_ORACLE_HPP_
