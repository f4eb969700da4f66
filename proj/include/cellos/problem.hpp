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

// Problem generation: expands a slice's parsed objective and constraints into
// a centralized problem over the symbolic index sets B (base stations), U_b
// (served users) and N (channels). Channel gains, noise and bandwidth stay
// runtime placeholders; only the base-station count is fixed at compile time.
//
// Capacity of user u served by b on channel n:
//
//   C[b,u,n] = B * log2(1 + g[b,u,n] y[b,u,n] p[b,u,n] /
//                (noise_N + sum_{b' != b} g[b',u,n] sum_{u' in U_b'} p[b',u',n] y[b',u',n]))

#ifndef CELLOS_PROBLEM_HPP_
#define CELLOS_PROBLEM_HPP_

#include <optional>
#include <string>
#include <vector>

#include "cellos/dsl.hpp"
#include "cellos/expr.hpp"
#include "cellos/network.hpp"

namespace cellos {

// Family names shared by the generator, the decomposer and the runtime.
namespace family {
inline constexpr const char* kAssignment = "y";
inline constexpr const char* kPower = "p";
inline constexpr const char* kGain = "g";
inline constexpr const char* kNoise = "noise_N";
inline constexpr const char* kBandwidth = "B";
inline constexpr const char* kRateFloor = "C_min";
inline constexpr const char* kPowerCap = "P_max";
inline constexpr const char* kAuxiliary = "i";
inline constexpr const char* kRateMultiplier = "lambda";
inline constexpr const char* kCouplingMultiplier = "mu";
inline constexpr const char* kPublished = "x";
}  // namespace family

// Declares template families in a table on first use.
class FamilyDeclarer {
 public:
  explicit FamilyDeclarer(SymbolTable& table) : table_(table) {}

  SymbolId assignment();  // y[b,u,n], binary MAC variable
  SymbolId power();       // p[b,u,n], continuous PHY variable
  SymbolId gain();        // g[b,u,n]
  SymbolId noise();       // noise_N
  SymbolId bandwidth();   // B
  SymbolId rate_floor(double value);
  SymbolId power_cap(double value);
  SymbolId auxiliary();            // i[b,u,n], continuous PHY variable
  SymbolId rate_multiplier();      // lambda[b,u]
  SymbolId coupling_multiplier();  // mu[b,u,n]
  SymbolId published();            // x[b,u,n] = p*y published by b

 private:
  SymbolId declare(const std::string& name, SymbolKind kind, Layer layer, VarDomain domain,
                   std::vector<IndexSet> sets, std::optional<double> value = std::nullopt);
  SymbolTable& table_;
};

// Shannon capacity and its SINR argument with b, u, n given as index args.
Expr capacity_term(FamilyDeclarer& f, const IndexArg& b, const IndexArg& u, const IndexArg& n);
Expr sinr_term(FamilyDeclarer& f, const IndexArg& b, const IndexArg& u, const IndexArg& n);

struct CentralizedProblem {
  int slice_id = 0;
  int bs_count = 1;
  std::string objective_text;
  Direction direction = Direction::Maximize;
  Expr objective;
  std::vector<ConstraintTemplate> constraints;
  SymbolTable symbols;
  bool uses_energy_efficiency = false;

  const ConstraintTemplate* find(ConstraintKind kind) const;
};

// Throws NoObjective when the slice has users but no objective.
CentralizedProblem generate_problem(const VirtualNetwork& nwk, int slice_id);

// Ground form for a concrete shape.
struct GroundConstraint {
  ConstraintKind kind = ConstraintKind::MinRate;
  Expr lhs;
  Relation relation = Relation::Le;
  Expr rhs;
  std::string label;
};

struct GroundProblem {
  Direction direction = Direction::Maximize;
  SymbolTable symbols;
  Expr objective;
  std::vector<GroundConstraint> constraints;
};

GroundProblem instantiate(const CentralizedProblem& prob, const Shape& shape);

// Expands every assignment of the quantifiers and grounds lhs/rhs.
void ground_constraint(const ConstraintTemplate& t, Grounder& grounder, std::vector<GroundConstraint>& out);

// Symbol closure: families referenced by objective and constraints versus
// declared families. Returns the names of declared-but-unused and
// used-but-undeclared symbols (both empty for a well-formed problem).
struct ClosureReport {
  std::vector<std::string> unused;
  std::vector<std::string> undeclared;
};
ClosureReport check_symbol_closure(const CentralizedProblem& prob);

}  // namespace cellos

#endif  // CELLOS_PROBLEM_HPP_
