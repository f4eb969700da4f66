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

// Variable classification, coupling graphs and Lagrangian-dual decomposition
// of a centralized problem into one distributed program per base station.
//
// For base station b the decomposer replaces the cross-cell interference
// subterm of every capacity expression by an auxiliary variable i[b,u,n],
// relaxes i >= h (h being the interference recomputed from neighbor
// publications x = p*y) with multipliers mu[b,u,n], and the per-user
// min-rate constraint with multipliers lambda[b,u]. In maximization form:
//
//   L_b = f_b - sum_u lambda[b,u] (C_min - sum_n C^[b,u,n])
//             - sum_{u,n} mu[b,u,n] (h[b,u,n] - i[b,u,n])
//
// where C^ is the capacity with i in place of the interference.

#ifndef CELLOS_DECOMPOSITION_HPP_
#define CELLOS_DECOMPOSITION_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cellos/network.hpp"
#include "cellos/problem.hpp"

namespace cellos {

struct VariableClass {
  SymbolId id = 0;
  std::string name;
  Layer layer = Layer::None;
  int owner = -1;
};

// Ground optimization variables with their layer and owning base station.
// Throws UnclassifiedVariable for a variable without a base-station index.
std::vector<VariableClass> detect_and_classify(const SymbolTable& ground);

enum class EdgeKind : std::uint8_t { Local, Horizontal, Vertical };
const char* to_string(EdgeKind kind);

struct CouplingEdge {
  SymbolId a = 0;  // a < b
  SymbolId b = 0;
  EdgeKind kind = EdgeKind::Local;
  bool operator==(const CouplingEdge&) const = default;
};

struct CouplingGraph {
  std::vector<SymbolId> vertices;
  std::map<SymbolId, VariableClass> attributes;
  std::vector<CouplingEdge> edges;

  bool has_edge(SymbolId x, SymbolId y) const;
  bool has_horizontal() const;
  std::set<int> neighbors_of(int owner) const;
};

// Two variables are joined when they occur in different factors of one
// product, on opposite sides of one quotient, or inside the argument of one
// nonlinear function. Sums never create edges.
CouplingGraph build_coupling_graph(const std::vector<Expr>& exprs, const SymbolTable& ground);
CouplingGraph build_coupling_graph(const GroundProblem& prob);
// Builds the graph on a probe instance with one user per base station and one
// channel, which exposes every structural coupling of the template.
CouplingGraph build_coupling_graph(const CentralizedProblem& prob);

enum class DecompositionMethod : std::uint8_t { LagrangianDual, PartialLinearization };
DecompositionMethod parse_decomposition_method(const std::string& name);
const char* to_string(DecompositionMethod m);

struct UpdateRule {
  std::string multiplier;  // family name
  Expr subgradient;
  std::vector<Quantifier> quantifiers;
  bool project_nonnegative = true;
};

struct PublishEntry {
  std::string name;  // family name of the published value
  Expr value;
  std::vector<Quantifier> quantifiers;
};

struct AuxiliaryDef {
  std::string family;  // the auxiliary variable family
  Expr h;              // interference from publications, free in u and n
  std::vector<Quantifier> quantifiers;
  double floor = 0.0;
};

struct DistributedProgram {
  int owner = 0;
  int bs_count = 1;
  int slice_id = 0;
  // False for the uncoupled shortcut: the program is the (restricted)
  // original problem without auxiliaries or multipliers.
  bool lagrangian = true;
  Direction direction = Direction::Maximize;
  std::string objective_text;
  SymbolTable symbols;
  Expr objective;
  std::vector<ConstraintTemplate> constraints;  // enforced by the local solver
  std::vector<ConstraintTemplate> relaxed;      // priced by multipliers
  std::optional<AuxiliaryDef> auxiliary;
  std::vector<UpdateRule> update_rules;
  std::vector<PublishEntry> publish;
  std::vector<std::string> placeholder_manifest;
  std::vector<int> neighbors;
  EngineConfig engine;

  const ConstraintTemplate* find(ConstraintKind kind) const;
};

// Throws NotSeparable and NotImplemented (partial linearization).
std::vector<DistributedProgram> decompose(const CentralizedProblem& prob, const CouplingGraph& graph,
                                          DecompositionMethod method, const EngineConfig& engine = {});

}  // namespace cellos

#endif  // CELLOS_DECOMPOSITION_HPP_
