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

// The objective language. Objectives are keyword calls wrapped in max(...) or
// min(...), e.g. "max(sum(log(rate)))" or "max(rate - 0.5*power)". Builtin
// leaves stay opaque here and are expanded by the problem generator once the
// network shape is known. The grammar is documented in docs/dsl.md.

#ifndef CELLOS_DSL_HPP_
#define CELLOS_DSL_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cellos/expr.hpp"

namespace cellos {

enum class Direction : std::uint8_t { Maximize, Minimize };
enum class Relation : std::uint8_t { Le, Ge, Eq };

enum class ConstraintKind : std::uint8_t {
  MinRate,            // sum_n C[b,u,n] >= C_min
  PowerBudget,        // sum_{u,n} p[b,u,n] <= P_max
  OneChannelPerUser,  // sum_n y[b,u,n] <= 1
  OneUserPerChannel,  // sum_u y[b,u,n] <= 1
  AuxiliaryCoupling,  // i[b,u,n] >= h[b,u,n]
  AuxiliaryBound,     // i[b,u,n] >= 0
};

const char* to_string(Direction d);
const char* to_string(Relation r);
const char* to_string(ConstraintKind k);

struct Objective {
  Direction direction = Direction::Maximize;
  Expr body;
};

struct Quantifier {
  std::string var;
  IndexDomain domain;
  bool operator==(const Quantifier&) const = default;
};

struct ConstraintTemplate {
  ConstraintKind kind = ConstraintKind::MinRate;
  Expr lhs;
  Relation relation = Relation::Le;
  Expr rhs;
  std::vector<Quantifier> quantifiers;
};

// Throws SyntaxError (with byte offset) or UnsupportedTerm.
Objective parse_objective(std::string_view text);

// Renders an objective back into the language; parse_objective of the result
// is structurally identical to the input tree.
std::string print_objective(const Objective& obj);

struct UserScope {
  bool all = true;
  std::vector<int> ids;  // used when all is false
};

struct ConstraintArgs {
  std::optional<double> rate;  // user_min_rate, bit/s
  std::optional<double> pmax;  // bs_power_budget, fraction of the slice budget
  UserScope users;
};

// Keys: user_min_rate, bs_power_budget, one_channel_per_user. Throws
// UnknownConstraintKey or NonPositiveBound.
ConstraintTemplate parse_constraint(std::string_view key, const ConstraintArgs& args);

}  // namespace cellos

#endif  // CELLOS_DSL_HPP_
