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

#include "cellos/problem.hpp"

#include <algorithm>
#include <set>

#include "cellos/error.hpp"

namespace cellos {

SymbolId FamilyDeclarer::declare(const std::string& name, SymbolKind kind, Layer layer, VarDomain domain,
                                 std::vector<IndexSet> sets, std::optional<double> value) {
  if (auto id = table_.find(name)) {
    if (value && table_.at(*id).value != value) {
      throw MalformedExpr("conflicting values for parameter " + name);
    }
    return *id;
  }
  static const char* kVarNames[] = {"b", "u", "n"};
  SymbolMeta m;
  m.name = name;
  m.kind = kind;
  m.layer = layer;
  m.domain = domain;
  m.value = value;
  for (IndexSet s : sets) {
    m.indices.push_back(IndexBinding{s, IndexArg::named(kVarNames[static_cast<int>(s)])});
  }
  return table_.add(std::move(m));
}

namespace {
const std::vector<IndexSet> kBUN = {IndexSet::BaseStations, IndexSet::Users, IndexSet::Channels};
}  // namespace

SymbolId FamilyDeclarer::assignment() {
  return declare(family::kAssignment, SymbolKind::Variable, Layer::Mac, VarDomain::Binary, kBUN);
}
SymbolId FamilyDeclarer::power() {
  return declare(family::kPower, SymbolKind::Variable, Layer::Phy, VarDomain::Continuous, kBUN);
}
SymbolId FamilyDeclarer::gain() {
  return declare(family::kGain, SymbolKind::Placeholder, Layer::None, VarDomain::Continuous, kBUN);
}
SymbolId FamilyDeclarer::noise() {
  return declare(family::kNoise, SymbolKind::Placeholder, Layer::None, VarDomain::Continuous, {});
}
SymbolId FamilyDeclarer::bandwidth() {
  return declare(family::kBandwidth, SymbolKind::Placeholder, Layer::None, VarDomain::Continuous, {});
}
SymbolId FamilyDeclarer::rate_floor(double value) {
  return declare(family::kRateFloor, SymbolKind::Parameter, Layer::None, VarDomain::Continuous, {}, value);
}
SymbolId FamilyDeclarer::power_cap(double value) {
  return declare(family::kPowerCap, SymbolKind::Parameter, Layer::None, VarDomain::Continuous, {}, value);
}
SymbolId FamilyDeclarer::auxiliary() {
  return declare(family::kAuxiliary, SymbolKind::Variable, Layer::Phy, VarDomain::Continuous, kBUN);
}
SymbolId FamilyDeclarer::rate_multiplier() {
  return declare(family::kRateMultiplier, SymbolKind::Multiplier, Layer::None, VarDomain::Continuous,
                 {IndexSet::BaseStations, IndexSet::Users});
}
SymbolId FamilyDeclarer::coupling_multiplier() {
  return declare(family::kCouplingMultiplier, SymbolKind::Multiplier, Layer::None, VarDomain::Continuous, kBUN);
}
SymbolId FamilyDeclarer::published() {
  return declare(family::kPublished, SymbolKind::Placeholder, Layer::None, VarDomain::Continuous, kBUN);
}

namespace {

Expr interference_term(FamilyDeclarer& f, const IndexArg& b, const IndexArg& u, const IndexArg& n) {
  auto b2 = IndexArg::named("b'");
  auto u2 = IndexArg::named("u'");
  Expr inner = ex::index_sum(
      "u'", IndexDomain{IndexDomain::Kind::ServedUsers, b2, {}},
      ex::mul({ex::indexed(f.power(), {b2, u2, n}), ex::indexed(f.assignment(), {b2, u2, n})}));
  return ex::index_sum("b'", IndexDomain{IndexDomain::Kind::OtherBaseStations, b, {}},
                       ex::mul({ex::indexed(f.gain(), {b2, u, n}), inner}));
}

}  // namespace

Expr sinr_term(FamilyDeclarer& f, const IndexArg& b, const IndexArg& u, const IndexArg& n) {
  Expr signal = ex::mul({ex::indexed(f.gain(), {b, u, n}), ex::indexed(f.assignment(), {b, u, n}),
                         ex::indexed(f.power(), {b, u, n})});
  Expr denom = ex::sum({ex::symbol(f.noise()), interference_term(f, b, u, n)});
  return ex::div(signal, denom);
}

Expr capacity_term(FamilyDeclarer& f, const IndexArg& b, const IndexArg& u, const IndexArg& n) {
  Expr sinr = sinr_term(f, b, u, n);
  return ex::mul({ex::symbol(f.bandwidth()), ex::log2(ex::sum({ex::constant(1.0), sinr}))});
}

const ConstraintTemplate* CentralizedProblem::find(ConstraintKind kind) const {
  for (const auto& c : constraints) {
    if (c.kind == kind) return &c;
  }
  return nullptr;
}

namespace {

IndexDomain all_bs() { return IndexDomain{IndexDomain::Kind::BaseStations, {}, {}}; }
IndexDomain served(const IndexArg& b) { return IndexDomain{IndexDomain::Kind::ServedUsers, b, {}}; }
IndexDomain channels() { return IndexDomain{IndexDomain::Kind::Channels, {}, {}}; }

class Expander {
 public:
  explicit Expander(FamilyDeclarer& f) : f_(f) {}

  Expr expand(const Expr& e) {
    return rewrite(e, [this](const Expr& x) -> std::optional<Expr> {
      if (x.op() == Op::IndexSum && x->domain.kind == IndexDomain::Kind::AllUsers) {
        auto b = IndexArg::named("b");
        Expr body = expand(x->children[0]);
        return ex::index_sum("b", all_bs(), ex::index_sum(x->index_var, served(b), body));
      }
      if (x.op() == Op::Builtin) return builtin(x->builtin, x->args);
      return std::nullopt;
    });
  }

 private:
  Expr over_channels(BuiltinTerm term, const IndexArg& b, const IndexArg& u) {
    auto n = IndexArg::named("n");
    switch (term) {
      case BuiltinTerm::Rate: return ex::index_sum("n", channels(), capacity_term(f_, b, u, n));
      case BuiltinTerm::Power: return ex::index_sum("n", channels(), ex::indexed(f_.power(), {b, u, n}));
      case BuiltinTerm::Sinr: return ex::index_sum("n", channels(), sinr_term(f_, b, u, n));
      case BuiltinTerm::Scheduled: return ex::index_sum("n", channels(), ex::indexed(f_.assignment(), {b, u, n}));
      case BuiltinTerm::EnergyEfficiency:
        return ex::div(over_channels(BuiltinTerm::Rate, b, u), over_channels(BuiltinTerm::Power, b, u));
    }
    throw UnsupportedTerm(to_string(term));
  }

  // Sum of a per-user term over the users of b (or of every base station).
  Expr over_users(BuiltinTerm term, std::optional<IndexArg> b) {
    auto u = IndexArg::named("u");
    if (b) return ex::index_sum("u", served(*b), over_channels(term, *b, u));
    auto bb = IndexArg::named("b");
    return ex::index_sum("b", all_bs(), ex::index_sum("u", served(bb), over_channels(term, bb, u)));
  }

  Expr builtin(BuiltinTerm term, const std::vector<IndexArg>& scope) {
    if (scope.size() == 2) return over_channels(term, scope[0], scope[1]);
    std::optional<IndexArg> b;
    if (scope.size() == 1) b = scope[0];
    if (term == BuiltinTerm::EnergyEfficiency) {
      return ex::div(over_users(BuiltinTerm::Rate, b), over_users(BuiltinTerm::Power, b));
    }
    return over_users(term, b);
  }

  FamilyDeclarer& f_;
};

bool mentions(const Expr& e, BuiltinTerm term) {
  if (e.op() == Op::Builtin && e->builtin == term) return true;
  return std::any_of(e->children.begin(), e->children.end(), [&](const Expr& c) { return mentions(c, term); });
}

}  // namespace

CentralizedProblem generate_problem(const VirtualNetwork& nwk, int slice_id) {
  const SliceDefinition& s = nwk.slice(slice_id);
  if (!s.objective) throw NoObjective("slice " + std::to_string(slice_id) + " has no objective");
  CentralizedProblem prob;
  prob.slice_id = slice_id;
  prob.bs_count = nwk.bs_count();
  prob.objective_text = s.objective_text.value_or("");
  prob.direction = s.objective->direction;
  prob.uses_energy_efficiency = mentions(s.objective->body, BuiltinTerm::EnergyEfficiency);

  FamilyDeclarer f(prob.symbols);
  Expander expander(f);
  prob.objective = expander.expand(s.objective->body);

  for (const auto& t : s.constraints) {
    ConstraintTemplate c = t;
    c.lhs = expander.expand(t.lhs);
    if (c.kind == ConstraintKind::MinRate) c.rhs = ex::symbol(f.rate_floor(t.rhs.constant_value()));
    if (c.kind == ConstraintKind::PowerBudget) c.rhs = ex::symbol(f.power_cap(t.rhs.constant_value()));
    prob.constraints.push_back(std::move(c));
  }
  auto has = [&](ConstraintKind k) { return prob.find(k) != nullptr; };
  if (!has(ConstraintKind::PowerBudget)) {
    ConstraintArgs args;
    args.pmax = 1.0;
    ConstraintTemplate c = parse_constraint("bs_power_budget", args);
    c.lhs = expander.expand(c.lhs);
    c.rhs = ex::symbol(f.power_cap(1.0));
    prob.constraints.push_back(std::move(c));
  }
  if (!has(ConstraintKind::OneChannelPerUser)) {
    ConstraintTemplate c = parse_constraint("one_channel_per_user", {});
    c.lhs = expander.expand(c.lhs);
    prob.constraints.push_back(std::move(c));
  }
  {
    auto b = IndexArg::named("b");
    ConstraintTemplate c;
    c.kind = ConstraintKind::OneUserPerChannel;
    c.lhs = ex::index_sum("u", served(b), ex::indexed(f.assignment(), {b, IndexArg::named("u"), IndexArg::named("n")}));
    c.relation = Relation::Le;
    c.rhs = ex::constant(1.0);
    c.quantifiers = {Quantifier{"b", all_bs()}, Quantifier{"n", channels()}};
    prob.constraints.push_back(std::move(c));
  }
  std::stable_sort(prob.constraints.begin(), prob.constraints.end(),
                   [](const ConstraintTemplate& a, const ConstraintTemplate& b) { return a.kind < b.kind; });
  return prob;
}

void ground_constraint(const ConstraintTemplate& t, Grounder& grounder, std::vector<GroundConstraint>& out) {
  Grounder::Env env;
  std::function<void(std::size_t)> rec = [&](std::size_t q) {
    if (q == t.quantifiers.size()) {
      GroundConstraint g;
      g.kind = t.kind;
      g.lhs = grounder.ground(t.lhs, env);
      g.relation = t.relation;
      g.rhs = grounder.ground(t.rhs, env);
      g.label = to_string(t.kind);
      std::string idx;
      for (const auto& [var, v] : env) idx += (idx.empty() ? "" : ",") + var + "=" + std::to_string(v);
      if (!idx.empty()) g.label += "[" + idx + "]";
      out.push_back(std::move(g));
      return;
    }
    for (int v : grounder.enumerate(t.quantifiers[q].domain, env)) {
      env.emplace_back(t.quantifiers[q].var, v);
      rec(q + 1);
      env.pop_back();
    }
  };
  rec(0);
}

GroundProblem instantiate(const CentralizedProblem& prob, const Shape& shape) {
  GroundProblem g;
  g.direction = prob.direction;
  Grounder grounder(prob.symbols, shape, g.symbols);
  g.objective = grounder.ground(prob.objective);
  for (const auto& c : prob.constraints) ground_constraint(c, grounder, g.constraints);
  return g;
}

ClosureReport check_symbol_closure(const CentralizedProblem& prob) {
  std::set<SymbolId> used;
  auto add = [&](const Expr& e) {
    for (SymbolId s : free_symbols(e)) used.insert(s);
  };
  add(prob.objective);
  for (const auto& c : prob.constraints) {
    add(c.lhs);
    add(c.rhs);
  }
  ClosureReport r;
  for (const auto& m : prob.symbols.all()) {
    if (!used.count(m.id)) r.unused.push_back(m.name);
  }
  for (SymbolId s : used) {
    if (s >= prob.symbols.size()) r.undeclared.push_back("s" + std::to_string(s));
  }
  return r;
}

}  // namespace cellos
