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

#include "cellos/decomposition.hpp"

#include <algorithm>

#include "cellos/error.hpp"

namespace cellos {

std::vector<VariableClass> detect_and_classify(const SymbolTable& ground) {
  std::vector<VariableClass> out;
  for (const auto& m : ground.all()) {
    if (m.kind != SymbolKind::Variable) continue;
    auto bs = std::find_if(m.indices.begin(), m.indices.end(),
                           [](const IndexBinding& ib) { return ib.set == IndexSet::BaseStations; });
    if (bs == m.indices.end() || bs->arg.is_var() || !m.owner) {
      throw UnclassifiedVariable(m.name + " has no base-station index");
    }
    if (m.layer == Layer::None) throw UnclassifiedVariable(m.name + " has no layer");
    out.push_back(VariableClass{m.id, m.name, m.layer, bs->arg.value});
  }
  return out;
}

const char* to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Local: return "local";
    case EdgeKind::Horizontal: return "horizontal";
    case EdgeKind::Vertical: return "vertical";
  }
  return "?";
}

bool CouplingGraph::has_edge(SymbolId x, SymbolId y) const {
  if (x > y) std::swap(x, y);
  return std::any_of(edges.begin(), edges.end(), [&](const CouplingEdge& e) { return e.a == x && e.b == y; });
}

bool CouplingGraph::has_horizontal() const {
  return std::any_of(edges.begin(), edges.end(), [](const CouplingEdge& e) { return e.kind == EdgeKind::Horizontal; });
}

std::set<int> CouplingGraph::neighbors_of(int owner) const {
  std::set<int> out;
  for (const auto& e : edges) {
    if (e.kind != EdgeKind::Horizontal) continue;
    int oa = attributes.at(e.a).owner;
    int ob = attributes.at(e.b).owner;
    if (oa == owner) out.insert(ob);
    if (ob == owner) out.insert(oa);
  }
  return out;
}

namespace {

using EdgeSet = std::set<std::pair<SymbolId, SymbolId>>;

std::set<SymbolId> variables_in(const Expr& e, const std::map<SymbolId, VariableClass>& vars) {
  std::set<SymbolId> out;
  for (SymbolId s : free_symbols(e)) {
    if (vars.count(s)) out.insert(s);
  }
  return out;
}

void join(const std::set<SymbolId>& a, const std::set<SymbolId>& b, EdgeSet& edges) {
  for (SymbolId x : a) {
    for (SymbolId y : b) {
      if (x != y) edges.insert({std::min(x, y), std::max(x, y)});
    }
  }
}

void couple(const Expr& e, const std::map<SymbolId, VariableClass>& vars, EdgeSet& edges) {
  switch (e.op()) {
    case Op::Mul: {
      std::vector<std::set<SymbolId>> sets;
      for (const auto& c : e->children) sets.push_back(variables_in(c, vars));
      for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) join(sets[i], sets[j], edges);
      }
      break;
    }
    case Op::Div:
      join(variables_in(e->children[0], vars), variables_in(e->children[1], vars), edges);
      break;
    case Op::Log2:
    case Op::Ln:
    case Op::Pow: {
      auto s = variables_in(e->children[0], vars);
      join(s, s, edges);
      return;  // every pair below is already joined
    }
    default: break;
  }
  for (const auto& c : e->children) couple(c, vars, edges);
}

}  // namespace

CouplingGraph build_coupling_graph(const std::vector<Expr>& exprs, const SymbolTable& ground) {
  CouplingGraph g;
  for (const auto& vc : detect_and_classify(ground)) {
    g.vertices.push_back(vc.id);
    g.attributes.emplace(vc.id, vc);
  }
  EdgeSet edges;
  for (const auto& e : exprs) couple(e, g.attributes, edges);
  for (auto [a, b] : edges) {
    const auto& va = g.attributes.at(a);
    const auto& vb = g.attributes.at(b);
    EdgeKind kind = va.owner != vb.owner ? EdgeKind::Horizontal
                    : va.layer != vb.layer ? EdgeKind::Vertical
                                           : EdgeKind::Local;
    g.edges.push_back(CouplingEdge{a, b, kind});
  }
  return g;
}

CouplingGraph build_coupling_graph(const GroundProblem& prob) {
  std::vector<Expr> exprs = {prob.objective};
  for (const auto& c : prob.constraints) {
    exprs.push_back(c.lhs);
    exprs.push_back(c.rhs);
  }
  return build_coupling_graph(exprs, prob.symbols);
}

CouplingGraph build_coupling_graph(const CentralizedProblem& prob) {
  Shape probe;
  probe.channels = 1;
  for (int b = 0; b < prob.bs_count; ++b) probe.users_by_bs.push_back({b});
  // Scoped constraints name concrete UEs; let the probe serve them too.
  for (const auto& c : prob.constraints) {
    for (const auto& q : c.quantifiers) {
      for (int u : q.domain.subset) {
        if (probe.serving_bs(u) < 0) probe.users_by_bs[0].push_back(u);
      }
    }
  }
  return build_coupling_graph(instantiate(prob, probe));
}

DecompositionMethod parse_decomposition_method(const std::string& name) {
  if (name == "lagrangian-dual" || name == "lagrangian_dual") return DecompositionMethod::LagrangianDual;
  if (name == "partial-linearization" || name == "partial_linearization") {
    return DecompositionMethod::PartialLinearization;
  }
  throw InvalidEngineConfig("unknown decomposition method " + name);
}

const char* to_string(DecompositionMethod m) {
  return m == DecompositionMethod::LagrangianDual ? "lagrangian-dual" : "partial-linearization";
}

const ConstraintTemplate* DistributedProgram::find(ConstraintKind kind) const {
  for (const auto& c : constraints) {
    if (c.kind == kind) return &c;
  }
  return nullptr;
}

namespace {

IndexDomain served(const IndexArg& b) { return IndexDomain{IndexDomain::Kind::ServedUsers, b, {}}; }
IndexDomain channels() { return IndexDomain{IndexDomain::Kind::Channels, {}, {}}; }

// Keeps the addend of base station `owner` in a sum over B.
Expr restrict_to_owner(const Expr& e, int owner) {
  switch (e.op()) {
    case Op::IndexSum:
      if (e->domain.kind != IndexDomain::Kind::BaseStations) break;
      return bind_index(e->children[0], e->index_var, IndexArg::fixed(owner));
    case Op::Add: {
      std::vector<Expr> parts;
      for (const auto& c : e->children) parts.push_back(restrict_to_owner(c, owner));
      return ex::add(e->coeffs, std::move(parts));
    }
    case Op::Neg: return ex::neg(restrict_to_owner(e->children[0], owner));
    case Op::Constant: return owner == 0 ? e : ex::constant(0.0);
    default: break;
  }
  throw NotSeparable("objective is not a sum of per-base-station terms: " + to_string(e));
}

// Localizes a constraint template to one base station.
ConstraintTemplate localize(const ConstraintTemplate& c, int owner) {
  ConstraintTemplate out = c;
  out.quantifiers.clear();
  std::optional<std::string> bs_var;
  for (const auto& q : c.quantifiers) {
    if (q.domain.kind == IndexDomain::Kind::BaseStations && !bs_var) {
      bs_var = q.var;
      continue;
    }
    out.quantifiers.push_back(q);
  }
  if (!bs_var) throw NotSeparable(std::string("constraint ") + to_string(c.kind) + " is not per base station");
  auto me = IndexArg::fixed(owner);
  out.lhs = bind_index(c.lhs, *bs_var, me);
  out.rhs = bind_index(c.rhs, *bs_var, me);
  for (auto& q : out.quantifiers) {
    if (q.domain.ref.is_var() && q.domain.ref.var == *bs_var) q.domain.ref = me;
  }
  return out;
}

class Localizer {
 public:
  Localizer(SymbolTable& table, int owner) : f_(table), table_(table), owner_(owner) {}

  // Replaces each interference subterm by i[owner,u,n] and records h.
  Expr replace_interference(const Expr& e) {
    return rewrite(e, [this](const Expr& x) -> std::optional<Expr> {
      if (x.op() != Op::IndexSum || x->domain.kind != IndexDomain::Kind::OtherBaseStations) return std::nullopt;
      if (x->domain.ref != IndexArg::fixed(owner_)) {
        throw NotSeparable("interference term of another base station");
      }
      auto free = free_index_vars(x);
      free.erase(std::remove_if(free.begin(), free.end(),
                                [&](const std::string& v) { return v == x->domain.ref.var; }),
                 free.end());
      if (free.size() != 2) throw NotSeparable("interference term must depend on one user and one channel");
      Expr canonical = bind_index(bind_index(x, free[0], IndexArg::named("#u")), free[1], IndexArg::named("#n"));
      canonical = bind_index(bind_index(canonical, "#u", IndexArg::named("u")), "#n", IndexArg::named("n"));
      Expr h = published_form(canonical);
      if (!h_) {
        h_ = h;
      } else if (!structurally_equal(*h_, h)) {
        throw NotSeparable("inconsistent interference terms");
      }
      return ex::indexed(f_.auxiliary(),
                         {IndexArg::fixed(owner_), IndexArg::named(free[0]), IndexArg::named(free[1])});
    });
  }

  const std::optional<Expr>& h() const { return h_; }
  FamilyDeclarer& families() { return f_; }

  // Every variable occurrence must belong to the owner.
  void check_ownership(const Expr& e, const char* where) const {
    rewrite(e, [&](const Expr& x) -> std::optional<Expr> {
      if (x.op() != Op::Indexed) return std::nullopt;
      const SymbolMeta& m = table_.at(x->symbol);
      if (m.kind != SymbolKind::Variable) return x;
      for (std::size_t k = 0; k < m.indices.size(); ++k) {
        if (m.indices[k].set != IndexSet::BaseStations) continue;
        if (x->args[k] != IndexArg::fixed(owner_)) {
          throw NotSeparable(std::string(where) + " references variables of other base stations");
        }
      }
      return x;
    });
  }

 private:
  // Rewrites p[a]*y[a] products into the published value x[a].
  Expr published_form(const Expr& e) {
    SymbolId p = f_.power(), y = f_.assignment();
    return rewrite(e, [&](const Expr& x) -> std::optional<Expr> {
      if (x.op() != Op::Mul) return std::nullopt;
      std::vector<Expr> kids = x->children;
      for (std::size_t i = 0; i < kids.size(); ++i) {
        if (kids[i].op() != Op::Indexed || kids[i]->symbol != p) continue;
        for (std::size_t j = 0; j < kids.size(); ++j) {
          if (kids[j].op() != Op::Indexed || kids[j]->symbol != y || kids[j]->args != kids[i]->args) continue;
          Expr pub = ex::indexed(f_.published(), kids[i]->args);
          std::vector<Expr> rest;
          for (std::size_t k = 0; k < kids.size(); ++k) {
            if (k != i && k != j) rest.push_back(published_form(kids[k]));
          }
          rest.push_back(pub);
          return ex::mul(std::move(rest));
        }
      }
      return std::nullopt;
    });
  }

  FamilyDeclarer f_;
  SymbolTable& table_;
  int owner_;
  std::optional<Expr> h_;
};

void collect_manifest(const Expr& e, const SymbolTable& t, std::set<std::string>& out) {
  for (SymbolId s : free_symbols(e)) {
    const auto& m = t.at(s);
    if (m.kind == SymbolKind::Placeholder || m.kind == SymbolKind::Parameter) out.insert(m.name);
  }
}

void finish_manifest(DistributedProgram& dp) {
  std::set<std::string> names;
  collect_manifest(dp.objective, dp.symbols, names);
  for (const auto* list : {&dp.constraints, &dp.relaxed}) {
    for (const auto& c : *list) {
      collect_manifest(c.lhs, dp.symbols, names);
      collect_manifest(c.rhs, dp.symbols, names);
    }
  }
  if (dp.auxiliary) collect_manifest(dp.auxiliary->h, dp.symbols, names);
  for (const auto& r : dp.update_rules) collect_manifest(r.subgradient, dp.symbols, names);
  for (const auto& p : dp.publish) collect_manifest(p.value, dp.symbols, names);
  dp.placeholder_manifest.assign(names.begin(), names.end());
}

DistributedProgram uncoupled(const CentralizedProblem& prob, int owner, const EngineConfig& engine) {
  DistributedProgram dp;
  dp.owner = owner;
  dp.bs_count = prob.bs_count;
  dp.slice_id = prob.slice_id;
  dp.lagrangian = false;
  dp.direction = prob.direction;
  dp.objective_text = prob.objective_text;
  dp.symbols = prob.symbols;
  dp.engine = engine;
  if (prob.bs_count == 1) {
    dp.objective = prob.objective;
    dp.constraints = prob.constraints;
  } else {
    dp.objective = restrict_to_owner(prob.objective, owner);
    for (const auto& c : prob.constraints) dp.constraints.push_back(localize(c, owner));
    Localizer loc(dp.symbols, owner);
    loc.check_ownership(dp.objective, "objective");
  }
  finish_manifest(dp);
  return dp;
}

DistributedProgram lagrangian(const CentralizedProblem& prob, int owner, const std::set<int>& neighbors,
                              const EngineConfig& engine) {
  DistributedProgram dp;
  dp.owner = owner;
  dp.bs_count = prob.bs_count;
  dp.slice_id = prob.slice_id;
  dp.direction = Direction::Maximize;
  dp.objective_text = prob.objective_text;
  dp.symbols = prob.symbols;
  dp.engine = engine;
  dp.neighbors.assign(neighbors.begin(), neighbors.end());

  Localizer loc(dp.symbols, owner);
  FamilyDeclarer& f = loc.families();
  auto me = IndexArg::fixed(owner);
  auto u = IndexArg::named("u");
  auto n = IndexArg::named("n");

  Expr primal = prob.direction == Direction::Maximize ? prob.objective : ex::neg(prob.objective);
  Expr local = loc.replace_interference(restrict_to_owner(primal, owner));

  for (const auto& c : prob.constraints) {
    ConstraintTemplate lc = localize(c, owner);
    lc.lhs = loc.replace_interference(lc.lhs);
    dp.constraints.push_back(lc);
  }

  std::vector<Expr> terms = {local};
  std::vector<double> coeffs = {1.0};

  if (const ConstraintTemplate* mr = dp.find(ConstraintKind::MinRate)) {
    if (mr->quantifiers.size() != 1) throw NotSeparable("min-rate constraint must range over users only");
    const Quantifier& q = mr->quantifiers[0];
    Expr shortfall = ex::add({1.0, -1.0}, {mr->rhs, bind_index(mr->lhs, q.var, u)});
    SymbolId lambda = f.rate_multiplier();
    Quantifier over{"u", q.domain};
    terms.push_back(ex::index_sum("u", over.domain, ex::mul({ex::indexed(lambda, {me, u}), shortfall})));
    coeffs.push_back(-1.0);
    dp.relaxed.push_back(*mr);
    dp.update_rules.push_back(UpdateRule{family::kRateMultiplier, shortfall, {over}, true});
  }

  if (loc.h()) {
    const Expr& h = *loc.h();
    SymbolId aux = f.auxiliary();
    SymbolId mu = f.coupling_multiplier();
    std::vector<Quantifier> un = {Quantifier{"u", served(me)}, Quantifier{"n", channels()}};
    Expr slack = ex::add({1.0, -1.0}, {h, ex::indexed(aux, {me, u, n})});
    terms.push_back(ex::index_sum(
        "u", served(me), ex::index_sum("n", channels(), ex::mul({ex::indexed(mu, {me, u, n}), slack}))));
    coeffs.push_back(-1.0);
    dp.auxiliary = AuxiliaryDef{family::kAuxiliary, h, un, 0.0};
    dp.update_rules.push_back(UpdateRule{family::kCouplingMultiplier, slack, un, true});

    ConstraintTemplate coupling;
    coupling.kind = ConstraintKind::AuxiliaryCoupling;
    coupling.lhs = ex::indexed(aux, {me, u, n});
    coupling.relation = Relation::Ge;
    coupling.rhs = h;
    coupling.quantifiers = un;
    dp.relaxed.push_back(coupling);

    ConstraintTemplate bound = coupling;
    bound.kind = ConstraintKind::AuxiliaryBound;
    bound.rhs = ex::constant(0.0);
    dp.constraints.push_back(bound);

    dp.publish.push_back(PublishEntry{
        family::kPublished, ex::mul({ex::indexed(f.power(), {me, u, n}), ex::indexed(f.assignment(), {me, u, n})}),
        un});
  }
  if (dp.find(ConstraintKind::MinRate)) {
    dp.publish.push_back(PublishEntry{family::kRateMultiplier, ex::indexed(f.rate_multiplier(), {me, u}),
                                      {Quantifier{"u", served(me)}}});
  }

  dp.objective = ex::add(std::move(coeffs), std::move(terms));
  loc.check_ownership(dp.objective, "local objective");
  for (const auto& c : dp.constraints) loc.check_ownership(c.lhs, "local constraint");
  finish_manifest(dp);
  return dp;
}

}  // namespace

std::vector<DistributedProgram> decompose(const CentralizedProblem& prob, const CouplingGraph& graph,
                                          DecompositionMethod method, const EngineConfig& engine) {
  if (method == DecompositionMethod::PartialLinearization) {
    throw NotImplemented("partial linearization decomposition");
  }
  if (prob.uses_energy_efficiency) {
    throw NotSeparable("energy_efficiency is a fractional objective; report it as a metric instead");
  }
  std::vector<DistributedProgram> out;
  for (int b = 0; b < prob.bs_count; ++b) {
    if (prob.bs_count == 1 || !graph.has_horizontal()) {
      out.push_back(uncoupled(prob, b, engine));
    } else {
      out.push_back(lagrangian(prob, b, graph.neighbors_of(b), engine));
    }
  }
  return out;
}

}  // namespace cellos
