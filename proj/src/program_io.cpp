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

#include "cellos/program_io.hpp"

#include "cellos/error.hpp"

namespace cellos {

using nlohmann::json;

namespace {

const char* op_name(Op op) {
  switch (op) {
    case Op::Constant: return "const";
    case Op::Symbol: return "sym";
    case Op::Indexed: return "idx";
    case Op::IndexSum: return "sum";
    case Op::Add: return "add";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Log2: return "log2";
    case Op::Ln: return "ln";
    case Op::Pow: return "pow";
    case Op::Neg: return "neg";
    case Op::Builtin: return "builtin";
  }
  return "?";
}

Op op_from(const std::string& s) {
  static const std::pair<const char*, Op> kOps[] = {
      {"const", Op::Constant}, {"sym", Op::Symbol}, {"idx", Op::Indexed}, {"sum", Op::IndexSum},
      {"add", Op::Add},        {"mul", Op::Mul},    {"div", Op::Div},     {"log2", Op::Log2},
      {"ln", Op::Ln},          {"pow", Op::Pow},    {"neg", Op::Neg},     {"builtin", Op::Builtin}};
  for (auto [name, op] : kOps) {
    if (s == name) return op;
  }
  throw MalformedProgram("unknown node kind " + s);
}

const char* domain_name(IndexDomain::Kind k) {
  switch (k) {
    case IndexDomain::Kind::BaseStations: return "B";
    case IndexDomain::Kind::OtherBaseStations: return "B_except";
    case IndexDomain::Kind::ServedUsers: return "U_b";
    case IndexDomain::Kind::ScopedUsers: return "U_b_subset";
    case IndexDomain::Kind::AllUsers: return "U";
    case IndexDomain::Kind::Channels: return "N";
  }
  return "?";
}

IndexDomain::Kind domain_from(const std::string& s) {
  for (auto k : {IndexDomain::Kind::BaseStations, IndexDomain::Kind::OtherBaseStations, IndexDomain::Kind::ServedUsers,
                 IndexDomain::Kind::ScopedUsers, IndexDomain::Kind::AllUsers, IndexDomain::Kind::Channels}) {
    if (s == domain_name(k)) return k;
  }
  throw MalformedProgram("unknown index domain " + s);
}

template <class E, std::size_t N>
E enum_from(const std::string& s, const std::array<E, N>& all) {
  for (E e : all) {
    if (s == to_string(e)) return e;
  }
  throw MalformedProgram("unknown value " + s);
}

const std::array<BuiltinTerm, 5> kBuiltins = {BuiltinTerm::Rate, BuiltinTerm::Power, BuiltinTerm::Sinr,
                                              BuiltinTerm::EnergyEfficiency, BuiltinTerm::Scheduled};
const std::array<SymbolKind, 4> kKinds = {SymbolKind::Variable, SymbolKind::Placeholder, SymbolKind::Parameter,
                                          SymbolKind::Multiplier};
const std::array<Layer, 3> kLayers = {Layer::None, Layer::Mac, Layer::Phy};
const std::array<IndexSet, 3> kSets = {IndexSet::BaseStations, IndexSet::Users, IndexSet::Channels};
const std::array<Relation, 3> kRelations = {Relation::Le, Relation::Ge, Relation::Eq};
const std::array<ConstraintKind, 6> kConstraintKinds = {
    ConstraintKind::MinRate,           ConstraintKind::PowerBudget,       ConstraintKind::OneChannelPerUser,
    ConstraintKind::OneUserPerChannel, ConstraintKind::AuxiliaryCoupling, ConstraintKind::AuxiliaryBound};
const std::array<Direction, 2> kDirections = {Direction::Maximize, Direction::Minimize};

json arg_to_json(const IndexArg& a) { return a.is_var() ? json(a.var) : json(a.value); }

IndexArg arg_from_json(const json& j) {
  if (j.is_string()) return IndexArg::named(j.get<std::string>());
  if (j.is_number_integer()) return IndexArg::fixed(j.get<int>());
  throw MalformedProgram("index argument must be a name or an integer");
}

json args_to_json(const std::vector<IndexArg>& args) {
  json out = json::array();
  for (const auto& a : args) out.push_back(arg_to_json(a));
  return out;
}

std::vector<IndexArg> args_from_json(const json& j) {
  std::vector<IndexArg> out;
  for (const auto& a : j) out.push_back(arg_from_json(a));
  return out;
}

json domain_to_json(const IndexDomain& d) {
  json j = {{"kind", domain_name(d.kind)}};
  if (d.kind == IndexDomain::Kind::OtherBaseStations || d.kind == IndexDomain::Kind::ServedUsers ||
      d.kind == IndexDomain::Kind::ScopedUsers) {
    j["ref"] = arg_to_json(d.ref);
  }
  if (d.kind == IndexDomain::Kind::ScopedUsers) j["subset"] = d.subset;
  return j;
}

IndexDomain domain_from_json(const json& j) {
  IndexDomain d;
  d.kind = domain_from(j.at("kind").get<std::string>());
  if (j.contains("ref")) d.ref = arg_from_json(j.at("ref"));
  if (j.contains("subset")) d.subset = j.at("subset").get<std::vector<int>>();
  return d;
}

json quantifiers_to_json(const std::vector<Quantifier>& qs) {
  json out = json::array();
  for (const auto& q : qs) out.push_back({{"var", q.var}, {"domain", domain_to_json(q.domain)}});
  return out;
}

std::vector<Quantifier> quantifiers_from_json(const json& j) {
  std::vector<Quantifier> out;
  for (const auto& q : j) out.push_back(Quantifier{q.at("var").get<std::string>(), domain_from_json(q.at("domain"))});
  return out;
}

json constraint_to_json(const ConstraintTemplate& c, const SymbolTable& t) {
  return {{"kind", to_string(c.kind)},
          {"lhs", expr_to_json(c.lhs, t)},
          {"relation", to_string(c.relation)},
          {"rhs", expr_to_json(c.rhs, t)},
          {"quantifiers", quantifiers_to_json(c.quantifiers)}};
}

ConstraintTemplate constraint_from_json(const json& j, const SymbolTable& t) {
  ConstraintTemplate c;
  c.kind = enum_from(j.at("kind").get<std::string>(), kConstraintKinds);
  c.lhs = expr_from_json(j.at("lhs"), t);
  c.relation = enum_from(j.at("relation").get<std::string>(), kRelations);
  c.rhs = expr_from_json(j.at("rhs"), t);
  c.quantifiers = quantifiers_from_json(j.at("quantifiers"));
  return c;
}

json engine_to_json(const EngineConfig& e) {
  return {{"method", e.method},
          {"decomposition", e.decomposition},
          {"alpha", e.alpha},
          {"max_iterations", e.max_iterations},
          {"epsilon", e.epsilon},
          {"rate_margin", e.rate_margin},
          {"inertia_warmup", e.inertia_warmup},
          {"inertia_switch", e.inertia_switch}};
}

EngineConfig engine_from_json(const json& j) {
  EngineConfig e;
  e.method = j.at("method").get<std::string>();
  e.decomposition = j.at("decomposition").get<std::string>();
  e.alpha = j.at("alpha").get<double>();
  e.max_iterations = j.at("max_iterations").get<int>();
  e.epsilon = j.at("epsilon").get<double>();
  e.rate_margin = j.at("rate_margin").get<double>();
  e.inertia_warmup = j.at("inertia_warmup").get<int>();
  e.inertia_switch = j.at("inertia_switch").get<double>();
  e.validate();
  return e;
}

}  // namespace

json expr_to_json(const Expr& e, const SymbolTable& t) {
  const Node& n = e.node();
  json j = {{"op", op_name(n.op)}};
  switch (n.op) {
    case Op::Constant: j["value"] = n.value; break;
    case Op::Symbol: j["name"] = t.at(n.symbol).name; break;
    case Op::Indexed:
      j["name"] = t.at(n.symbol).name;
      j["args"] = args_to_json(n.args);
      break;
    case Op::IndexSum:
      j["var"] = n.index_var;
      j["domain"] = domain_to_json(n.domain);
      break;
    case Op::Builtin:
      j["term"] = to_string(n.builtin);
      j["scope"] = args_to_json(n.args);
      break;
    case Op::Add: j["coeffs"] = n.coeffs; break;
    case Op::Pow: j["exponent"] = n.value; break;
    default: break;
  }
  if (!n.children.empty()) {
    json kids = json::array();
    for (const auto& c : n.children) kids.push_back(expr_to_json(c, t));
    j["children"] = std::move(kids);
  }
  return j;
}

Expr expr_from_json(const json& j, const SymbolTable& t) {
  try {
    Op op = op_from(j.at("op").get<std::string>());
    std::vector<Expr> kids;
    if (j.contains("children")) {
      for (const auto& c : j.at("children")) kids.push_back(expr_from_json(c, t));
    }
    auto child = [&](std::size_t k) -> const Expr& {
      if (kids.size() <= k) throw MalformedProgram(std::string("missing operand for ") + op_name(op));
      return kids[k];
    };
    switch (op) {
      case Op::Constant: return ex::constant(j.at("value").get<double>());
      case Op::Symbol: return ex::symbol(t.require(j.at("name").get<std::string>()));
      case Op::Indexed: return ex::indexed(t.require(j.at("name").get<std::string>()), args_from_json(j.at("args")));
      case Op::IndexSum:
        return ex::index_sum(j.at("var").get<std::string>(), domain_from_json(j.at("domain")), child(0));
      case Op::Builtin:
        return ex::builtin(enum_from(j.at("term").get<std::string>(), kBuiltins), args_from_json(j.at("scope")));
      case Op::Add: return ex::raw::add(j.at("coeffs").get<std::vector<double>>(), std::move(kids));
      case Op::Mul: return ex::raw::mul(std::move(kids));
      case Op::Div: return ex::raw::div(child(0), child(1));
      case Op::Log2: return ex::raw::log2(child(0));
      case Op::Ln: return ex::raw::ln(child(0));
      case Op::Pow: return ex::raw::pow(child(0), j.at("exponent").get<double>());
      case Op::Neg: return ex::raw::neg(child(0));
    }
  } catch (const json::exception& ex) {
    throw MalformedProgram(ex.what());
  } catch (const UnboundSymbol& ex) {
    throw MalformedProgram(std::string("undeclared symbol: ") + ex.what());
  } catch (const MalformedExpr& ex) {
    throw MalformedProgram(ex.what());
  }
  throw MalformedProgram("unreachable node kind");
}

json symbols_to_json(const SymbolTable& table) {
  json out = json::array();
  for (const auto& m : table.all()) {
    json indices = json::array();
    for (const auto& ib : m.indices) indices.push_back({{"set", to_string(ib.set)}, {"arg", arg_to_json(ib.arg)}});
    json s = {{"name", m.name},
              {"family", m.family},
              {"kind", to_string(m.kind)},
              {"layer", to_string(m.layer)},
              {"domain", m.domain == VarDomain::Binary ? "binary" : "continuous"},
              {"indices", indices}};
    s["owner"] = m.owner ? json(*m.owner) : json(nullptr);
    s["value"] = m.value ? json(*m.value) : json(nullptr);
    out.push_back(std::move(s));
  }
  return out;
}

SymbolTable symbols_from_json(const json& j) {
  SymbolTable t;
  try {
    for (const auto& s : j) {
      SymbolMeta m;
      m.name = s.at("name").get<std::string>();
      m.family = s.at("family").get<std::string>();
      m.kind = enum_from(s.at("kind").get<std::string>(), kKinds);
      m.layer = enum_from(s.at("layer").get<std::string>(), kLayers);
      std::string domain = s.at("domain").get<std::string>();
      if (domain != "binary" && domain != "continuous") throw MalformedProgram("unknown variable domain " + domain);
      m.domain = domain == "binary" ? VarDomain::Binary : VarDomain::Continuous;
      for (const auto& ib : s.at("indices")) {
        m.indices.push_back(IndexBinding{enum_from(ib.at("set").get<std::string>(), kSets), arg_from_json(ib.at("arg"))});
      }
      if (!s.at("owner").is_null()) m.owner = s.at("owner").get<int>();
      if (!s.at("value").is_null()) m.value = s.at("value").get<double>();
      t.add(std::move(m));
    }
  } catch (const json::exception& ex) {
    throw MalformedProgram(ex.what());
  } catch (const MalformedExpr& ex) {
    throw MalformedProgram(ex.what());
  }
  return t;
}

json program_to_json(const DistributedProgram& dp) {
  const SymbolTable& t = dp.symbols;
  json constraints = json::array(), relaxed = json::array(), rules = json::array(), publish = json::array();
  for (const auto& c : dp.constraints) constraints.push_back(constraint_to_json(c, t));
  for (const auto& c : dp.relaxed) relaxed.push_back(constraint_to_json(c, t));
  for (const auto& r : dp.update_rules) {
    rules.push_back({{"multiplier", r.multiplier},
                     {"subgradient", expr_to_json(r.subgradient, t)},
                     {"quantifiers", quantifiers_to_json(r.quantifiers)},
                     {"projection", r.project_nonnegative ? "nonnegative" : "none"}});
  }
  for (const auto& p : dp.publish) {
    publish.push_back({{"name", p.name}, {"value", expr_to_json(p.value, t)}, {"quantifiers", quantifiers_to_json(p.quantifiers)}});
  }
  json aux = nullptr;
  if (dp.auxiliary) {
    aux = {{"family", dp.auxiliary->family},
           {"h", expr_to_json(dp.auxiliary->h, t)},
           {"quantifiers", quantifiers_to_json(dp.auxiliary->quantifiers)},
           {"floor", dp.auxiliary->floor}};
  }
  return {{"schema", kIrSchema},
          {"owner", dp.owner},
          {"bs_count", dp.bs_count},
          {"slice_id", dp.slice_id},
          {"lagrangian", dp.lagrangian},
          {"direction", to_string(dp.direction)},
          {"objective_text", dp.objective_text},
          {"symbols", symbols_to_json(t)},
          {"objective_ast", expr_to_json(dp.objective, t)},
          {"constraints", constraints},
          {"relaxed", relaxed},
          {"auxiliary", aux},
          {"update_rules", rules},
          {"publish_list", publish},
          {"placeholder_manifest", dp.placeholder_manifest},
          {"neighbors", dp.neighbors},
          {"engine_config", engine_to_json(dp.engine)}};
}

DistributedProgram program_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kIrSchema) {
      throw MalformedProgram("unsupported schema " + j.at("schema").dump());
    }
    DistributedProgram dp;
    dp.owner = j.at("owner").get<int>();
    dp.bs_count = j.at("bs_count").get<int>();
    dp.slice_id = j.at("slice_id").get<int>();
    dp.lagrangian = j.at("lagrangian").get<bool>();
    dp.direction = enum_from(j.at("direction").get<std::string>(), kDirections);
    dp.objective_text = j.at("objective_text").get<std::string>();
    dp.symbols = symbols_from_json(j.at("symbols"));
    const SymbolTable& t = dp.symbols;
    dp.objective = expr_from_json(j.at("objective_ast"), t);
    for (const auto& c : j.at("constraints")) dp.constraints.push_back(constraint_from_json(c, t));
    for (const auto& c : j.at("relaxed")) dp.relaxed.push_back(constraint_from_json(c, t));
    if (!j.at("auxiliary").is_null()) {
      const auto& a = j.at("auxiliary");
      dp.auxiliary = AuxiliaryDef{a.at("family").get<std::string>(), expr_from_json(a.at("h"), t),
                                  quantifiers_from_json(a.at("quantifiers")), a.at("floor").get<double>()};
    }
    for (const auto& r : j.at("update_rules")) {
      dp.update_rules.push_back(UpdateRule{r.at("multiplier").get<std::string>(), expr_from_json(r.at("subgradient"), t),
                                           quantifiers_from_json(r.at("quantifiers")),
                                           r.at("projection").get<std::string>() == "nonnegative"});
    }
    for (const auto& p : j.at("publish_list")) {
      dp.publish.push_back(PublishEntry{p.at("name").get<std::string>(), expr_from_json(p.at("value"), t),
                                        quantifiers_from_json(p.at("quantifiers"))});
    }
    dp.placeholder_manifest = j.at("placeholder_manifest").get<std::vector<std::string>>();
    dp.neighbors = j.at("neighbors").get<std::vector<int>>();
    dp.engine = engine_from_json(j.at("engine_config"));
    return dp;
  } catch (const json::exception& ex) {
    throw MalformedProgram(ex.what());
  } catch (const InvalidEngineConfig& ex) {
    throw MalformedProgram(ex.what());
  }
}

std::string serialize_program(const DistributedProgram& dp, std::size_t limit) {
  std::string out = program_to_json(dp).dump();
  if (out.size() > limit) {
    throw SerializationOverflow("program of base station " + std::to_string(dp.owner) + " is " +
                                std::to_string(out.size()) + " bytes, limit " + std::to_string(limit));
  }
  return out;
}

DistributedProgram deserialize_program(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& ex) {
    throw MalformedProgram(ex.what());
  }
  return program_from_json(j);
}

json problem_to_json(const CentralizedProblem& prob) {
  json constraints = json::array();
  for (const auto& c : prob.constraints) constraints.push_back(constraint_to_json(c, prob.symbols));
  return {{"schema", kIrSchema},
          {"slice_id", prob.slice_id},
          {"bs_count", prob.bs_count},
          {"objective_text", prob.objective_text},
          {"direction", to_string(prob.direction)},
          {"symbols", symbols_to_json(prob.symbols)},
          {"objective_ast", expr_to_json(prob.objective, prob.symbols)},
          {"constraints", constraints}};
}

std::vector<Receipt> dispatch(const std::vector<DistributedProgram>& programs, const std::vector<Endpoint>& endpoints,
                              std::size_t limit) {
  std::vector<std::pair<const Endpoint*, std::string>> plan;
  for (const auto& dp : programs) {
    const Endpoint* target = nullptr;
    for (const auto& ep : endpoints) {
      if (ep.owner == dp.owner) target = &ep;
    }
    if (!target) throw EndpointUnreachable("no endpoint for base station " + std::to_string(dp.owner));
    plan.emplace_back(target, serialize_program(dp, limit));
  }
  std::vector<Receipt> receipts;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    plan[k].first->deliver(plan[k].second);
    receipts.push_back(Receipt{programs[k].owner, plan[k].second.size()});
  }
  return receipts;
}

}  // namespace cellos
