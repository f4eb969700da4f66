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

#include "cellos/expr.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "cellos/error.hpp"

namespace cellos {

const char* to_string(SymbolKind kind) {
  switch (kind) {
    case SymbolKind::Variable: return "variable";
    case SymbolKind::Placeholder: return "placeholder";
    case SymbolKind::Parameter: return "parameter";
    case SymbolKind::Multiplier: return "multiplier";
  }
  return "?";
}

const char* to_string(Layer layer) {
  switch (layer) {
    case Layer::None: return "none";
    case Layer::Mac: return "MAC";
    case Layer::Phy: return "PHY";
  }
  return "?";
}

const char* to_string(IndexSet set) {
  switch (set) {
    case IndexSet::BaseStations: return "B";
    case IndexSet::Users: return "U";
    case IndexSet::Channels: return "N";
  }
  return "?";
}

const char* to_string(BuiltinTerm term) {
  switch (term) {
    case BuiltinTerm::Rate: return "rate";
    case BuiltinTerm::Power: return "power";
    case BuiltinTerm::Sinr: return "sinr";
    case BuiltinTerm::EnergyEfficiency: return "energy_efficiency";
    case BuiltinTerm::Scheduled: return "scheduled";
  }
  return "?";
}

SymbolId SymbolTable::add(SymbolMeta meta) {
  if (by_name_.count(meta.name)) throw MalformedExpr("duplicate symbol " + meta.name);
  meta.id = static_cast<SymbolId>(symbols_.size());
  if (meta.family.empty()) meta.family = meta.name;
  by_name_.emplace(meta.name, meta.id);
  symbols_.push_back(std::move(meta));
  return symbols_.back().id;
}

const SymbolMeta& SymbolTable::at(SymbolId id) const {
  if (id >= symbols_.size()) throw MalformedExpr("undeclared symbol id " + std::to_string(id));
  return symbols_[id];
}

std::optional<SymbolId> SymbolTable::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

SymbolId SymbolTable::require(std::string_view name) const {
  auto id = find(name);
  if (!id) throw UnboundSymbol(std::string(name));
  return *id;
}

namespace {

std::shared_ptr<Node> make(Op op) {
  auto n = std::make_shared<Node>();
  n->op = op;
  return n;
}

const Expr& zero_expr() {
  static const Expr z(std::make_shared<const Node>());
  return z;
}

}  // namespace

Expr::Expr() : node_(zero_expr().node_) {}

Op Expr::op() const { return node_->op; }
bool Expr::is_constant(double v) const { return op() == Op::Constant && node_->value == v; }
double Expr::constant_value() const { return node_->value; }

namespace ex {

Expr constant(double v) {
  auto n = make(Op::Constant);
  n->value = v;
  return Expr(n);
}

Expr symbol(SymbolId id) {
  auto n = make(Op::Symbol);
  n->symbol = id;
  return Expr(n);
}

Expr indexed(SymbolId family, std::vector<IndexArg> args) {
  auto n = make(Op::Indexed);
  n->symbol = family;
  n->args = std::move(args);
  return Expr(n);
}

Expr index_sum(std::string var, IndexDomain domain, Expr body) {
  auto n = make(Op::IndexSum);
  n->index_var = std::move(var);
  n->domain = std::move(domain);
  n->children = {std::move(body)};
  return Expr(n);
}

Expr builtin(BuiltinTerm term, std::vector<IndexArg> scope) {
  auto n = make(Op::Builtin);
  n->builtin = term;
  n->args = std::move(scope);
  return Expr(n);
}

namespace raw {

Expr add(std::vector<double> coeffs, std::vector<Expr> children) {
  if (coeffs.size() != children.size()) throw MalformedExpr("coefficient count mismatch");
  auto n = make(Op::Add);
  n->coeffs = std::move(coeffs);
  n->children = std::move(children);
  return Expr(n);
}

Expr mul(std::vector<Expr> children) {
  auto n = make(Op::Mul);
  n->children = std::move(children);
  return Expr(n);
}

Expr div(Expr num, Expr den) {
  if (den.is_constant(0.0)) throw MalformedExpr("quotient with constant zero denominator");
  auto n = make(Op::Div);
  n->children = {std::move(num), std::move(den)};
  return Expr(n);
}

namespace {
Expr unary(Op op, Expr arg, double value = 0.0) {
  auto n = make(op);
  n->value = value;
  n->children = {std::move(arg)};
  return Expr(n);
}
}  // namespace

Expr log2(Expr arg) { return unary(Op::Log2, std::move(arg)); }
Expr ln(Expr arg) { return unary(Op::Ln, std::move(arg)); }
Expr pow(Expr base, double exponent) { return unary(Op::Pow, std::move(base), exponent); }
Expr neg(Expr arg) { return unary(Op::Neg, std::move(arg)); }

}  // namespace raw

Expr add(std::vector<double> coeffs, std::vector<Expr> children) {
  if (coeffs.size() != children.size()) throw MalformedExpr("coefficient count mismatch");
  std::vector<double> out_c;
  std::vector<Expr> out_e;
  double folded = 0.0;
  std::function<void(double, const Expr&)> push = [&](double c, const Expr& e) {
    if (c == 0.0) return;
    if (e.is_constant()) {
      folded += c * e.constant_value();
    } else if (e.op() == Op::Add) {
      for (std::size_t i = 0; i < e->children.size(); ++i) push(c * e->coeffs[i], e->children[i]);
    } else if (e.op() == Op::Neg) {
      push(-c, e->children[0]);
    } else {
      out_c.push_back(c);
      out_e.push_back(e);
    }
  };
  for (std::size_t i = 0; i < children.size(); ++i) push(coeffs[i], children[i]);
  if (folded != 0.0) {
    out_c.push_back(1.0);
    out_e.push_back(constant(folded));
  }
  if (out_e.empty()) return constant(0.0);
  if (out_e.size() == 1 && out_c[0] == 1.0) return out_e[0];
  return raw::add(std::move(out_c), std::move(out_e));
}

Expr sum(std::vector<Expr> children) {
  std::vector<double> ones(children.size(), 1.0);
  return add(std::move(ones), std::move(children));
}

Expr mul(std::vector<Expr> children) {
  double folded = 1.0;
  std::vector<Expr> out;
  std::function<void(const Expr&)> push = [&](const Expr& e) {
    if (e.is_constant()) {
      folded *= e.constant_value();
    } else if (e.op() == Op::Mul) {
      for (const auto& c : e->children) push(c);
    } else {
      out.push_back(e);
    }
  };
  for (const auto& c : children) push(c);
  if (folded == 0.0 || out.empty()) return constant(folded);
  if (folded != 1.0) {
    if (out.size() == 1) return add({folded}, {out[0]});
    out.insert(out.begin(), constant(folded));
  }
  if (out.size() == 1) return out[0];
  return raw::mul(std::move(out));
}

Expr div(Expr num, Expr den) {
  if (den.is_constant(0.0)) throw MalformedExpr("quotient with constant zero denominator");
  if (num.is_constant(0.0)) return constant(0.0);
  if (den.is_constant(1.0)) return num;
  if (num.is_constant() && den.is_constant()) return constant(num.constant_value() / den.constant_value());
  if (den.is_constant()) return add({1.0 / den.constant_value()}, {num});
  return raw::div(std::move(num), std::move(den));
}

Expr log2(Expr arg) {
  if (arg.is_constant() && arg.constant_value() > 0.0) return constant(std::log2(arg.constant_value()));
  return raw::log2(std::move(arg));
}

Expr ln(Expr arg) {
  if (arg.is_constant() && arg.constant_value() > 0.0) return constant(std::log(arg.constant_value()));
  return raw::ln(std::move(arg));
}

Expr pow(Expr base, double exponent) {
  if (exponent == 0.0) return constant(1.0);
  if (exponent == 1.0) return base;
  if (base.is_constant()) {
    double v = std::pow(base.constant_value(), exponent);
    if (std::isfinite(v)) return constant(v);
  }
  return raw::pow(std::move(base), exponent);
}

Expr neg(Expr arg) {
  if (arg.is_constant()) return constant(-arg.constant_value());
  if (arg.op() == Op::Neg) return arg->children[0];
  return add({-1.0}, {std::move(arg)});
}

}  // namespace ex

Expr operator+(const Expr& a, const Expr& b) { return ex::add({1.0, 1.0}, {a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return ex::add({1.0, -1.0}, {a, b}); }
Expr operator*(const Expr& a, const Expr& b) { return ex::mul({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return ex::div(a, b); }
Expr operator*(double c, const Expr& a) { return ex::add({c}, {a}); }

namespace {

void collect(const Expr& e, std::set<SymbolId>& out) {
  if (e.op() == Op::Symbol || e.op() == Op::Indexed) out.insert(e->symbol);
  for (const auto& c : e->children) collect(c, out);
}

}  // namespace

std::vector<SymbolId> free_symbols(const Expr& e) {
  std::set<SymbolId> out;
  collect(e, out);
  return {out.begin(), out.end()};
}

bool contains_symbol(const Expr& e, SymbolId s) {
  if ((e.op() == Op::Symbol || e.op() == Op::Indexed) && e->symbol == s) return true;
  return std::any_of(e->children.begin(), e->children.end(),
                     [s](const Expr& c) { return contains_symbol(c, s); });
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (&a.node() == &b.node()) return true;
  const Node& x = a.node();
  const Node& y = b.node();
  if (x.op != y.op || x.symbol != y.symbol || x.args != y.args || x.index_var != y.index_var ||
      !(x.domain == y.domain) || x.builtin != y.builtin || x.coeffs != y.coeffs ||
      x.children.size() != y.children.size()) {
    return false;
  }
  if (std::bit_cast<std::uint64_t>(x.value) != std::bit_cast<std::uint64_t>(y.value)) return false;
  for (std::size_t i = 0; i < x.children.size(); ++i) {
    if (!structurally_equal(x.children[i], y.children[i])) return false;
  }
  return true;
}

std::size_t node_count(const Expr& e) {
  std::size_t n = 1;
  for (const auto& c : e->children) n += node_count(c);
  return n;
}

namespace {

double checked_log_arg(double v, const char* fn) {
  if (!(v > 0.0)) {
    std::ostringstream os;
    os << fn << " of non-positive value " << v;
    throw DomainError(os.str());
  }
  return v;
}

double apply_pow(double base, double k) {
  if (base < 0.0 && k != std::floor(k)) throw DomainError("fractional power of negative value");
  if (base == 0.0 && k < 0.0) throw DomainError("negative power of zero");
  return std::pow(base, k);
}

double apply_div(double num, double den) {
  if (den == 0.0) throw DomainError("division by zero");
  return num / den;
}

template <class Lookup>
double eval_tree(const Expr& e, const Lookup& lookup) {
  const Node& n = e.node();
  switch (n.op) {
    case Op::Constant: return n.value;
    case Op::Symbol: return lookup(n.symbol);
    case Op::Add: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n.children.size(); ++i) acc += n.coeffs[i] * eval_tree(n.children[i], lookup);
      return acc;
    }
    case Op::Mul: {
      double acc = 1.0;
      for (const auto& c : n.children) acc *= eval_tree(c, lookup);
      return acc;
    }
    case Op::Div: return apply_div(eval_tree(n.children[0], lookup), eval_tree(n.children[1], lookup));
    case Op::Log2: return std::log2(checked_log_arg(eval_tree(n.children[0], lookup), "log2"));
    case Op::Ln: return std::log(checked_log_arg(eval_tree(n.children[0], lookup), "log"));
    case Op::Pow: return apply_pow(eval_tree(n.children[0], lookup), n.value);
    case Op::Neg: return -eval_tree(n.children[0], lookup);
    case Op::Indexed:
    case Op::IndexSum:
    case Op::Builtin: throw MalformedExpr("cannot evaluate a template expression");
  }
  return 0.0;
}

}  // namespace

double eval(const Expr& e, const std::map<SymbolId, double>& binding) {
  return eval_tree(e, [&](SymbolId s) {
    auto it = binding.find(s);
    if (it == binding.end()) throw UnboundSymbol("symbol id " + std::to_string(s));
    return it->second;
  });
}

double eval_dense(const Expr& e, std::span<const double> dense) {
  return eval_tree(e, [&](SymbolId s) {
    if (s >= dense.size()) throw UnboundSymbol("symbol id " + std::to_string(s));
    return dense[s];
  });
}

Expr differentiate(const Expr& e, SymbolId s, const SymbolTable* table) {
  if (table && table->at(s).domain == VarDomain::Binary) {
    throw NonDifferentiable("binary variable " + table->at(s).name);
  }
  if (!contains_symbol(e, s)) return ex::constant(0.0);
  const Node& n = e.node();
  auto d = [&](const Expr& c) { return differentiate(c, s, nullptr); };
  switch (n.op) {
    case Op::Constant: return ex::constant(0.0);
    case Op::Symbol: return ex::constant(n.symbol == s ? 1.0 : 0.0);
    case Op::Add: {
      std::vector<double> cs;
      std::vector<Expr> ds;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (!contains_symbol(n.children[i], s)) continue;
        cs.push_back(n.coeffs[i]);
        ds.push_back(d(n.children[i]));
      }
      return ex::add(std::move(cs), std::move(ds));
    }
    case Op::Mul: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (!contains_symbol(n.children[i], s)) continue;
        std::vector<Expr> factors;
        for (std::size_t j = 0; j < n.children.size(); ++j) factors.push_back(j == i ? d(n.children[j]) : n.children[j]);
        terms.push_back(ex::mul(std::move(factors)));
      }
      return ex::sum(std::move(terms));
    }
    case Op::Div: {
      const Expr& u = n.children[0];
      const Expr& v = n.children[1];
      if (!contains_symbol(v, s)) return ex::div(d(u), v);
      Expr top = ex::add({1.0, -1.0}, {ex::mul({d(u), v}), ex::mul({u, d(v)})});
      return ex::div(top, ex::pow(v, 2.0));
    }
    case Op::Log2:
      return ex::div(d(n.children[0]), ex::mul({n.children[0], ex::constant(std::numbers::ln2)}));
    case Op::Ln: return ex::div(d(n.children[0]), n.children[0]);
    case Op::Pow:
      return ex::mul({ex::constant(n.value), ex::pow(n.children[0], n.value - 1.0), d(n.children[0])});
    case Op::Neg: return ex::neg(d(n.children[0]));
    case Op::Indexed:
    case Op::IndexSum:
    case Op::Builtin: throw NonDifferentiable("template expression must be grounded first");
  }
  return ex::constant(0.0);
}

Expr rewrite(const Expr& e, const std::function<std::optional<Expr>(const Expr&)>& fn) {
  if (auto r = fn(e)) return *r;
  if (e->children.empty()) return e;
  auto n = std::make_shared<Node>(e.node());
  bool changed = false;
  for (auto& c : n->children) {
    Expr r = rewrite(c, fn);
    if (&r.node() != &c.node()) changed = true;
    c = std::move(r);
  }
  return changed ? Expr(n) : e;
}

namespace {

void rebind_arg(IndexArg& a, const std::string& var, const IndexArg& arg) {
  if (a.is_var() && a.var == var) a = arg;
}

Expr bind_index_impl(const Expr& e, const std::string& var, const IndexArg& arg) {
  const Node& n = e.node();
  if (n.op == Op::Constant || n.op == Op::Symbol) return e;
  auto out = std::make_shared<Node>(n);
  for (auto& a : out->args) rebind_arg(a, var, arg);
  if (n.op == Op::IndexSum) {
    rebind_arg(out->domain.ref, var, arg);
    if (n.index_var == var) return Expr(out);  // shadowed inside the body
  }
  for (auto& c : out->children) c = bind_index_impl(c, var, arg);
  return Expr(out);
}

void collect_index_vars(const Expr& e, std::vector<std::string>& bound, std::vector<std::string>& out) {
  auto use = [&](const IndexArg& a) {
    if (!a.is_var()) return;
    if (std::find(bound.begin(), bound.end(), a.var) != bound.end()) return;
    if (std::find(out.begin(), out.end(), a.var) == out.end()) out.push_back(a.var);
  };
  const Node& n = e.node();
  for (const auto& a : n.args) use(a);
  if (n.op == Op::IndexSum) {
    use(n.domain.ref);
    bound.push_back(n.index_var);
    collect_index_vars(n.children[0], bound, out);
    bound.pop_back();
    return;
  }
  for (const auto& c : n.children) collect_index_vars(c, bound, out);
}

std::string fmt_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string domain_str(const IndexDomain& d) {
  switch (d.kind) {
    case IndexDomain::Kind::BaseStations: return "B";
    case IndexDomain::Kind::OtherBaseStations: return "B\\{" + d.ref.str() + "}";
    case IndexDomain::Kind::ServedUsers: return "U_" + d.ref.str();
    case IndexDomain::Kind::ScopedUsers: {
      std::string s = "U_" + d.ref.str() + "&{";
      for (std::size_t i = 0; i < d.subset.size(); ++i) s += (i ? "," : "") + std::to_string(d.subset[i]);
      return s + "}";
    }
    case IndexDomain::Kind::AllUsers: return "U";
    case IndexDomain::Kind::Channels: return "N";
  }
  return "?";
}

std::string args_str(const std::vector<IndexArg>& args) {
  std::string s = "[";
  for (std::size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + args[i].str();
  return s + "]";
}

void print(const Expr& e, const SymbolTable* t, std::string& out) {
  const Node& n = e.node();
  auto name = [&](SymbolId id) { return t && id < t->size() ? t->at(id).name : "s" + std::to_string(id); };
  auto wrapped = [&](const Expr& c) {
    bool paren = c.op() == Op::Add || c.op() == Op::Div || c.op() == Op::Neg;
    if (paren) out += '(';
    print(c, t, out);
    if (paren) out += ')';
  };
  switch (n.op) {
    case Op::Constant: out += fmt_number(n.value); break;
    case Op::Symbol: out += name(n.symbol); break;
    case Op::Indexed: out += name(n.symbol) + args_str(n.args); break;
    case Op::IndexSum:
      out += "sum_{" + n.index_var + " in " + domain_str(n.domain) + "}(";
      print(n.children[0], t, out);
      out += ')';
      break;
    case Op::Add:
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        double c = n.coeffs[i];
        if (i) out += c < 0 ? " - " : " + ";
        else if (c < 0) out += '-';
        if (std::fabs(c) != 1.0) out += fmt_number(std::fabs(c)) + '*';
        if (std::fabs(c) != 1.0) wrapped(n.children[i]);
        else if (n.children[i].op() == Op::Add) wrapped(n.children[i]);
        else print(n.children[i], t, out);
      }
      break;
    case Op::Mul:
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        if (i) out += '*';
        wrapped(n.children[i]);
      }
      break;
    case Op::Div:
      wrapped(n.children[0]);
      out += '/';
      out += '(';
      print(n.children[1], t, out);
      out += ')';
      break;
    case Op::Log2: out += "log2("; print(n.children[0], t, out); out += ')'; break;
    case Op::Ln: out += "ln("; print(n.children[0], t, out); out += ')'; break;
    case Op::Pow:
      out += '(';
      print(n.children[0], t, out);
      out += ")^" + fmt_number(n.value);
      break;
    case Op::Neg: out += "-("; print(n.children[0], t, out); out += ')'; break;
    case Op::Builtin:
      out += to_string(n.builtin);
      if (!n.args.empty()) out += args_str(n.args);
      break;
  }
}

}  // namespace

Expr bind_index(const Expr& e, const std::string& var, const IndexArg& arg) {
  return bind_index_impl(e, var, arg);
}

std::vector<std::string> free_index_vars(const Expr& e) {
  std::vector<std::string> bound, out;
  collect_index_vars(e, bound, out);
  return out;
}

std::vector<double> declared_values(const SymbolTable& table) {
  std::vector<double> v(table.size(), 0.0);
  for (const auto& m : table.all()) v[m.id] = m.value.value_or(0.0);
  return v;
}

std::string to_string(const Expr& e, const SymbolTable* table) {
  std::string out;
  print(e, table, out);
  return out;
}

int Shape::user_count() const {
  int n = 0;
  for (const auto& u : users_by_bs) n += static_cast<int>(u.size());
  return n;
}

int Shape::serving_bs(int ue) const {
  for (std::size_t b = 0; b < users_by_bs.size(); ++b) {
    if (std::find(users_by_bs[b].begin(), users_by_bs[b].end(), ue) != users_by_bs[b].end()) {
      return static_cast<int>(b);
    }
  }
  return -1;
}

std::string scalar_name(const std::string& family, const std::vector<int>& idx) {
  if (idx.empty()) return family;
  std::string s = family + "[";
  for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? "," : "") + std::to_string(idx[i]);
  return s + "]";
}

Grounder::Grounder(const SymbolTable& templates, const Shape& shape, SymbolTable& out)
    : templates_(templates), shape_(shape), out_(out) {}

int Grounder::resolve(const IndexArg& arg, const Env& env) const {
  if (!arg.is_var()) return arg.value;
  for (auto it = env.rbegin(); it != env.rend(); ++it) {
    if (it->first == arg.var) return it->second;
  }
  throw MalformedExpr("unbound index variable " + arg.var);
}

std::vector<int> Grounder::enumerate(const IndexDomain& d, const Env& env) const {
  std::vector<int> out;
  auto served = [&](int b) -> const std::vector<int>& {
    if (b < 0 || b >= shape_.bs_count()) throw MalformedExpr("base station index out of range");
    return shape_.users_by_bs[b];
  };
  switch (d.kind) {
    case IndexDomain::Kind::BaseStations:
      for (int b = 0; b < shape_.bs_count(); ++b) out.push_back(b);
      break;
    case IndexDomain::Kind::OtherBaseStations: {
      int self = resolve(d.ref, env);
      for (int b = 0; b < shape_.bs_count(); ++b) if (b != self) out.push_back(b);
      break;
    }
    case IndexDomain::Kind::ServedUsers: out = served(resolve(d.ref, env)); break;
    case IndexDomain::Kind::ScopedUsers:
      for (int u : served(resolve(d.ref, env))) {
        if (std::find(d.subset.begin(), d.subset.end(), u) != d.subset.end()) out.push_back(u);
      }
      break;
    case IndexDomain::Kind::AllUsers:
      for (const auto& us : shape_.users_by_bs) out.insert(out.end(), us.begin(), us.end());
      break;
    case IndexDomain::Kind::Channels:
      for (int n = 0; n < shape_.channels; ++n) out.push_back(n);
      break;
  }
  return out;
}

SymbolId Grounder::scalar(SymbolId family, const std::vector<int>& idx) {
  const SymbolMeta& fam = templates_.at(family);
  if (idx.size() != fam.indices.size()) throw MalformedExpr("wrong index count for " + fam.name);
  std::string name = scalar_name(fam.name, idx);
  if (auto id = out_.find(name)) return *id;
  SymbolMeta m = fam;
  m.name = name;
  m.family = fam.name;
  m.owner.reset();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    m.indices[i].arg = IndexArg::fixed(idx[i]);
    if (fam.indices[i].set == IndexSet::BaseStations && !m.owner) m.owner = idx[i];
  }
  if (idx.empty()) m.owner = fam.owner;
  return out_.add(std::move(m));
}

Expr Grounder::ground(const Expr& e, const Env& env) {
  const Node& n = e.node();
  switch (n.op) {
    case Op::Constant: return e;
    case Op::Symbol: return ex::symbol(scalar(n.symbol, {}));
    case Op::Indexed: {
      std::vector<int> idx;
      for (const auto& a : n.args) idx.push_back(resolve(a, env));
      return ex::symbol(scalar(n.symbol, idx));
    }
    case Op::IndexSum: {
      std::vector<Expr> terms;
      Env inner = env;
      inner.emplace_back(n.index_var, 0);
      for (int v : enumerate(n.domain, env)) {
        inner.back().second = v;
        terms.push_back(ground(n.children[0], inner));
      }
      return ex::sum(std::move(terms));
    }
    case Op::Builtin: throw MalformedExpr(std::string("unexpanded builtin ") + to_string(n.builtin));
    case Op::Add: {
      std::vector<Expr> cs;
      for (const auto& c : n.children) cs.push_back(ground(c, env));
      return ex::add(n.coeffs, std::move(cs));
    }
    case Op::Mul: {
      std::vector<Expr> cs;
      for (const auto& c : n.children) cs.push_back(ground(c, env));
      return ex::mul(std::move(cs));
    }
    case Op::Div: return ex::div(ground(n.children[0], env), ground(n.children[1], env));
    case Op::Log2: return ex::log2(ground(n.children[0], env));
    case Op::Ln: return ex::ln(ground(n.children[0], env));
    case Op::Pow: return ex::pow(ground(n.children[0], env), n.value);
    case Op::Neg: return ex::neg(ground(n.children[0], env));
  }
  return e;
}

CompiledExpr::CompiledExpr(const Expr& e) { emit(e, 1); }

void CompiledExpr::emit(const Expr& e, std::size_t depth) {
  const Node& n = e.node();
  max_stack_ = std::max(max_stack_, depth);
  auto children = [&]() {
    for (std::size_t i = 0; i < n.children.size(); ++i) emit(n.children[i], depth + i);
  };
  switch (n.op) {
    case Op::Constant: code_.push_back({Code::Const, 0, 0, n.value}); return;
    case Op::Symbol: code_.push_back({Code::Var, n.symbol, 0, 0.0}); return;
    case Op::Add: {
      children();
      auto off = static_cast<std::uint32_t>(coeffs_.size());
      coeffs_.insert(coeffs_.end(), n.coeffs.begin(), n.coeffs.end());
      code_.push_back({Code::Add, static_cast<std::uint32_t>(n.children.size()), off, 0.0});
      return;
    }
    case Op::Mul:
      children();
      code_.push_back({Code::Mul, static_cast<std::uint32_t>(n.children.size()), 0, 0.0});
      return;
    case Op::Div: children(); code_.push_back({Code::Div, 2, 0, 0.0}); return;
    case Op::Log2: children(); code_.push_back({Code::Log2, 1, 0, 0.0}); return;
    case Op::Ln: children(); code_.push_back({Code::Ln, 1, 0, 0.0}); return;
    case Op::Pow: children(); code_.push_back({Code::Pow, 1, 0, n.value}); return;
    case Op::Neg: children(); code_.push_back({Code::Neg, 1, 0, 0.0}); return;
    case Op::Indexed:
    case Op::IndexSum:
    case Op::Builtin: throw MalformedExpr("cannot compile a template expression");
  }
}

template <bool Strict>
double CompiledExpr::run(std::span<const double> values) const {
  thread_local std::vector<double> stack;
  if (stack.size() < max_stack_ + 1) stack.resize(max_stack_ + 1);
  double* sp = stack.data();  // next free slot
  for (const Instr& in : code_) {
    switch (in.code) {
      case Code::Const: *sp++ = in.value; break;
      case Code::Var:
        if (in.a >= values.size()) throw UnboundSymbol("symbol id " + std::to_string(in.a));
        *sp++ = values[in.a];
        break;
      case Code::Add: {
        sp -= in.a;
        double acc = 0.0;
        const double* c = coeffs_.data() + in.b;
        for (std::uint32_t i = 0; i < in.a; ++i) acc += c[i] * sp[i];
        *sp++ = acc;
        break;
      }
      case Code::Mul: {
        sp -= in.a;
        double acc = 1.0;
        for (std::uint32_t i = 0; i < in.a; ++i) acc *= sp[i];
        *sp++ = acc;
        break;
      }
      case Code::Div:
        sp -= 2;
        *sp = Strict ? apply_div(sp[0], sp[1]) : sp[0] / sp[1];
        ++sp;
        break;
      case Code::Log2: sp[-1] = std::log2(Strict ? checked_log_arg(sp[-1], "log2") : sp[-1]); break;
      case Code::Ln: sp[-1] = std::log(Strict ? checked_log_arg(sp[-1], "log") : sp[-1]); break;
      case Code::Pow: sp[-1] = Strict ? apply_pow(sp[-1], in.value) : std::pow(sp[-1], in.value); break;
      case Code::Neg: sp[-1] = -sp[-1]; break;
    }
  }
  return code_.empty() ? 0.0 : stack[0];
}

double CompiledExpr::eval(std::span<const double> values) const { return run<true>(values); }

double CompiledExpr::eval_extended(std::span<const double> values) const { return run<false>(values); }

}  // namespace cellos
