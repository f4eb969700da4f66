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

#include "cellos/dsl.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include "cellos/error.hpp"

namespace cellos {

const char* to_string(Direction d) { return d == Direction::Maximize ? "max" : "min"; }

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Le: return "<=";
    case Relation::Ge: return ">=";
    case Relation::Eq: return "==";
  }
  return "?";
}

const char* to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::MinRate: return "min_rate";
    case ConstraintKind::PowerBudget: return "power_budget";
    case ConstraintKind::OneChannelPerUser: return "one_channel_per_user";
    case ConstraintKind::OneUserPerChannel: return "one_user_per_channel";
    case ConstraintKind::AuxiliaryCoupling: return "auxiliary_coupling";
    case ConstraintKind::AuxiliaryBound: return "auxiliary_bound";
  }
  return "?";
}

namespace {

// Recognized names outside the supported term set.
constexpr std::array<std::string_view, 7> kUnsupported = {
    "latency", "delay", "throughput", "fairness", "jain", "spectral_efficiency", "exp"};

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Objective objective() {
    skip();
    std::size_t start = pos_;
    std::string id = ident();
    Objective obj;
    if (id == "max") {
      obj.direction = Direction::Maximize;
    } else if (id == "min") {
      obj.direction = Direction::Minimize;
    } else {
      throw SyntaxError("objective must start with max( or min(", start);
    }
    expect('(');
    obj.body = body(false);
    expect(')');
    skip();
    if (pos_ != s_.size()) throw SyntaxError("unexpected trailing input", pos_);
    return obj;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  void expect(char c) {
    skip();
    if (pos_ >= s_.size() || s_[pos_] != c) {
      throw SyntaxError(std::string("expected '") + c + "'", pos_);
    }
    ++pos_;
  }

  std::string ident() {
    skip();
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  bool at_number() {
    skip();
    return pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.');
  }

  double number() {
    std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      std::size_t exp_start = pos_;
      digits();
      if (pos_ == exp_start) throw SyntaxError("malformed exponent", exp_start);
    }
    std::string lexeme(s_.substr(start, pos_ - start));
    char* end = nullptr;
    double v = std::strtod(lexeme.c_str(), &end);
    if (lexeme == "." || end != lexeme.c_str() + lexeme.size() || !std::isfinite(v)) {
      throw SyntaxError("malformed number", start);
    }
    return v;
  }

  Expr body(bool scoped) {
    skip();
    if (pos_ >= s_.size()) throw SyntaxError("unexpected end of input", pos_);
    if (s_[pos_] == ')') throw SyntaxError("empty body", pos_);
    return combination(scoped);
  }

  Expr combination(bool scoped) {
    std::vector<double> coeffs;
    std::vector<Expr> terms;
    for (bool first = true;; first = false) {
      double sign = 1.0;
      skip();
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) {
        sign = s_[pos_] == '-' ? -1.0 : 1.0;
        ++pos_;
      } else if (!first) {
        break;
      }
      if (at_number()) {
        double v = number();
        if (peek('*')) {
          ++pos_;
          coeffs.push_back(sign * v);
          terms.push_back(call(scoped));
        } else {
          coeffs.push_back(sign);
          terms.push_back(ex::constant(v));
        }
      } else {
        coeffs.push_back(sign);
        terms.push_back(call(scoped));
      }
    }
    if (terms.size() == 1 && coeffs[0] == 1.0) return terms[0];
    return ex::raw::add(std::move(coeffs), std::move(terms));
  }

  Expr call(bool scoped) {
    skip();
    std::size_t start = pos_;
    std::string id = ident();
    if (id.empty()) {
      if (pos_ >= s_.size()) throw SyntaxError("unexpected end of input", pos_);
      throw SyntaxError(std::string("unexpected character '") + s_[pos_] + "'", pos_);
    }
    auto scope = [&]() -> std::vector<IndexArg> {
      if (!scoped) return {};
      return {IndexArg::named("b"), IndexArg::named("u")};
    };
    if (id == "rate" || id == "capacity") return ex::builtin(BuiltinTerm::Rate, scope());
    if (id == "power") return ex::builtin(BuiltinTerm::Power, scope());
    if (id == "sinr") return ex::builtin(BuiltinTerm::Sinr, scope());
    if (id == "energy_efficiency") return ex::builtin(BuiltinTerm::EnergyEfficiency, scope());
    if (id == "sum") {
      if (scoped) throw UnsupportedTerm("nested sum at offset " + std::to_string(start));
      expect('(');
      Expr inner = body(true);
      expect(')');
      return ex::index_sum("u", IndexDomain{IndexDomain::Kind::AllUsers, {}, {}}, inner);
    }
    if (id == "log" || id == "log2") {
      expect('(');
      Expr inner = body(scoped);
      expect(')');
      return id == "log" ? ex::raw::ln(inner) : ex::raw::log2(inner);
    }
    for (auto name : kUnsupported) {
      if (id == name) throw UnsupportedTerm("'" + id + "' at offset " + std::to_string(start));
    }
    throw SyntaxError("unknown keyword '" + id + "'", start);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

std::string number_text(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  // Guard against forms the lexer does not accept ("inf", "nan").
  if (!std::isfinite(v)) throw MalformedExpr("non-finite constant in objective");
  return s;
}

void print_term(const Expr& e, std::string& out);

void print_combination(const Expr& e, std::string& out) {
  if (e.op() != Op::Add) {
    print_term(e, out);
    return;
  }
  for (std::size_t i = 0; i < e->children.size(); ++i) {
    double c = e->coeffs[i];
    if (i) out += c < 0 ? " - " : " + ";
    else if (c < 0) out += "-";
    double mag = std::fabs(c);
    if (mag != 1.0) out += number_text(mag) + "*";
    print_term(e->children[i], out);
  }
}

void print_term(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Constant: out += number_text(e.constant_value()); return;
    case Op::Builtin: out += to_string(e->builtin); return;
    case Op::IndexSum:
      out += "sum(";
      print_combination(e->children[0], out);
      out += ")";
      return;
    case Op::Ln:
    case Op::Log2:
      out += e.op() == Op::Ln ? "log(" : "log2(";
      print_combination(e->children[0], out);
      out += ")";
      return;
    case Op::Add:
      print_combination(e, out);
      return;
    default:
      throw MalformedExpr("expression has no objective-language form");
  }
}

}  // namespace

Objective parse_objective(std::string_view text) { return Parser(text).objective(); }

std::string print_objective(const Objective& obj) {
  std::string out = to_string(obj.direction);
  out += "(";
  print_combination(obj.body, out);
  out += ")";
  return out;
}

ConstraintTemplate parse_constraint(std::string_view key, const ConstraintArgs& args) {
  auto b = IndexArg::named("b");
  auto u = IndexArg::named("u");
  Quantifier over_b{"b", IndexDomain{IndexDomain::Kind::BaseStations, {}, {}}};
  Quantifier over_u{"u", args.users.all ? IndexDomain{IndexDomain::Kind::ServedUsers, b, {}}
                                        : IndexDomain{IndexDomain::Kind::ScopedUsers, b, args.users.ids}};
  ConstraintTemplate t;
  if (key == "user_min_rate") {
    if (!args.rate) throw NonPositiveBound("user_min_rate requires a rate");
    if (!(*args.rate > 0.0)) throw NonPositiveBound("user_min_rate rate must be positive");
    t.kind = ConstraintKind::MinRate;
    t.lhs = ex::builtin(BuiltinTerm::Rate, {b, u});
    t.relation = Relation::Ge;
    t.rhs = ex::constant(*args.rate);
    t.quantifiers = {over_b, over_u};
  } else if (key == "bs_power_budget") {
    if (!args.pmax) throw NonPositiveBound("bs_power_budget requires pmax");
    if (!(*args.pmax > 0.0)) throw NonPositiveBound("bs_power_budget pmax must be positive");
    t.kind = ConstraintKind::PowerBudget;
    t.lhs = ex::builtin(BuiltinTerm::Power, {b});
    t.relation = Relation::Le;
    t.rhs = ex::constant(*args.pmax);
    t.quantifiers = {over_b};
  } else if (key == "one_channel_per_user") {
    t.kind = ConstraintKind::OneChannelPerUser;
    t.lhs = ex::builtin(BuiltinTerm::Scheduled, {b, u});
    t.relation = Relation::Le;
    t.rhs = ex::constant(1.0);
    t.quantifiers = {over_b, over_u};
  } else {
    throw UnknownConstraintKey(std::string(key));
  }
  return t;
}

}  // namespace cellos
