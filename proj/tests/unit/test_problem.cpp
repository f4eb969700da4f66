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

#include <cmath>
#include <map>
#include <random>

#include "cellos/error.hpp"
#include "cellos/problem.hpp"
#include "doctest.h"

using namespace cellos;

namespace {

// Dense binding for a ground table, filled by symbol name.
struct Values {
  const SymbolTable& table;
  std::vector<double> v;
  explicit Values(const SymbolTable& t) : table(t), v(declared_values(t)) {}
  void set(const std::string& name, double x) { v[table.require(name)] = x; }
  bool has(const std::string& name) const { return table.find(name).has_value(); }
};

std::string idx(const char* fam, int b, int u, int n) {
  return std::string(fam) + "[" + std::to_string(b) + "," + std::to_string(u) + "," + std::to_string(n) + "]";
}

// Hand-coded capacity used as the reference for generated expressions.
struct Reference {
  Shape shape;
  double B = 1.0, N = 1.0;
  std::map<std::tuple<int, int, int>, double> g, p, y;

  double cap(int b, int u, int n) const {
    double interference = 0.0;
    for (int b2 = 0; b2 < shape.bs_count(); ++b2) {
      if (b2 == b) continue;
      double load = 0.0;
      for (int u2 : shape.users_by_bs[b2]) load += p.at({b2, u2, n}) * y.at({b2, u2, n});
      interference += g.at({b2, u, n}) * load;
    }
    return B * std::log2(1.0 + g.at({b, u, n}) * y.at({b, u, n}) * p.at({b, u, n}) / (N + interference));
  }
};

Reference random_point(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.05, 2.0);
  std::bernoulli_distribution coin(0.7);
  Reference r;
  r.shape = shape;
  r.B = U(rng);
  r.N = U(rng);
  for (int b = 0; b < shape.bs_count(); ++b) {
    for (int u : shape.users_by_bs[b]) {
      for (int n = 0; n < shape.channels; ++n) {
        r.p[{b, u, n}] = U(rng);
        r.y[{b, u, n}] = coin(rng) ? 1.0 : 0.0;
      }
    }
  }
  for (int b = 0; b < shape.bs_count(); ++b) {
    for (int ub = 0; ub < shape.bs_count(); ++ub) {
      for (int u : shape.users_by_bs[ub]) {
        for (int n = 0; n < shape.channels; ++n) r.g[{b, u, n}] = U(rng);
      }
    }
  }
  return r;
}

void bind(Values& vals, const Reference& r) {
  if (vals.has("B")) vals.set("B", r.B);
  if (vals.has("noise_N")) vals.set("noise_N", r.N);
  for (const auto& [k, x] : r.g) {
    auto [b, u, n] = k;
    if (vals.has(idx("g", b, u, n))) vals.set(idx("g", b, u, n), x);
  }
  for (const auto& [k, x] : r.p) {
    auto [b, u, n] = k;
    if (vals.has(idx("p", b, u, n))) vals.set(idx("p", b, u, n), x);
  }
  for (const auto& [k, x] : r.y) {
    auto [b, u, n] = k;
    if (vals.has(idx("y", b, u, n))) vals.set(idx("y", b, u, n), x);
  }
}

VirtualNetwork network(int bs, const std::string& objective, std::optional<double> min_rate = {}) {
  auto nwk = VirtualNetwork::create(bs);
  nwk.assign_users(0, {0, 1, 2, 3});
  nwk.set_utility(objective, 0);
  if (min_rate) {
    ConstraintArgs a;
    a.rate = *min_rate;
    nwk.add_constraints(0, {{"user_min_rate", a}});
  }
  return nwk;
}

const Shape kTwoByTwo{{{0, 1}, {2, 3}}, 2};

}  // namespace

TEST_CASE("capacity term on hand-evaluated points") {
  SymbolTable families;
  FamilyDeclarer f(families);
  Expr cap = capacity_term(f, IndexArg::fixed(0), IndexArg::fixed(0), IndexArg::fixed(0));

  SUBCASE("no interferers") {
    Shape one{{{0}}, 1};
    SymbolTable out;
    Grounder gr(families, one, out);
    Expr e = gr.ground(cap);
    Values v(out);
    v.set("B", 1.0);
    v.set("g[0,0,0]", 1.0);
    v.set("y[0,0,0]", 1.0);
    v.set("p[0,0,0]", 1.0);
    v.set("noise_N", 1.0);
    CHECK(eval_dense(e, v.v) == 1.0);
    v.set("y[0,0,0]", 0.0);
    CHECK(eval_dense(e, v.v) == 0.0);
  }
  SUBCASE("aggregate interference of 2") {
    Shape two{{{0}, {1}}, 1};
    SymbolTable out;
    Grounder gr(families, two, out);
    Expr e = gr.ground(cap);
    Values v(out);
    v.set("B", 1.0);
    v.set("noise_N", 1.0);
    v.set("g[0,0,0]", 1.0);
    v.set("y[0,0,0]", 1.0);
    v.set("p[0,0,0]", 3.0);
    v.set("g[1,0,0]", 1.0);
    v.set("y[1,1,0]", 1.0);
    v.set("p[1,1,0]", 2.0);
    CHECK(eval_dense(e, v.v) == 1.0);
  }
}

TEST_CASE("max(rate) on two base stations") {
  auto prob = generate_problem(network(2, "max(rate)", 1e6), 0);
  CHECK(prob.direction == Direction::Maximize);
  std::vector<ConstraintKind> kinds;
  for (const auto& c : prob.constraints) kinds.push_back(c.kind);
  CHECK(kinds == std::vector<ConstraintKind>{ConstraintKind::MinRate, ConstraintKind::PowerBudget,
                                             ConstraintKind::OneChannelPerUser, ConstraintKind::OneUserPerChannel});
  auto closure = check_symbol_closure(prob);
  CHECK(closure.unused.empty());
  CHECK(closure.undeclared.empty());
  CHECK(prob.symbols.at(prob.symbols.require("P_max")).value == 1.0);
  CHECK(prob.symbols.at(prob.symbols.require("C_min")).value == 1e6);
  CHECK(prob.symbols.at(prob.symbols.require("y")).domain == VarDomain::Binary);
  CHECK(prob.symbols.at(prob.symbols.require("p")).layer == Layer::Phy);
  CHECK(prob.symbols.at(prob.symbols.require("g")).kind == SymbolKind::Placeholder);

  auto ground = instantiate(prob, kTwoByTwo);
  int y = 0, p = 0;
  for (const auto& m : ground.symbols.all()) {
    if (m.kind != SymbolKind::Variable) continue;
    if (m.family == "y") ++y;
    if (m.family == "p") ++p;
  }
  CHECK(y == 8);
  CHECK(p == 8);
  // (3) per user, (4) per BS, (5) per user and per channel.
  CHECK(ground.constraints.size() == 4 + 2 + 4 + 4);
}

TEST_CASE("implicit constraints without operator constraints") {
  auto prob = generate_problem(network(2, "min(power)"), 0);
  CHECK(prob.find(ConstraintKind::MinRate) == nullptr);
  CHECK(prob.find(ConstraintKind::PowerBudget) != nullptr);
  CHECK(prob.find(ConstraintKind::OneChannelPerUser) != nullptr);
  CHECK(prob.find(ConstraintKind::OneUserPerChannel) != nullptr);
  auto closure = check_symbol_closure(prob);
  CHECK(closure.unused.empty());
  CHECK_FALSE(prob.symbols.find("g").has_value());
}

TEST_CASE("generated objectives match the hand-coded capacity") {
  std::mt19937_64 rng(5);
  auto rate = instantiate(generate_problem(network(2, "max(rate)"), 0), kTwoByTwo);
  auto logs = instantiate(generate_problem(network(2, "max(sum(log(rate)))"), 0), kTwoByTwo);
  auto power = instantiate(generate_problem(network(2, "min(power)", 2e5), 0), kTwoByTwo);
  auto mixed = instantiate(generate_problem(network(2, "max(2*rate - 0.5*power)"), 0), kTwoByTwo);
  for (int k = 0; k < 100; ++k) {
    Reference r = random_point(kTwoByTwo, rng);
    for (int b = 0; b < 2; ++b) {
      for (int u : kTwoByTwo.users_by_bs[b]) r.y[{b, u, 0}] = 1.0;  // keep every user's rate positive
    }
    double sum_c = 0.0, sum_log = 0.0, sum_p = 0.0;
    for (int b = 0; b < 2; ++b) {
      for (int u : kTwoByTwo.users_by_bs[b]) {
        double cu = 0.0;
        for (int n = 0; n < 2; ++n) {
          cu += r.cap(b, u, n);
          sum_p += r.p.at({b, u, n});
        }
        sum_c += cu;
        sum_log += std::log(cu);
      }
    }
    Values vr(rate.symbols), vl(logs.symbols), vp(power.symbols), vm(mixed.symbols);
    bind(vr, r);
    bind(vl, r);
    bind(vp, r);
    bind(vm, r);
    CHECK(eval_dense(rate.objective, vr.v) == doctest::Approx(sum_c).epsilon(1e-12));
    CHECK(eval_dense(logs.objective, vl.v) == doctest::Approx(sum_log).epsilon(1e-12));
    CHECK(eval_dense(power.objective, vp.v) == doctest::Approx(sum_p).epsilon(1e-12));
    CHECK(eval_dense(mixed.objective, vm.v) == doctest::Approx(2 * sum_c - 0.5 * sum_p).epsilon(1e-12));
    // The min-rate constraint of user 2 against the reference.
    for (const auto& c : power.constraints) {
      if (c.label != "min_rate[b=1,u=2]") continue;
      CHECK(eval_dense(c.lhs, vp.v) == doctest::Approx(r.cap(1, 2, 0) + r.cap(1, 2, 1)).epsilon(1e-12));
      CHECK(eval_dense(c.rhs, vp.v) == 2e5);
    }
  }
}

TEST_CASE("sum-log objective shape") {
  auto prob = generate_problem(network(2, "max(sum(log(rate)))"), 0);
  const Expr& outer = prob.objective;
  REQUIRE(outer.op() == Op::IndexSum);
  CHECK(outer->domain.kind == IndexDomain::Kind::BaseStations);
  const Expr& users = outer->children[0];
  REQUIRE(users.op() == Op::IndexSum);
  CHECK(users->domain.kind == IndexDomain::Kind::ServedUsers);
  CHECK(users->children[0].op() == Op::Ln);
}

TEST_CASE("per-user capacity is monotone in serving and interfering power") {
  auto ground = instantiate(generate_problem(network(2, "max(rate)", 1.0), 0), kTwoByTwo);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> bump(0.01, 1.0);
  int checks = 0;
  for (const auto& c : ground.constraints) {
    if (c.kind != ConstraintKind::MinRate) continue;
    int b = c.label[std::string("min_rate[b=").size()] - '0';
    for (int k = 0; k < 20; ++k) {
      Reference r = random_point(kTwoByTwo, rng);
      Values v(ground.symbols);
      bind(v, r);
      double base = eval_dense(c.lhs, v.v);
      for (int b2 = 0; b2 < 2; ++b2) {
        for (int u2 : kTwoByTwo.users_by_bs[b2]) {
          for (int n = 0; n < 2; ++n) {
            Values w = v;
            w.set(idx("p", b2, u2, n), r.p.at({b2, u2, n}) + bump(rng));
            double after = eval_dense(c.lhs, w.v);
            if (b2 == b) CHECK(after >= base);
            else CHECK(after <= base);
            ++checks;
          }
        }
      }
    }
  }
  CHECK(checks == 4 * 20 * 8);
}

TEST_CASE("generation is deterministic and rejects missing objectives") {
  auto nwk = network(2, "max(sum(log(rate)))", 1e6);
  auto a = generate_problem(nwk, 0);
  auto b = generate_problem(nwk, 0);
  CHECK(structurally_equal(a.objective, b.objective));
  CHECK(to_string(a.objective, &a.symbols) == to_string(b.objective, &b.symbols));

  auto empty = VirtualNetwork::create(2);
  CHECK_THROWS_AS(generate_problem(empty, 0), NoObjective);
}
