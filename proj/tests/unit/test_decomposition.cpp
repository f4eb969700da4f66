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
#include <set>

#include "cellos/decomposition.hpp"
#include "cellos/error.hpp"
#include "doctest.h"

using namespace cellos;

namespace {

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

std::vector<DistributedProgram> compile(const VirtualNetwork& nwk) {
  auto prob = generate_problem(nwk, 0);
  return decompose(prob, build_coupling_graph(prob), DecompositionMethod::LagrangianDual);
}

const Shape kTwoByTwo{{{0, 1}, {2, 3}}, 2};

std::string idx3(const char* fam, int b, int u, int n) {
  return std::string(fam) + "[" + std::to_string(b) + "," + std::to_string(u) + "," + std::to_string(n) + "]";
}

// Shared name-keyed point so that independently grounded tables can be bound.
struct Point {
  std::map<std::string, double> values;

  void bind(const SymbolTable& t, std::vector<double>& v) const {
    v = declared_values(t);
    for (const auto& m : t.all()) {
      auto it = values.find(m.name);
      if (it != values.end()) v[m.id] = it->second;
    }
  }
};

Point random_point(const Shape& shape, std::mt19937_64& rng, bool feasible_assignment) {
  std::uniform_real_distribution<double> U(0.05, 1.0);
  Point pt;
  pt.values["B"] = U(rng);
  pt.values["noise_N"] = 0.1 * U(rng);
  for (int b = 0; b < shape.bs_count(); ++b) {
    // A random one-to-one user/channel assignment for each base station.
    std::vector<int> perm = shape.users_by_bs[b];
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int n = 0; n < shape.channels; ++n) {
      for (int u : shape.users_by_bs[b]) {
        double y = feasible_assignment ? (n < static_cast<int>(perm.size()) && perm[n] == u) : (U(rng) > 0.5);
        pt.values[idx3("y", b, u, n)] = y;
        pt.values[idx3("p", b, u, n)] = y ? U(rng) / shape.channels : 0.0;
      }
    }
    for (int ub = 0; ub < shape.bs_count(); ++ub) {
      for (int u : shape.users_by_bs[ub]) {
        for (int n = 0; n < shape.channels; ++n) pt.values[idx3("g", b, u, n)] = U(rng);
      }
    }
  }
  return pt;
}

struct GroundProgram {
  SymbolTable table;
  Expr objective;
  std::map<std::string, Expr> h;  // by i-symbol name
};

GroundProgram ground_program(const DistributedProgram& dp, const Shape& shape) {
  GroundProgram g;
  Grounder gr(dp.symbols, shape, g.table);
  g.objective = gr.ground(dp.objective);
  if (dp.auxiliary) {
    for (int u : shape.users_by_bs[dp.owner]) {
      for (int n = 0; n < shape.channels; ++n) {
        g.h[idx3("i", dp.owner, u, n)] = gr.ground(dp.auxiliary->h, {{"u", u}, {"n", n}});
      }
    }
  }
  return g;
}

// Sum of local objectives with zero multipliers, i = h and x = p*y.
double reconstruct(const std::vector<DistributedProgram>& programs, const Shape& shape, const Point& pt) {
  Point full = pt;
  for (int b = 0; b < shape.bs_count(); ++b) {
    for (int u : shape.users_by_bs[b]) {
      for (int n = 0; n < shape.channels; ++n) {
        full.values[idx3("x", b, u, n)] = pt.values.at(idx3("p", b, u, n)) * pt.values.at(idx3("y", b, u, n));
      }
    }
  }
  double total = 0.0;
  for (const auto& dp : programs) {
    GroundProgram g = ground_program(dp, shape);
    std::vector<double> v;
    full.bind(g.table, v);
    for (const auto& [name, h] : g.h) v[g.table.require(name)] = eval_dense(h, v);
    total += eval_dense(g.objective, v);
  }
  return total;
}

}  // namespace

TEST_CASE("variable detection and classification") {
  auto prob = generate_problem(network(2, "max(rate)", 1e6), 0);
  auto ground = instantiate(prob, kTwoByTwo);
  auto classes = detect_and_classify(ground.symbols);
  int mac = 0, phy = 0;
  for (const auto& c : classes) {
    if (c.layer == Layer::Mac) ++mac;
    if (c.layer == Layer::Phy) ++phy;
  }
  CHECK(mac == 8);
  CHECK(phy == 8);
  auto it = std::find_if(classes.begin(), classes.end(), [](const VariableClass& c) { return c.name == "p[1,2,1]"; });
  REQUIRE(it != classes.end());
  CHECK(it->layer == Layer::Phy);
  CHECK(it->owner == 1);

  SymbolTable orphan;
  SymbolMeta m;
  m.name = "z";
  m.kind = SymbolKind::Variable;
  m.layer = Layer::Phy;
  orphan.add(m);
  CHECK_THROWS_AS(detect_and_classify(orphan), UnclassifiedVariable);
}

TEST_CASE("coupling graph of the five-variable fixture") {
  SymbolTable t;
  auto var = [&](const std::string& name, int owner) {
    SymbolMeta m;
    m.name = name;
    m.kind = SymbolKind::Variable;
    m.layer = Layer::Phy;
    m.owner = owner;
    m.indices = {{IndexSet::BaseStations, IndexArg::fixed(owner)}};
    return ex::symbol(t.add(m));
  };
  Expr x1 = var("x1", 0), x2 = var("x2", 1), x3 = var("x3", 0), x4 = var("x4", 1), x5 = var("x5", 1);
  Expr f = x2 * (x4 + x5) + x3 * (x4 + x1 / x2);
  auto g = build_coupling_graph({f}, t);
  auto id = [&](const char* n) { return t.require(n); };
  std::set<std::pair<SymbolId, SymbolId>> expected;
  for (auto [a, b] : {std::pair{"x2", "x4"}, {"x2", "x5"}, {"x3", "x4"}, {"x1", "x3"}, {"x1", "x2"}, {"x2", "x3"}}) {
    expected.insert({std::min(id(a), id(b)), std::max(id(a), id(b))});
  }
  std::set<std::pair<SymbolId, SymbolId>> got;
  for (const auto& e : g.edges) got.insert({e.a, e.b});
  CHECK(got == expected);
  CHECK(g.edges.size() == 6);
  for (const auto& e : g.edges) {
    bool cross = g.attributes.at(e.a).owner != g.attributes.at(e.b).owner;
    CHECK((e.kind == EdgeKind::Horizontal) == cross);
  }
  CHECK(build_coupling_graph({x1 + x2}, t).edges.empty());
}

TEST_CASE("capacity coupling joins every co-channel interferer") {
  auto ground = instantiate(generate_problem(network(2, "max(rate)"), 0), kTwoByTwo);
  auto g = build_coupling_graph(ground);
  auto& T = ground.symbols;
  for (int n = 0; n < 2; ++n) {
    for (int b = 0; b < 2; ++b) {
      for (int u : kTwoByTwo.users_by_bs[b]) {
        for (int u2 : kTwoByTwo.users_by_bs[1 - b]) {
          CHECK(g.has_edge(T.require(idx3("p", b, u, n)), T.require(idx3("y", 1 - b, u2, n))));
          CHECK(g.has_edge(T.require(idx3("p", b, u, n)), T.require(idx3("p", 1 - b, u2, n))));
        }
      }
    }
  }
  // Different channels never interact.
  CHECK_FALSE(g.has_edge(T.require("p[0,0,0]"), T.require("p[1,2,1]")));
  bool vertical = false;
  for (const auto& e : g.edges) {
    CHECK(e.a < e.b);
    const auto& va = g.attributes.at(e.a);
    const auto& vb = g.attributes.at(e.b);
    if (e.kind == EdgeKind::Horizontal) CHECK(va.owner != vb.owner);
    if (e.kind == EdgeKind::Vertical) {
      CHECK(va.owner == vb.owner);
      CHECK(va.layer != vb.layer);
      vertical = true;
    }
  }
  CHECK(vertical);
  CHECK(g.has_horizontal());
}

TEST_CASE("two-BS capacity problem splits into owner-local programs") {
  auto programs = compile(network(2, "max(rate)", 1e6));
  REQUIRE(programs.size() == 2);
  std::set<std::string> union_names;
  for (const auto& dp : programs) {
    CHECK(dp.lagrangian);
    CHECK(dp.neighbors == std::vector<int>{1 - dp.owner});
    REQUIRE(dp.auxiliary.has_value());
    CHECK(dp.update_rules.size() == 2);
    for (const auto& r : dp.update_rules) CHECK(r.project_nonnegative);
    auto g = ground_program(dp, kTwoByTwo);
    for (SymbolId s : free_symbols(g.objective)) {
      const auto& m = g.table.at(s);
      if (m.kind == SymbolKind::Variable || m.kind == SymbolKind::Multiplier) {
        CHECK(m.owner == dp.owner);
        union_names.insert(m.name);
      }
    }
    std::set<std::string> manifest(dp.placeholder_manifest.begin(), dp.placeholder_manifest.end());
    CHECK(manifest == std::set<std::string>{"B", "C_min", "P_max", "g", "noise_N", "x"});
  }
  // Variables, auxiliaries and multipliers of the decomposed problem.
  std::set<std::string> expected;
  for (int b = 0; b < 2; ++b) {
    for (int u : kTwoByTwo.users_by_bs[b]) {
      expected.insert("lambda[" + std::to_string(b) + "," + std::to_string(u) + "]");
      for (int n = 0; n < 2; ++n) {
        for (const char* f : {"y", "p", "i", "mu"}) expected.insert(idx3(f, b, u, n));
      }
    }
  }
  CHECK(union_names == expected);
}

TEST_CASE("single base station returns the original problem") {
  auto nwk = network(1, "max(rate)", 1e6);
  auto prob = generate_problem(nwk, 0);
  auto programs = decompose(prob, build_coupling_graph(prob), DecompositionMethod::LagrangianDual);
  REQUIRE(programs.size() == 1);
  const auto& dp = programs[0];
  CHECK_FALSE(dp.lagrangian);
  CHECK(structurally_equal(dp.objective, prob.objective));
  CHECK(dp.constraints.size() == prob.constraints.size());
  CHECK_FALSE(dp.auxiliary.has_value());
  CHECK(dp.update_rules.empty());
  CHECK(dp.publish.empty());
  CHECK_FALSE(dp.symbols.find("mu").has_value());
  CHECK_FALSE(dp.symbols.find("i").has_value());
}

TEST_CASE("min(power) programs follow the Lagrangian term by term") {
  auto programs = compile(network(2, "min(power)", 0.5));
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 2.0);
  for (const auto& dp : programs) {
    CHECK(dp.direction == Direction::Maximize);
    auto g = ground_program(dp, kTwoByTwo);
    for (int k = 0; k < 50; ++k) {
      Point pt = random_point(kTwoByTwo, rng, false);
      int b = dp.owner;
      int other = 1 - b;
      std::map<std::pair<int, int>, double> ivals;
      for (int u : kTwoByTwo.users_by_bs[b]) {
        pt.values["lambda[" + std::to_string(b) + "," + std::to_string(u) + "]"] = U(rng);
        for (int n = 0; n < 2; ++n) {
          pt.values[idx3("mu", b, u, n)] = U(rng);
          pt.values[idx3("i", b, u, n)] = ivals[{u, n}] = U(rng);
        }
      }
      for (int u2 : kTwoByTwo.users_by_bs[other]) {
        for (int n = 0; n < 2; ++n) pt.values[idx3("x", other, u2, n)] = U(rng);
      }
      std::vector<double> v;
      pt.bind(g.table, v);
      // Reference: -sum p - sum lambda (C_min - sum_n C^) - sum mu (h - i).
      auto P = [&](const std::string& k) { return pt.values.at(k); };
      double expected = 0.0;
      double B = P("B"), N = P("noise_N");
      for (int u : kTwoByTwo.users_by_bs[b]) {
        double rate = 0.0;
        for (int n = 0; n < 2; ++n) {
          expected -= P(idx3("p", b, u, n));
          double sig = P(idx3("g", b, u, n)) * P(idx3("y", b, u, n)) * P(idx3("p", b, u, n));
          rate += B * std::log2(1.0 + sig / (N + ivals[{u, n}]));
          double h = 0.0;
          for (int u2 : kTwoByTwo.users_by_bs[other]) h += P(idx3("g", other, u, n)) * P(idx3("x", other, u2, n));
          expected -= P(idx3("mu", b, u, n)) * (h - ivals[{u, n}]);
        }
        expected -= P("lambda[" + std::to_string(b) + "," + std::to_string(u) + "]") * (0.5 - rate);
      }
      CHECK(eval_dense(g.objective, v) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("sum of local objectives reconstructs the centralized objective") {
  std::mt19937_64 rng(23);
  const std::vector<std::pair<std::string, std::optional<double>>> fixtures = {
      {"max(rate)", 0.2}, {"max(rate)", std::nullopt}, {"min(power)", 0.3},
      {"max(sum(log(rate)))", 0.1}, {"max(rate - 0.5*power)", std::nullopt}, {"max(sinr)", std::nullopt}};
  const std::vector<Shape> shapes = {kTwoByTwo, Shape{{{0, 1, 2}, {3, 4}, {5}}, 3}};
  for (const auto& [text, cmin] : fixtures) {
    for (const auto& shape : shapes) {
      auto nwk = VirtualNetwork::create(shape.bs_count());
      nwk.assign_users(0, {0, 1, 2, 3, 4, 5});
      nwk.set_utility(text, 0);
      if (cmin) {
        ConstraintArgs a;
        a.rate = *cmin;
        nwk.add_constraints(0, {{"user_min_rate", a}});
      }
      auto prob = generate_problem(nwk, 0);
      auto programs = decompose(prob, build_coupling_graph(prob), DecompositionMethod::LagrangianDual);
      auto central = instantiate(prob, shape);
      double sign = prob.direction == Direction::Maximize ? 1.0 : -1.0;
      for (int k = 0; k < 100; ++k) {
        Point pt = random_point(shape, rng, true);
        std::vector<double> v;
        pt.bind(central.symbols, v);
        double want = sign * eval_dense(central.objective, v);
        double got = reconstruct(programs, shape, pt);
        INFO(text);
        CHECK(std::fabs(got - want) <= 1e-9 * std::max(1.0, std::fabs(want)));
      }
    }
  }
}

TEST_CASE("unsupported decompositions") {
  auto ee = generate_problem(network(2, "max(energy_efficiency)"), 0);
  CHECK_THROWS_AS(decompose(ee, build_coupling_graph(ee), DecompositionMethod::LagrangianDual), NotSeparable);
  auto pf = generate_problem(network(2, "max(sum(energy_efficiency))"), 0);
  CHECK_THROWS_AS(decompose(pf, build_coupling_graph(pf), DecompositionMethod::LagrangianDual), NotSeparable);
  auto net_log = generate_problem(network(2, "max(log(rate))"), 0);
  CHECK_THROWS_AS(decompose(net_log, build_coupling_graph(net_log), DecompositionMethod::LagrangianDual),
                  NotSeparable);
  auto rate = generate_problem(network(2, "max(rate)"), 0);
  CHECK_THROWS_AS(decompose(rate, build_coupling_graph(rate), DecompositionMethod::PartialLinearization),
                  NotImplemented);
  CHECK(parse_decomposition_method("lagrangian-dual") == DecompositionMethod::LagrangianDual);
  CHECK_THROWS_AS(parse_decomposition_method("admm"), InvalidEngineConfig);
}

TEST_CASE("uncoupled multi-BS objectives skip the auxiliaries") {
  auto programs = compile(network(3, "min(power)"));
  REQUIRE(programs.size() == 3);
  for (const auto& dp : programs) {
    CHECK_FALSE(dp.lagrangian);
    CHECK(dp.direction == Direction::Minimize);
    CHECK(dp.publish.empty());
    CHECK(dp.neighbors.empty());
  }
}

TEST_CASE("slices compile independently") {
  auto build = [](const std::string& second) {
    auto nwk = VirtualNetwork::create(2, {0.5, 0.5});
    nwk.assign_users(0, {0, 1});
    nwk.assign_users(1, {2, 3});
    nwk.set_utility("max(rate)", 0);
    nwk.set_utility(second, 1);
    auto prob = generate_problem(nwk, 0);
    auto programs = decompose(prob, build_coupling_graph(prob), DecompositionMethod::LagrangianDual);
    return to_string(programs[0].objective, &programs[0].symbols);
  };
  CHECK(build("min(power)") == build("max(sum(log(rate)))"));
}
