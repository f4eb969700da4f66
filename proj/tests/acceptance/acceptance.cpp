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

// Acceptance checks. Each prints one PASS/FAIL line; the exit status is the
// number of failures.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "cellos/decomposition.hpp"
#include "cellos/experiment.hpp"
#include "cellos/oracle.hpp"
#include "cellos/problem.hpp"
#include "cellos/suite.hpp"

using namespace cellos;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario fixture(const std::string& name) {
  return load_scenario(std::string(CELLOS_SOURCE_DIR) + "/scenarios/" + name);
}

Scenario with_objective(Scenario sc, const std::string& text, std::optional<double> cmin = {}) {
  for (auto& s : sc.slices) {
    s.objective = text;
    s.constraints.clear();
    if (cmin) {
      ConstraintArgs a;
      a.rate = *cmin;
      s.constraints["user_min_rate"] = a;
    }
  }
  return sc;
}

double total_power(const RunSummary& s) {
  double p = 0.0;
  for (double w : s.metrics.user_power_w) p += w;
  return p;
}

// Toy suites are shared by several checks.
const SuiteSummary& suite(OracleObjective obj) {
  static std::map<OracleObjective, SuiteSummary> cache;
  auto it = cache.find(obj);
  if (it == cache.end()) it = cache.emplace(obj, run_toy_suite(obj, 50)).first;
  return it->second;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  auto t0 = std::chrono::steady_clock::now();
  const auto& mr = suite(OracleObjective::MaxRate);
  const auto& mp = suite(OracleObjective::MinPower);
  double secs = seconds_since(t0);
  bool pass = mr.cases.size() == 50 && mp.cases.size() == 50 && mr.passed >= 45 && mp.passed >= 45 && secs < 120.0;
  return {pass, fmt("max-rate %zu/50, min-power %zu/50 within 5%% + grid slack; converged %zu and %zu; %.2f s",
                    mr.passed, mp.passed, mr.converged, mp.converged, secs)};
}

// Reconstruction of the centralized objective from the local programs.
std::string idx3(const char* fam, int b, int u, int n) {
  return std::string(fam) + "[" + std::to_string(b) + "," + std::to_string(u) + "," + std::to_string(n) + "]";
}

using NamedPoint = std::map<std::string, double>;

std::vector<double> bind_named(const SymbolTable& t, const NamedPoint& pt) {
  std::vector<double> v = declared_values(t);
  for (const auto& m : t.all()) {
    auto it = pt.find(m.name);
    if (it != pt.end()) v[m.id] = it->second;
  }
  return v;
}

NamedPoint feasible_point(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.05, 1.0);
  NamedPoint pt;
  pt["B"] = U(rng);
  pt["noise_N"] = 0.1 * U(rng);
  for (int b = 0; b < shape.bs_count(); ++b) {
    std::vector<int> perm = shape.users_by_bs[b];
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int n = 0; n < shape.channels; ++n) {
      for (int u : shape.users_by_bs[b]) {
        double y = n < static_cast<int>(perm.size()) && perm[n] == u;
        pt[idx3("y", b, u, n)] = y;
        pt[idx3("p", b, u, n)] = y ? U(rng) / shape.channels : 0.0;
        pt[idx3("x", b, u, n)] = y * pt[idx3("p", b, u, n)];
      }
    }
    for (int u = 0; u < shape.user_count(); ++u) {
      for (int n = 0; n < shape.channels; ++n) pt[idx3("g", b, u, n)] = U(rng);
    }
  }
  return pt;
}

Outcome lagrangian_reconstruction() {
  const std::vector<std::pair<std::string, std::optional<double>>> fixtures = {
      {"max(rate)", 0.2}, {"max(rate)", std::nullopt}, {"min(power)", 0.3}, {"max(sum(log(rate)))", 0.1},
      {"max(rate - 0.5*power)", std::nullopt}};
  const std::vector<Shape> shapes = {Shape{{{0, 1}, {2, 3}}, 2}, Shape{{{0, 1, 2}, {3, 4}, {5}}, 3}};
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int points = 0;
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
      // Ground every local program once.
      struct Local {
        SymbolTable table;
        Expr objective;
        std::vector<std::pair<SymbolId, Expr>> aux;
      };
      std::vector<Local> locals;
      for (const auto& dp : programs) {
        Local l;
        Grounder gr(dp.symbols, shape, l.table);
        l.objective = gr.ground(dp.direction == Direction::Maximize ? dp.objective : ex::neg(dp.objective));
        if (dp.auxiliary) {
          for (int u : shape.users_by_bs[dp.owner]) {
            for (int n = 0; n < shape.channels; ++n) {
              Expr h = gr.ground(dp.auxiliary->h, {{"u", u}, {"n", n}});
              if (auto id = l.table.find(idx3("i", dp.owner, u, n))) l.aux.push_back({*id, h});
            }
          }
        }
        locals.push_back(std::move(l));
      }
      for (int k = 0; k < 100; ++k) {
        NamedPoint pt = feasible_point(shape, rng);
        double want = sign * eval_dense(central.objective, bind_named(central.symbols, pt));
        double got = 0.0;
        for (const auto& l : locals) {
          std::vector<double> v = bind_named(l.table, pt);  // multipliers default to 0
          for (const auto& [id, h] : l.aux) v[id] = eval_dense(h, v);
          got += eval_dense(l.objective, v);
        }
        worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
        ++points;
      }
    }
  }
  return {worst <= 1e-9, fmt("%d points over %zu fixtures, worst relative gap %.3g", points,
                             fixtures.size() * shapes.size(), worst)};
}

Outcome weak_duality() {
  std::size_t cases = 0, strict = 0, ok = 0;
  double margin = std::numeric_limits<double>::infinity();
  for (auto obj : {OracleObjective::MaxRate, OracleObjective::SumLogRate}) {
    for (const auto& c : suite(obj).cases) {
      ++cases;
      strict += c.dual >= c.oracle.value;
      ok += c.dual >= c.oracle.value - c.slack;
      margin = std::min(margin, c.dual - c.oracle.value);
    }
  }
  return {ok == cases, fmt("dual >= oracle optimum on %zu/%zu maximization fixtures (%zu without slack), "
                           "smallest margin %.4g",
                           ok, cases, strict, margin)};
}

Outcome min_power_constraints() {
  const double cmin = 1e6;
  std::string detail;
  bool pass = true;
  for (const char* f : {"two_bs_example.json", "high_interference.json", "low_interference.json"}) {
    Scenario base = fixture(f);
    RunSummary mp = run_experiment(with_objective(base, "min(power)", cmin), SchedulerKind::CellOS);
    RunSummary mr = run_experiment(with_objective(base, "max(rate)"), SchedulerKind::CellOS);
    double worst = *std::min_element(mp.metrics.user_throughput.begin(), mp.metrics.user_throughput.end());
    bool ok = worst >= cmin && total_power(mp) < total_power(mr);
    pass = pass && ok;
    detail += fmt("%s min rate %.4g bit/s, power %.4g W vs %.4g W; ", f, worst, total_power(mp), total_power(mr));
  }
  return {pass, detail};
}

Outcome fairness_ordering() {
  Scenario base = fixture("high_interference.json");
  RunSummary mr = run_experiment(with_objective(base, "max(rate)"), SchedulerKind::CellOS);
  RunSummary sl = run_experiment(with_objective(base, "max(sum(log(rate)))"), SchedulerKind::CellOS);
  const double lo = 1.0 / base.ue_count();
  bool within = mr.metrics.jain >= lo && mr.metrics.jain <= 1.0 && sl.metrics.jain >= lo && sl.metrics.jain <= 1.0;
  return {within && sl.metrics.jain >= mr.metrics.jain,
          fmt("Jain sum-log-rate %.4f >= max-rate %.4f on the high-interference fixture", sl.metrics.jain,
              mr.metrics.jain)};
}

Outcome baseline_dominance() {
  bool pass = true;
  std::string detail;
  for (const char* f : {"two_bs_example.json", "high_interference.json", "low_interference.json"}) {
    Scenario sc = with_objective(fixture(f), "max(rate)");
    double c = run_experiment(sc, SchedulerKind::CellOS).metrics.sum_throughput;
    double rr = run_experiment(sc, SchedulerKind::RoundRobin).metrics.sum_throughput;
    pass = pass && c >= rr;
    detail += fmt("%s %.4g vs RR %.4g; ", f, c, rr);
    if (std::string(f) == "high_interference.json") {
      double pf = run_experiment(sc, SchedulerKind::ProportionalFair).metrics.sum_throughput;
      pass = pass && c >= pf;
      detail += fmt("vs PF %.4g; ", pf);
    }
  }
  return {pass, detail};
}

Outcome slicing_independence() {
  Scenario sc = fixture("slicing.json");
  const double cmin = *sc.slices[1].constraints.at("user_min_rate").rate;
  auto pts = sweep_slices(sc, {0.7, 0.5, 0.3}, SchedulerKind::CellOS);
  bool monotone = true, floor_ok = true;
  std::vector<double> flat;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (k > 0) monotone = monotone && pts[k].summary.slices[0].sum_throughput <= pts[k - 1].summary.slices[0].sum_throughput;
    floor_ok = floor_ok && pts[k].summary.slices[1].min_user_throughput >= cmin;
    flat.push_back(pts[k].summary.slices[1].sum_throughput);
  }
  double mean = 0.0, var = 0.0;
  for (double v : flat) mean += v / flat.size();
  for (double v : flat) var += (v - mean) * (v - mean) / flat.size();
  double cv = std::sqrt(var) / mean;
  return {monotone && floor_ok && cv < 0.1,
          fmt("max(rate) slice %.4g >= %.4g >= %.4g bit/s; min(power) slice CV %.4f, floor met %s",
              pts[0].summary.slices[0].sum_throughput, pts[1].summary.slices[0].sum_throughput,
              pts[2].summary.slices[0].sum_throughput, cv, floor_ok ? "at every share" : "NOT at every share")};
}

// Per-round totals of a ledger.
std::map<int, std::pair<std::size_t, std::size_t>> rounds(const std::vector<OverheadEntry>& ledger) {
  std::map<int, std::pair<std::size_t, std::size_t>> out;
  for (const auto& e : ledger) {
    out[e.iteration].first += e.values;
    out[e.iteration].second += e.bytes;
  }
  return out;
}

OracleInstance random_instance(int bs, int users_per_bs, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.05, 1.0);
  OracleInstance inst;
  int next = 0;
  for (int b = 0; b < bs; ++b) {
    std::vector<int> ids;
    for (int k = 0; k < users_per_bs; ++k) ids.push_back(next++);
    inst.shape.users_by_bs.push_back(ids);
  }
  inst.shape.channels = channels;
  inst.gains = GainView(bs, next, channels);
  for (int b = 0; b < bs; ++b)
    for (int u = 0; u < next; ++u)
      for (int n = 0; n < channels; ++n) inst.gains.set(b, u, n, (inst.shape.serving_bs(u) == b ? 10.0 : 1.0) * U(rng));
  inst.noise = 0.1;
  inst.power_cap = 1.0;
  return inst;
}

Outcome overhead_exactness() {
  std::string detail;
  bool pass = true;
  // Fully coupled toy: 2 BSs x 2 UEs x 2 channels.
  {
    Ensemble ens = bind_instance(random_instance(2, 2, 2, 5), OracleObjective::MaxRate, 5);
    ens.run_until_converged();
    bool eq = true;
    for (const auto& [it, vb] : rounds(ens.ledger())) eq = eq && vb.first == 12 && vb.second == 48;
    pass = pass && eq && !ens.ledger().empty();
    detail += fmt("2x2x2: %zu rounds of 12 values / 48 bytes %s; ", rounds(ens.ledger()).size(), eq ? "exact" : "MISMATCH");
  }
  // |U| = 9, |N| = 50.
  {
    EngineConfig eng;
    eng.max_iterations = 4;
    Ensemble ens = bind_instance(random_instance(3, 3, 50, 9), OracleObjective::MaxRate, 9, eng);
    ens.run_until_converged();
    bool eq = true;
    for (const auto& [it, vb] : rounds(ens.ledger())) eq = eq && vb.first == 459 && vb.second == 1836;
    pass = pass && eq && !ens.ledger().empty();
    detail += fmt("9 UEs x 50 channels: %zu rounds of 459 values / 1836 bytes %s; ", rounds(ens.ledger()).size(),
                  eq ? "exact" : "MISMATCH");
  }
  // Simulator runs: bytes are 4 x values and every round stays within the bound.
  {
    Scenario sc = fixture("slicing.json");
    sc.tti_count = 100;
    std::ostringstream ovh;
    RunSummary s = run_experiment(sc, SchedulerKind::CellOS, {nullptr, &ovh});
    std::istringstream in(ovh.str());
    std::string line;
    std::getline(in, line);
    std::map<int, std::size_t> per_round;
    while (std::getline(in, line)) {
      int it, sender;
      std::size_t values, bytes;
      if (std::sscanf(line.c_str(), "%d,%d,%zu,%zu", &it, &sender, &values, &bytes) != 4) return {false, "bad overhead CSV"};
      pass = pass && bytes == 4 * values;
      per_round[it] += values;
    }
    // Each slice has 4 UEs and 2 PRB groups: at most 4 * 3 values per round.
    bool bounded = std::all_of(per_round.begin(), per_round.end(), [](const auto& kv) { return kv.second <= 12; });
    pass = pass && bounded && s.total_overhead_bytes == 4 * s.total_overhead_values;
    detail += fmt("slicing run: %zu rounds within bound, %zu bytes = 4 x %zu values", per_round.size(),
                  s.total_overhead_bytes, s.total_overhead_values);
  }
  return {pass, detail};
}

Outcome coupling_graph_fixture() {
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
  std::set<std::set<std::string>> got, want = {{"x2", "x4"}, {"x2", "x5"}, {"x3", "x4"},
                                               {"x1", "x3"}, {"x1", "x2"}, {"x2", "x3"}};
  for (const auto& e : g.edges) got.insert({t.at(e.a).name, t.at(e.b).name});
  std::string list;
  for (const auto& e : got) list += "{" + *e.begin() + "," + *e.rbegin() + "}";
  return {got == want && g.edges.size() == 6, fmt("%zu edges %s", g.edges.size(), list.c_str())};
}

Outcome pipeline_timing() {
  Scenario sc = fixture("two_bs_example.json");
  auto t0 = std::chrono::steady_clock::now();
  CompiledScenario c = compile_scenario(sc);
  double secs = seconds_since(t0);
  return {secs < 1.0 && c.programs.at(0).size() == 2,
          fmt("parse %.3f ms, generate %.3f ms, decompose %.3f ms, wall %.3f ms", c.timing.parse_ms,
              c.timing.generate_ms, c.timing.decompose_ms, secs * 1e3)};
}

Outcome numeric_hygiene() {
  // Derivative tapes of every bound objective family against central
  // differences of the objective tape.
  const std::vector<std::pair<std::string, std::optional<double>>> families = {
      {"max(rate)", 0.3}, {"max(sum(log(rate)))", 0.3}, {"min(power)", 0.3}, {"max(rate - 0.5*power)", std::nullopt}};
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(0.05, 1.0);
  double worst = 0.0;
  int points = 0;
  for (const auto& [text, cmin] : families) {
    OracleInstance inst = random_instance(2, 2, 2, 31);
    inst.rate_floor = cmin;
    auto nwk = VirtualNetwork::create(2);
    nwk.assign_users(0, {0, 1, 2, 3});
    nwk.set_utility(text, 0);
    if (cmin) {
      ConstraintArgs a;
      a.rate = *cmin;
      nwk.add_constraints(0, {{"user_min_rate", a}});
    }
    nwk.initialize_engine(EngineConfig{});
    auto prob = generate_problem(nwk, 0);
    auto programs = decompose(prob, build_coupling_graph(prob), DecompositionMethod::LagrangianDual);
    for (const auto& dp : programs) {
      BoundProgram bp = bind_runtime(dp, runtime_inputs(inst));
      for (int k = 0; k < 100; ++k) {
        std::vector<double> w = bp.base;
        for (const auto& s : bp.pairs) {
          w[s.y] = 1.0;
          w[s.p] = U(rng) * 0.5;
          if (s.aux) w[*s.aux] = U(rng);
        }
        for (const auto& l : bp.lambda) {
          if (l) w[*l] = U(rng);
        }
        for (const auto& r : bp.remotes) {
          for (const auto& x : r.x) {
            if (x) w[*x] = U(rng);
          }
        }
        for (const auto& s : bp.pairs) {
          double an = s.d1.eval_extended(w);
          double x = w[s.p], h = 1e-6;
          w[s.p] = x + h;
          double up = bp.objective_tape.eval_extended(w);
          w[s.p] = x - h;
          double down = bp.objective_tape.eval_extended(w);
          w[s.p] = x;
          double fd = (up - down) / (2 * h);
          worst = std::max(worst, std::abs(an - fd) / std::max(1.0, std::abs(an)));
          ++points;
        }
      }
    }
  }
  // Bit-identical reruns of a toy case and of a simulator run.
  ToyCase a = run_toy_case(7, OracleObjective::MaxRate), b = run_toy_case(7, OracleObjective::MaxRate);
  bool same = std::bit_cast<std::uint64_t>(a.distributed) == std::bit_cast<std::uint64_t>(b.distributed) &&
              std::bit_cast<std::uint64_t>(a.dual) == std::bit_cast<std::uint64_t>(b.dual);
  Scenario sc = fixture("high_interference.json");
  sc.tti_count = 200;
  std::ostringstream c1, c2;
  run_experiment(sc, SchedulerKind::CellOS, {&c1, nullptr}, ExecutionMode::Sequential);
  run_experiment(sc, SchedulerKind::CellOS, {&c2, nullptr}, ExecutionMode::Threaded);
  same = same && c1.str() == c2.str();
  return {worst <= 1e-4 && same, fmt("%d derivative checks, worst relative error %.3g; reruns %s", points, worst,
                                     same ? "bit-identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
      {"oracle-equivalence", oracle_equivalence},
      {"lagrangian-reconstruction", lagrangian_reconstruction},
      {"weak-duality", weak_duality},
      {"min-power-constraints", min_power_constraints},
      {"fairness-ordering", fairness_ordering},
      {"baseline-dominance", baseline_dominance},
      {"slicing-independence", slicing_independence},
      {"overhead-exactness", overhead_exactness},
      {"coupling-graph-fixture", coupling_graph_fixture},
      {"pipeline-timing", pipeline_timing},
      {"numeric-hygiene", numeric_hygiene},
  };
  int failures = 0;
  for (std::size_t k = 0; k < checks.size(); ++k) {
    Outcome o;
    try {
      o = checks[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2zu %-26s %s\n", o.pass ? "PASS" : "FAIL", k + 1, checks[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
