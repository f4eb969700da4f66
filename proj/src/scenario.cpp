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

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cellos/error.hpp"
#include "cellos/experiment.hpp"
#include "cellos/problem.hpp"
#include "json.hpp"

namespace cellos {

using nlohmann::json;

namespace {

// Typed access to one JSON object with unknown-key rejection.
class JsonNode {
 public:
  JsonNode(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) throw SchemaViolation(path_ + "/" + k + ": unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  JsonNode child(const char* key) const { return JsonNode(at(key), path_ + "/" + key); }
  const json& at(const char* key) const {
    if (!j_.contains(key)) fail(std::string("missing key ") + key);
    return j_.at(key);
  }

  double number(const char* key, std::optional<double> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail(std::string("missing key ") + key);
    }
    const json& v = j_.at(key);
    if (!v.is_number()) fail(std::string(key) + " must be a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) fail(std::string(key) + " must be finite");
    return d;
  }
  double positive(const char* key, std::optional<double> fallback = std::nullopt) const {
    double d = number(key, fallback);
    if (!(d > 0.0)) fail(std::string(key) + " must be positive");
    return d;
  }
  long integer(const char* key, std::optional<long> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail(std::string("missing key ") + key);
    }
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(std::string(key) + " must be an integer");
    return v.get<long>();
  }
  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) fail(std::string(key) + " must be a boolean");
    return j_.at(key).get<bool>();
  }
  std::string string(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) fail(std::string(key) + " must be a string");
    return v.get<std::string>();
  }
  std::vector<int> ids(const char* key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(std::string(key) + " must be an array");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail(std::string(key) + " must hold integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw SchemaViolation((path_.empty() ? "/" : path_) + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
};

Point point(const JsonNode& n) {
  return {n.number("x"), n.number("y")};
}

ConstraintArgs constraint_args(const JsonNode& n) {
  n.allow({"rate", "pmax", "users"});
  ConstraintArgs a;
  if (n.has("rate")) a.rate = n.number("rate");
  if (n.has("pmax")) a.pmax = n.number("pmax");
  if (n.has("users")) {
    a.users.all = false;
    a.users.ids = n.ids("users");
  }
  return a;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaViolation(std::string("not valid JSON: ") + e.what());
  }
  JsonNode root(doc, "");
  root.allow({"version", "name", "seed", "geometry", "channel", "prb_count", "bandwidth_hz", "noise_w", "pmax_w",
              "pmin_w", "tti_count", "traffic", "slices", "engine"});
  if (root.integer("version") != kScenarioVersion) root.fail("unsupported version");
  if (root.has("name")) root.string("name");

  Scenario sc;
  long seed = root.integer("seed", 0);
  if (seed < 0) root.fail("seed must be nonnegative");
  sc.seed = static_cast<std::uint64_t>(seed);

  JsonNode geo = root.child("geometry");
  geo.allow({"base_stations", "users"});
  const json& bss = geo.at("base_stations");
  const json& ues = geo.at("users");
  if (!bss.is_array() || bss.empty()) geo.fail("base_stations must be a nonempty array");
  if (!ues.is_array() || ues.empty()) geo.fail("users must be a nonempty array");
  for (std::size_t b = 0; b < bss.size(); ++b) {
    JsonNode n(bss[b], geo.path() + "/base_stations/" + std::to_string(b));
    n.allow({"x", "y"});
    sc.channel.bs_positions.push_back(point(n));
  }
  for (std::size_t u = 0; u < ues.size(); ++u) {
    JsonNode n(ues[u], geo.path() + "/users/" + std::to_string(u));
    n.allow({"x", "y", "bs"});
    Point p = point(n);
    sc.channel.ue_positions.push_back(p);
    int serving = -1;
    if (n.has("bs")) {
      serving = static_cast<int>(n.integer("bs"));
      if (serving < 0 || serving >= sc.bs_count()) n.fail("bs refers to no base station");
    } else {
      // Nearest base station, lowest id on ties.
      double best = 0.0;
      for (int b = 0; b < sc.bs_count(); ++b) {
        const Point& q = sc.channel.bs_positions[b];
        double d = std::hypot(p.x - q.x, p.y - q.y);
        if (serving < 0 || d < best) {
          serving = b;
          best = d;
        }
      }
    }
    sc.serving.push_back(serving);
  }

  if (root.has("channel")) {
    JsonNode ch = root.child("channel");
    ch.allow({"pathloss_exponent", "reference_gain", "shadowing_db", "rayleigh"});
    sc.channel.pathloss_exponent = ch.positive("pathloss_exponent", sc.channel.pathloss_exponent);
    sc.channel.reference_gain = ch.positive("reference_gain", sc.channel.reference_gain);
    sc.channel.shadowing_db = ch.number("shadowing_db", 0.0);
    if (sc.channel.shadowing_db < 0.0) ch.fail("shadowing_db must be nonnegative");
    sc.channel.rayleigh = ch.boolean("rayleigh", false);
  }
  sc.channel.seed = sc.seed;

  long prbs = root.integer("prb_count", 50);
  if (prbs < 1 || prbs > 10000) root.fail("prb_count out of range");
  sc.ran.prbs = static_cast<int>(prbs);
  sc.channel.channels = sc.ran.prbs;
  sc.bandwidth_hz = root.positive("bandwidth_hz", 10e6);
  sc.ran.prb_bandwidth_hz = sc.bandwidth_hz / static_cast<double>(sc.ran.prbs);
  sc.ran.noise_w = root.positive("noise_w", sc.ran.noise_w);
  sc.ran.pmax_w = root.positive("pmax_w", sc.ran.pmax_w);
  sc.ran.pmin_w = root.number("pmin_w", 0.0);
  if (sc.ran.pmin_w < 0.0 || sc.ran.pmin_w >= sc.ran.pmax_w) root.fail("pmin_w must lie in [0, pmax_w)");
  sc.tti_count = root.integer("tti_count", 1000);
  if (sc.tti_count < 0) root.fail("tti_count must be nonnegative");

  if (root.has("traffic")) {
    JsonNode tr = root.child("traffic");
    tr.allow({"full_buffer", "file_bytes"});
    if (tr.has("full_buffer") == tr.has("file_bytes")) tr.fail("exactly one of full_buffer and file_bytes");
    if (tr.has("full_buffer")) {
      if (!tr.boolean("full_buffer", true)) tr.fail("full_buffer must be true when given");
      sc.full_buffer = true;
    } else {
      sc.full_buffer = false;
      sc.file_bytes = tr.positive("file_bytes");
    }
  }

  const json& slices = root.at("slices");
  if (!slices.is_array() || slices.empty()) root.fail("slices must be a nonempty array");
  std::vector<int> slice_of(sc.ue_count(), -1);
  std::vector<double> shares;
  for (std::size_t s = 0; s < slices.size(); ++s) {
    JsonNode n(slices[s], "/slices/" + std::to_string(s));
    n.allow({"share", "users", "objective", "constraints", "channel_groups"});
    SliceConfig cfg;
    cfg.share = n.number("share");
    cfg.users = n.ids("users");
    for (int u : cfg.users) {
      if (u < 0 || u >= sc.ue_count()) n.fail("user " + std::to_string(u) + " is not placed");
      if (slice_of[u] >= 0) n.fail("user " + std::to_string(u) + " is in two slices");
      slice_of[u] = static_cast<int>(s);
    }
    if (n.has("objective")) cfg.objective = n.string("objective");
    if (n.has("constraints")) {
      JsonNode cs = n.child("constraints");
      for (const auto& [key, value] : cs.raw().items()) {
        cfg.constraints[key] = constraint_args(JsonNode(value, cs.path() + "/" + key));
      }
    }
    if (n.has("channel_groups")) {
      long g = n.integer("channel_groups");
      if (g < 1) n.fail("channel_groups must be positive");
      cfg.channel_groups = static_cast<int>(g);
    }
    shares.push_back(cfg.share);
    sc.slices.push_back(std::move(cfg));
  }
  for (int u = 0; u < sc.ue_count(); ++u) {
    if (slice_of[u] < 0) root.fail("user " + std::to_string(u) + " belongs to no slice");
  }
  try {
    partition_slices(sc.ran.prbs, shares);
  } catch (const InvalidShare& e) {
    root.fail(std::string("slices: ") + e.what());
  }

  if (root.has("engine")) {
    JsonNode en = root.child("engine");
    en.allow({"method", "decomposition", "alpha", "max_iter", "epsilon", "reopt_period"});
    if (en.has("method")) sc.engine.method = en.string("method");
    if (en.has("decomposition")) sc.engine.decomposition = en.string("decomposition");
    sc.engine.alpha = en.positive("alpha", sc.engine.alpha);
    long it = en.integer("max_iter", sc.engine.max_iterations);
    if (it < 1) en.fail("max_iter must be positive");
    sc.engine.max_iterations = static_cast<int>(it);
    sc.engine.epsilon = en.positive("epsilon", sc.engine.epsilon);
    long period = en.integer("reopt_period", sc.reopt_period);
    if (period < 1) en.fail("reopt_period must be positive");
    sc.reopt_period = static_cast<int>(period);
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaViolation("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

RanState initial_state(const Scenario& sc) {
  RanState st;
  st.cfg = sc.ran;
  st.bs_count = sc.bs_count();
  st.serving = sc.serving;
  st.slice_of.assign(sc.ue_count(), -1);
  std::vector<double> shares;
  for (std::size_t s = 0; s < sc.slices.size(); ++s) {
    shares.push_back(sc.slices[s].share);
    for (int u : sc.slices[s].users) st.slice_of[u] = static_cast<int>(s);
  }
  st.slices = partition_slices(sc.ran.prbs, shares);
  st.buffer_bits.assign(sc.ue_count(), sc.full_buffer ? kFullBuffer : 8.0 * sc.file_bytes);
  st.validate();
  return st;
}

CompiledScenario compile_scenario(const Scenario& sc) {
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  CompiledScenario out;
  auto t0 = clock::now();
  std::vector<double> shares;
  for (const auto& s : sc.slices) shares.push_back(s.share);
  auto nwk = VirtualNetwork::create(sc.bs_count(), shares);
  for (std::size_t s = 0; s < sc.slices.size(); ++s) {
    const int id = static_cast<int>(s);
    nwk.assign_users(id, sc.slices[s].users);
    if (sc.slices[s].objective) nwk.set_utility(*sc.slices[s].objective, id);
    if (!sc.slices[s].constraints.empty()) nwk.add_constraints(id, sc.slices[s].constraints);
  }
  nwk.initialize_engine(sc.engine);
  auto t1 = clock::now();
  out.timing.parse_ms = ms(t1 - t0);
  for (std::size_t s = 0; s < sc.slices.size(); ++s) {
    auto g0 = clock::now();
    auto prob = generate_problem(nwk, static_cast<int>(s));
    auto g1 = clock::now();
    out.programs.push_back(decompose(prob, build_coupling_graph(prob),
                                     parse_decomposition_method(sc.engine.decomposition), sc.engine));
    auto g2 = clock::now();
    out.timing.generate_ms += ms(g1 - g0);
    out.timing.decompose_ms += ms(g2 - g1);
  }
  out.timing.total_ms = ms(clock::now() - t0);
  return out;
}

}  // namespace cellos
