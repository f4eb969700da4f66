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

#include <map>

#include "cellos/error.hpp"
#include "cellos/program_io.hpp"
#include "doctest.h"

using namespace cellos;

namespace {

std::vector<DistributedProgram> compile(int bs, const std::string& objective, bool min_rate) {
  auto nwk = VirtualNetwork::create(bs);
  nwk.assign_users(0, {0, 1, 2, 3});
  nwk.set_utility(objective, 0);
  if (min_rate) {
    ConstraintArgs a;
    a.rate = 0.5;
    nwk.add_constraints(0, {{"user_min_rate", a}});
  }
  auto prob = generate_problem(nwk, 0);
  return decompose(prob, build_coupling_graph(prob), DecompositionMethod::LagrangianDual);
}

void check_same(const DistributedProgram& a, const DistributedProgram& b) {
  CHECK(a.owner == b.owner);
  CHECK(a.bs_count == b.bs_count);
  CHECK(a.lagrangian == b.lagrangian);
  CHECK(a.direction == b.direction);
  CHECK(structurally_equal(a.objective, b.objective));
  REQUIRE(a.symbols.all().size() == b.symbols.all().size());
  for (std::size_t k = 0; k < a.symbols.all().size(); ++k) {
    const auto& x = a.symbols.all()[k];
    const auto& y = b.symbols.all()[k];
    CHECK(x.name == y.name);
    CHECK(x.kind == y.kind);
    CHECK(x.layer == y.layer);
    CHECK(x.domain == y.domain);
    CHECK(x.owner == y.owner);
    CHECK(x.value == y.value);
  }
  REQUIRE(a.constraints.size() == b.constraints.size());
  for (std::size_t k = 0; k < a.constraints.size(); ++k) {
    CHECK(a.constraints[k].kind == b.constraints[k].kind);
    CHECK(structurally_equal(a.constraints[k].lhs, b.constraints[k].lhs));
    CHECK(structurally_equal(a.constraints[k].rhs, b.constraints[k].rhs));
    CHECK(a.constraints[k].quantifiers.size() == b.constraints[k].quantifiers.size());
  }
  REQUIRE(a.update_rules.size() == b.update_rules.size());
  for (std::size_t k = 0; k < a.update_rules.size(); ++k) {
    CHECK(a.update_rules[k].multiplier == b.update_rules[k].multiplier);
    CHECK(structurally_equal(a.update_rules[k].subgradient, b.update_rules[k].subgradient));
  }
  REQUIRE(a.publish.size() == b.publish.size());
  CHECK(a.placeholder_manifest == b.placeholder_manifest);
  CHECK(a.neighbors == b.neighbors);
  CHECK(a.auxiliary.has_value() == b.auxiliary.has_value());
  if (a.auxiliary) CHECK(structurally_equal(a.auxiliary->h, b.auxiliary->h));
  CHECK(a.engine.alpha == b.engine.alpha);
  CHECK(a.engine.max_iterations == b.engine.max_iterations);
}

}  // namespace

TEST_CASE("serialized programs round-trip to structurally identical programs") {
  for (const char* obj : {"max(rate)", "max(sum(log(rate)))", "min(power)", "max(rate - 0.5*power)", "max(sinr)"}) {
    for (int bs : {1, 2, 3}) {
      for (bool mr : {false, true}) {
        CAPTURE(obj);
        CAPTURE(bs);
        for (const auto& dp : compile(bs, obj, mr)) {
          std::string bytes = serialize_program(dp);
          auto back = deserialize_program(bytes);
          check_same(dp, back);
          CHECK(serialize_program(back) == bytes);
        }
      }
    }
  }
}

TEST_CASE("serialization uses the ir-v1 schema with sorted keys") {
  auto dp = compile(2, "max(rate)", true).front();
  auto j = nlohmann::json::parse(serialize_program(dp));
  CHECK(j.at("schema") == "ir-v1");
  for (const char* key : {"owner", "objective_ast", "constraints", "update_rules", "publish_list",
                          "placeholder_manifest", "engine_config", "symbols"}) {
    CHECK(j.contains(key));
  }
  std::string prev;
  for (auto it = j.begin(); it != j.end(); ++it) {
    CHECK(prev < it.key());
    prev = it.key();
  }
}

TEST_CASE("oversized programs are rejected") {
  auto dp = compile(2, "max(rate)", false).front();
  CHECK_THROWS_AS(serialize_program(dp, 64), SerializationOverflow);
}

TEST_CASE("malformed IR is rejected") {
  auto dp = compile(2, "max(rate)", false).front();
  auto j = program_to_json(dp);
  CHECK_THROWS_AS(deserialize_program("{not json"), MalformedProgram);
  auto bad_schema = j;
  bad_schema["schema"] = "ir-v0";
  CHECK_THROWS_AS(program_from_json(bad_schema), MalformedProgram);
  auto missing = j;
  missing.erase("objective_ast");
  CHECK_THROWS_AS(program_from_json(missing), MalformedProgram);
  auto bad_node = j;
  bad_node["objective_ast"] = {{"op", "sym"}, {"name", "nope"}};
  CHECK_THROWS_AS(program_from_json(bad_node), MalformedProgram);
  auto bad_op = j;
  bad_op["objective_ast"] = {{"op", "exp"}};
  CHECK_THROWS_AS(program_from_json(bad_op), MalformedProgram);
}

TEST_CASE("dispatch delivers one program per base station") {
  auto programs = compile(2, "max(rate)", true);
  std::map<int, std::vector<std::string>> inbox;
  std::vector<Endpoint> eps;
  for (int b : {0, 1}) eps.push_back(Endpoint{b, [&inbox, b](const std::string& s) { inbox[b].push_back(s); }});
  auto receipts = dispatch(programs, eps);
  REQUIRE(receipts.size() == 2);
  for (const auto& r : receipts) {
    REQUIRE(inbox[r.owner].size() == 1);
    CHECK(r.bytes == inbox[r.owner][0].size());
    CHECK(deserialize_program(inbox[r.owner][0]).owner == r.owner);
  }
}

TEST_CASE("dispatch to a missing endpoint delivers nothing") {
  auto programs = compile(2, "max(rate)", true);
  int delivered = 0;
  std::vector<Endpoint> eps{Endpoint{0, [&](const std::string&) { ++delivered; }}};
  CHECK_THROWS_AS(dispatch(programs, eps), EndpointUnreachable);
  CHECK(delivered == 0);
}

TEST_CASE("centralized problems serialize deterministically") {
  auto nwk = VirtualNetwork::create(2);
  nwk.assign_users(0, {0, 1});
  nwk.set_utility("max(rate)", 0);
  auto a = problem_to_json(generate_problem(nwk, 0)).dump();
  auto b = problem_to_json(generate_problem(nwk, 0)).dump();
  CHECK(a == b);
  CHECK(a.find("\"schema\":\"ir-v1\"") != std::string::npos);
}
