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

#include "cellos/error.hpp"
#include "cellos/network.hpp"
#include "doctest.h"

using namespace cellos;

TEST_CASE("network creation") {
  auto two = VirtualNetwork::create(2, {1.0});
  CHECK(two.bs_count() == 2);
  CHECK(two.get_slices() == std::vector<int>{0});
  CHECK(two.slice(0).prb_share == 1.0);

  auto three = VirtualNetwork::create(3, {0.7, 0.3});
  CHECK(three.slices().size() == 2);
  CHECK(three.slice(1).prb_share == 0.3);

  auto dflt = VirtualNetwork::create(1);
  CHECK(dflt.slices().size() == 1);
  CHECK(dflt.slice(0).prb_share == 1.0);

  CHECK_THROWS_AS(VirtualNetwork::create(0, {1.0}), InvalidNetwork);
  CHECK_THROWS_AS(VirtualNetwork::create(2, {0.7, 0.4}), InvalidShare);
  CHECK_THROWS_AS(VirtualNetwork::create(2, {0.0}), InvalidShare);
  CHECK_THROWS_AS(VirtualNetwork::create(2, {-0.5}), InvalidShare);
}

TEST_CASE("per-slice objectives are independent") {
  auto nwk = VirtualNetwork::create(3, {0.7, 0.3});
  nwk.set_utility("max(rate)", 0);
  nwk.set_utility("min(power)", 1);
  CHECK(nwk.slice(0).objective->direction == Direction::Maximize);
  CHECK(nwk.slice(1).objective->direction == Direction::Minimize);
  nwk.set_utility("max(sum(log(rate)))", 1);
  CHECK(*nwk.slice(0).objective_text == "max(rate)");
  CHECK_THROWS_AS(nwk.set_utility("max(rate)", 9), UnknownSlice);
  CHECK_THROWS_AS(nwk.set_utility("max(", 0), SyntaxError);
  CHECK(*nwk.slice(0).objective_text == "max(rate)");
}

TEST_CASE("literal transcription of the operator workflow") {
  int bs_num = 2;
  double rate = 1e6;
  auto nwk = VirtualNetwork::create(bs_num);
  auto slices = nwk.get_slices();
  nwk.assign_users(slices[0], {0, 1, 2, 3});
  nwk.set_utility("min(power)", slices[0]);
  ConstraintArgs args;
  args.rate = rate;
  nwk.add_constraints(slices[0], {{"user_min_rate", args}});
  EngineConfig eng;
  eng.set_opt_method("sub-gradient");
  CHECK_FALSE(nwk.compile_ready());
  nwk.initialize_engine(eng);
  CHECK(nwk.compile_ready());
  CHECK(nwk.slice(0).constraints.size() == 1);
  CHECK_THROWS_AS(nwk.initialize_engine(eng), EngineAlreadySet);
}

TEST_CASE("engine configuration validation") {
  EngineConfig cfg;
  CHECK(cfg.alpha == 0.05);
  CHECK(cfg.max_iterations == 500);
  CHECK(cfg.epsilon == 1e-3);
  CHECK_THROWS_AS(cfg.set_opt_method("interior-point"), InvalidEngineConfig);
  EngineConfig bad;
  bad.alpha = 0.0;
  auto nwk = VirtualNetwork::create(1);
  CHECK_THROWS_AS(nwk.initialize_engine(bad), InvalidEngineConfig);
  bad = EngineConfig{};
  bad.max_iterations = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidEngineConfig);
}

TEST_CASE("slice membership and readiness") {
  auto nwk = VirtualNetwork::create(2, {0.5, 0.5});
  nwk.assign_users(0, {1, 2});
  CHECK_THROWS_AS(nwk.assign_users(1, {2, 3}), InvalidNetwork);
  nwk.initialize_engine(EngineConfig{});
  CHECK_FALSE(nwk.compile_ready());
  nwk.set_utility("max(rate)", 0);
  // Slice 1 has no users, so it needs no objective.
  CHECK(nwk.compile_ready());
  ConstraintArgs args;
  args.rate = 5e5;
  CHECK_NOTHROW(nwk.add_constraints(1, {{"user_min_rate", args}}));
  CHECK_THROWS_AS(nwk.add_constraints(1, {{"user_min_rate", args}}), DuplicateConstraint);
}
