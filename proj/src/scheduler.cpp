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

#include <algorithm>
#include <cmath>
#include <functional>

#include "cellos/error.hpp"
#include "cellos/ran.hpp"

namespace cellos {

namespace {

// Calls pick(b, s, users, n) for each PRB n of every (b, slice) with data and
// spreads the slice budget equally over the granted PRBs.
Allocation schedule(const RanState& state, const std::function<int(int, int, const std::vector<int>&, int)>& pick) {
  if (!state.any_backlogged()) throw NoBackloggedUsers("no UE has buffered data");
  Allocation alloc;
  const int ns = static_cast<int>(state.slices.size());
  for (int b = 0; b < state.bs_count; ++b) {
    for (int s = 0; s < ns; ++s) {
      auto users = state.users(b, s);
      const PrbRange& r = state.slices[s];
      if (users.empty() || r.count == 0) continue;
      std::size_t start = alloc.grants.size();
      for (int n = r.first; n < r.first + r.count; ++n) {
        int u = pick(b, s, users, n);
        if (u >= 0) alloc.grants.push_back({b, u, n, 0.0});
      }
      std::size_t granted = alloc.grants.size() - start;
      for (std::size_t k = start; k < alloc.grants.size(); ++k) {
        alloc.grants[k].power_w = state.slice_budget(s) / static_cast<double>(granted);
      }
    }
  }
  return alloc;
}

// Rate of one PRB at the equal per-PRB power of the slice, without interference.
double prb_rate(const RanState& state, const GainView& gains, int b, int s, int u, int n) {
  double p = state.slice_budget(s) / static_cast<double>(state.slices[s].count);
  return state.cfg.prb_bandwidth_hz * std::log2(1.0 + gains.get(b, u, n) * p / state.cfg.noise_w);
}

}  // namespace

Allocation round_robin(const RanState& state, RoundRobinMemory& memory) {
  const std::size_t ns = state.slices.size();
  memory.last.resize(static_cast<std::size_t>(state.bs_count) * ns, -1);
  return schedule(state, [&](int b, int s, const std::vector<int>& users, int) {
    int& last = memory.last[static_cast<std::size_t>(b) * ns + s];
    auto it = std::upper_bound(users.begin(), users.end(), last);
    int u = it == users.end() ? users.front() : *it;
    last = u;
    return u;
  });
}

Allocation proportional_fair(const RanState& state, const GainView& gains, const std::vector<double>& avg,
                             int window) {
  const double keep = 1.0 - 1.0 / window;
  std::vector<double> provisional(state.ue_count());
  for (int u = 0; u < state.ue_count(); ++u) provisional[u] = keep * avg.at(u);
  return schedule(state, [&](int b, int s, const std::vector<int>& users, int n) {
    int best = -1;
    bool best_fresh = false;
    double best_metric = 0.0, best_rate = 0.0;
    for (int u : users) {
      double r = prb_rate(state, gains, b, s, u, n);
      // A UE with no history outranks every UE with one; among them the
      // larger instantaneous rate wins.
      bool fresh = provisional[u] <= 0.0;
      double metric = fresh ? r : r / provisional[u];
      if (best < 0 || (fresh && !best_fresh) || (fresh == best_fresh && metric > best_metric)) {
        best = u;
        best_fresh = fresh;
        best_metric = metric;
        best_rate = r;
      }
    }
    provisional[best] += best_rate / window;
    return best;
  });
}

void update_average(std::vector<double>& avg, const TtiOutcome& out, double tti_s, int window) {
  for (std::size_t u = 0; u < avg.size(); ++u) {
    avg[u] = (1.0 - 1.0 / window) * avg[u] + (out.bits[u] / tti_s) / window;
  }
}

Allocation greedy(const RanState& state, const GainView& gains) {
  return schedule(state, [&](int b, int s, const std::vector<int>& users, int n) {
    int best = -1;
    double best_rate = -1.0;
    for (int u : users) {
      double r = prb_rate(state, gains, b, s, u, n);
      if (r > best_rate) {
        best = u;
        best_rate = r;
      }
    }
    return best;
  });
}

}  // namespace cellos
