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
#include <limits>
#include <ostream>

#include "cellos/error.hpp"
#include "cellos/experiment.hpp"

namespace cellos {

std::vector<PrbRange> channel_groups(const Scenario& sc, const RanState& state, int slice) {
  const PrbRange& r = state.slices[slice];
  int groups = 1;
  if (sc.slices[slice].channel_groups) {
    groups = *sc.slices[slice].channel_groups;
  } else {
    for (int b = 0; b < state.bs_count; ++b) {
      groups = std::max(groups, static_cast<int>(state.users(b, slice, false).size()));
    }
  }
  groups = std::min(groups, r.count);
  std::vector<PrbRange> out;
  int first = r.first;
  for (int k = 0; k < groups; ++k) {
    int size = r.count / groups + (k < r.count % groups ? 1 : 0);
    out.push_back({first, size});
    first += size;
  }
  return out;
}

RuntimeInputs slice_inputs(const Scenario& sc, const RanState& state, const GainView& gains, int slice,
                           const std::vector<std::vector<int>>& users_by_bs) {
  auto groups = channel_groups(sc, state, slice);
  const double budget = state.slice_budget(slice);
  int smallest = std::numeric_limits<int>::max();
  for (const auto& g : groups) smallest = std::min(smallest, g.count);

  RuntimeInputs in;
  in.shape.users_by_bs = users_by_bs;
  in.shape.channels = static_cast<int>(groups.size());
  in.gains = GainView(state.bs_count, state.ue_count(), in.shape.channels);
  for (const auto& us : users_by_bs) {
    for (int u : us) {
      for (int b = 0; b < state.bs_count; ++b) {
        const bool serving = state.serving[u] == b;
        for (std::size_t k = 0; k < groups.size(); ++k) {
          // Weakest serving gain and strongest interfering gain of the group,
          // so planned rates never exceed the delivered ones.
          double g = serving ? std::numeric_limits<double>::infinity() : 0.0;
          for (int n = groups[k].first; n < groups[k].first + groups[k].count; ++n) {
            g = serving ? std::min(g, gains.get(b, u, n)) : std::max(g, gains.get(b, u, n));
          }
          double noise = state.cfg.noise_w * groups[k].count;
          in.gains.set(b, u, static_cast<int>(k), g * budget / noise);
        }
      }
    }
  }
  in.noise = 1.0;
  in.bandwidth = 1.0;
  auto it = sc.slices[slice].constraints.find("user_min_rate");
  if (it != sc.slices[slice].constraints.end() && it->second.rate) {
    in.rate_floor = *it->second.rate / (smallest * state.cfg.prb_bandwidth_hz);
  }
  return in;
}

SchedulerKind parse_scheduler(const std::string& name) {
  if (name == "cellos") return SchedulerKind::CellOS;
  if (name == "round_robin") return SchedulerKind::RoundRobin;
  if (name == "proportional_fair") return SchedulerKind::ProportionalFair;
  if (name == "greedy") return SchedulerKind::Greedy;
  throw SchemaViolation("unknown scheduler " + name);
}

const char* to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::CellOS:
      return "cellos";
    case SchedulerKind::RoundRobin:
      return "round_robin";
    case SchedulerKind::ProportionalFair:
      return "proportional_fair";
    case SchedulerKind::Greedy:
      return "greedy";
  }
  return "?";
}

namespace {

// The agents of one slice and the allocation they last produced.
class SliceAgents {
 public:
  SliceAgents(const Scenario& sc, int slice, std::vector<DistributedProgram> programs, const RanState& state)
      : sc_(sc), slice_(slice), programs_(std::move(programs)), groups_(channel_groups(sc, state, slice)) {}

  bool due(long tti, const RanState& state) const {
    return !solved_ || tti - last_solve_ >= sc_.reopt_period || current_users(state) != users_;
  }

  // Re-solves and appends fresh ledger entries to `ledger`.
  ConvergenceReport solve(long tti, const RanState& state, const GainView& gains, ExecutionMode mode,
                          std::vector<OverheadEntry>& ledger) {
    auto users = current_users(state);
    solved_ = true;
    last_solve_ = tti;
    alloc_.grants.clear();
    ConvergenceReport rep;
    bool any = std::any_of(users.begin(), users.end(), [](const auto& v) { return !v.empty(); });
    if (!any) {
      users_ = users;
      return rep;
    }
    RuntimeInputs in = slice_inputs(sc_, state, gains, slice_, users);
    std::vector<BoundProgram> bound;
    for (const auto& dp : programs_) bound.push_back(bind_runtime(dp, in));
    if (!ens_) {
      ens_.emplace(std::move(bound), sc_.seed * 1000003ULL + static_cast<std::uint64_t>(slice_));
    } else if (users != users_) {
      ens_->rebind(std::move(bound));
    }
    users_ = users;
    RunOptions opt;
    opt.mode = mode;
    rep = ens_->run_until_converged(opt);
    const auto& all = ens_->ledger();
    ledger.insert(ledger.end(), all.begin() + static_cast<std::ptrdiff_t>(seen_), all.end());
    seen_ = all.size();

    const double budget = state.slice_budget(slice_);
    for (const auto& la : ens_->allocations()) {
      for (std::size_t ui = 0; ui < la.users.size(); ++ui) {
        for (int k = 0; k < la.channels; ++k) {
          std::size_t idx = ui * la.channels + k;
          if (!la.y[idx] || la.p[idx] <= 0.0) continue;
          const PrbRange& g = groups_[k];
          double per_prb = la.p[idx] * budget / g.count;
          for (int n = g.first; n < g.first + g.count; ++n) alloc_.grants.push_back({la.owner, la.users[ui], n, per_prb});
        }
      }
    }
    return rep;
  }

  const Allocation& allocation() const { return alloc_; }

 private:
  std::vector<std::vector<int>> current_users(const RanState& state) const {
    std::vector<std::vector<int>> out;
    for (int b = 0; b < state.bs_count; ++b) out.push_back(state.users(b, slice_));
    return out;
  }

  const Scenario& sc_;
  int slice_;
  std::vector<DistributedProgram> programs_;
  std::vector<PrbRange> groups_;
  std::optional<Ensemble> ens_;
  std::vector<std::vector<int>> users_;
  bool solved_ = false;
  long last_solve_ = 0;
  std::size_t seen_ = 0;
  Allocation alloc_;
};

void write_overhead(std::ostream& os, const std::vector<OverheadEntry>& entries, int& round) {
  int prev = std::numeric_limits<int>::min();
  for (const auto& e : entries) {
    if (e.iteration != prev) {
      ++round;
      prev = e.iteration;
    }
    os << round << ',' << e.sender << ',' << e.values << ',' << e.bytes << '\n';
  }
}

}  // namespace

RunSummary run_experiment(const Scenario& sc, SchedulerKind kind, const RunSinks& sinks, ExecutionMode mode) {
  sc.engine.validate();
  RanState state = initial_state(sc);
  GainView gains = generate_gains(sc.channel);
  MetricsTracker tracker(state);
  RunSummary sum;
  sum.scheduler = kind;

  std::vector<SliceAgents> agents;
  if (kind == SchedulerKind::CellOS) {
    CompiledScenario compiled = compile_scenario(sc);
    for (std::size_t s = 0; s < compiled.programs.size(); ++s) {
      agents.emplace_back(sc, static_cast<int>(s), std::move(compiled.programs[s]), state);
    }
  }
  RoundRobinMemory rr;
  std::vector<double> pf_avg(state.ue_count(), 0.0);

  if (sinks.metrics_csv) MetricsTracker::write_header(*sinks.metrics_csv);
  if (sinks.overhead_csv) *sinks.overhead_csv << "iteration,sender,values,bytes\n";
  int round = 0;

  for (long t = 0; t < sc.tti_count; ++t) {
    Allocation alloc;
    if (state.any_backlogged()) {
      switch (kind) {
        case SchedulerKind::CellOS:
          for (auto& a : agents) {
            if (a.due(t, state)) {
              std::vector<OverheadEntry> fresh;
              auto rep = a.solve(t, state, gains, mode, fresh);
              sum.iterations += rep.iterations;
              ++sum.solves;
              for (const auto& e : fresh) {
                sum.total_overhead_values += e.values;
                sum.total_overhead_bytes += e.bytes;
              }
              if (sinks.overhead_csv) write_overhead(*sinks.overhead_csv, fresh, round);
            }
            const auto& g = a.allocation().grants;
            alloc.grants.insert(alloc.grants.end(), g.begin(), g.end());
          }
          break;
        case SchedulerKind::RoundRobin:
          alloc = round_robin(state, rr);
          break;
        case SchedulerKind::ProportionalFair:
          alloc = proportional_fair(state, gains, pf_avg);
          break;
        case SchedulerKind::Greedy:
          alloc = greedy(state, gains);
          break;
      }
    }
    TtiOutcome out = step_tti(state, alloc, gains);
    update_average(pf_avg, out, state.cfg.tti_s);
    tracker.add(out);
    if (sinks.metrics_csv) tracker.write_rows(*sinks.metrics_csv);
  }

  sum.ttis = tracker.ttis();
  sum.metrics = tracker.record();
  for (std::size_t s = 0; s < sc.slices.size(); ++s) {
    SliceSummary ss;
    ss.slice = static_cast<int>(s);
    bool first = true;
    for (int u : sc.slices[s].users) {
      double r = sum.metrics.user_throughput[u];
      ss.sum_throughput += r;
      ss.power_w += sum.metrics.user_power_w[u];
      ss.min_user_throughput = first ? r : std::min(ss.min_user_throughput, r);
      first = false;
    }
    sum.slices.push_back(ss);
  }
  return sum;
}

std::vector<SweepPoint> sweep_slices(const Scenario& sc, const std::vector<double>& shares, SchedulerKind kind,
                                     ExecutionMode mode) {
  if (sc.slices.size() != 2) throw SchemaViolation("a share sweep needs exactly two slices");
  std::vector<SweepPoint> out;
  for (double share : shares) {
    if (!(share > 0.0 && share < 1.0)) throw SchemaViolation("sweep share must lie in (0, 1)");
    Scenario point = sc;
    point.slices[0].share = share;
    point.slices[1].share = 1.0 - share;
    out.push_back({share, run_experiment(point, kind, {}, mode)});
  }
  return out;
}

}  // namespace cellos
