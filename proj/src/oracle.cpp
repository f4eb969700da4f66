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

#include "cellos/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "cellos/error.hpp"

namespace cellos {

const char* to_string(OracleObjective o) {
  switch (o) {
    case OracleObjective::MaxRate: return "max-rate";
    case OracleObjective::SumLogRate: return "sum-log-rate";
    case OracleObjective::MinPower: return "min-power";
  }
  return "?";
}

OracleObjective parse_oracle_objective(const std::string& s) {
  for (auto o : {OracleObjective::MaxRate, OracleObjective::SumLogRate, OracleObjective::MinPower}) {
    if (s == to_string(o)) return o;
  }
  throw SchemaViolation("unknown oracle objective " + s);
}

const char* objective_sentence(OracleObjective o) {
  switch (o) {
    case OracleObjective::MaxRate: return "max(rate)";
    case OracleObjective::SumLogRate: return "max(sum(log(rate)))";
    case OracleObjective::MinPower: return "min(power)";
  }
  return "";
}

bool maximizes(OracleObjective o) { return o != OracleObjective::MinPower; }

PowerPlan::PowerPlan(const Shape& shape)
    : bs_(shape.bs_count()),
      ues_(0),
      channels_(shape.channels) {
  for (const auto& us : shape.users_by_bs) {
    for (int u : us) ues_ = std::max(ues_, u + 1);
  }
  p_.assign(static_cast<std::size_t>(bs_) * ues_ * channels_, 0.0);
}

double PowerPlan::get(int b, int u, int n) const { return p_[(static_cast<std::size_t>(b) * ues_ + u) * channels_ + n]; }

void PowerPlan::set(int b, int u, int n, double p) { p_[(static_cast<std::size_t>(b) * ues_ + u) * channels_ + n] = p; }

double PowerPlan::total_power() const {
  double s = 0.0;
  for (double v : p_) s += v;
  return s;
}

PowerPlan plan_from(const Shape& shape, const std::vector<LocalAllocation>& allocations) {
  PowerPlan plan(shape);
  for (const auto& a : allocations) {
    for (std::size_t ui = 0; ui < a.users.size(); ++ui) {
      for (int n = 0; n < a.channels; ++n) {
        std::size_t k = ui * a.channels + n;
        if (a.y[k]) plan.set(a.owner, a.users[ui], n, a.p[k]);
      }
    }
  }
  return plan;
}

std::vector<double> user_rates(const OracleInstance& inst, const PowerPlan& plan) {
  const Shape& s = inst.shape;
  std::vector<double> rates(plan.ue_count(), 0.0);
  std::vector<double> load(static_cast<std::size_t>(s.bs_count()) * s.channels, 0.0);
  for (int b = 0; b < s.bs_count(); ++b) {
    for (int u : s.users_by_bs[b]) {
      for (int n = 0; n < s.channels; ++n) load[b * s.channels + n] += plan.get(b, u, n);
    }
  }
  for (int b = 0; b < s.bs_count(); ++b) {
    for (int u : s.users_by_bs[b]) {
      for (int n = 0; n < s.channels; ++n) {
        double p = plan.get(b, u, n);
        if (p <= 0.0) continue;
        double interference = 0.0;
        for (int o = 0; o < s.bs_count(); ++o) {
          if (o != b) interference += inst.gains.get(o, u, n) * load[o * s.channels + n];
        }
        rates[u] += inst.bandwidth * std::log2(1.0 + inst.gains.get(b, u, n) * p / (inst.noise + interference));
      }
    }
  }
  return rates;
}

double objective_value(const OracleInstance& inst, OracleObjective obj, const PowerPlan& plan) {
  switch (obj) {
    case OracleObjective::MaxRate: {
      double s = 0.0;
      for (double r : user_rates(inst, plan)) s += r;
      return s;
    }
    case OracleObjective::SumLogRate: {
      auto rates = user_rates(inst, plan);
      double s = 0.0;
      for (const auto& us : inst.shape.users_by_bs) {
        for (int u : us) s += std::log(rates[u]);
      }
      return s;
    }
    case OracleObjective::MinPower: return plan.total_power();
  }
  return 0.0;
}

bool is_feasible(const OracleInstance& inst, const PowerPlan& plan, double tol) {
  const Shape& s = inst.shape;
  auto rates = user_rates(inst, plan);
  for (int b = 0; b < s.bs_count(); ++b) {
    double total = 0.0;
    std::vector<int> per_channel(s.channels, 0);
    for (int u : s.users_by_bs[b]) {
      int used = 0;
      for (int n = 0; n < s.channels; ++n) {
        double p = plan.get(b, u, n);
        if (p < 0.0) return false;
        if (p > 0.0) {
          ++used;
          ++per_channel[n];
        }
        total += p;
      }
      if (used > 1) return false;
      if (inst.rate_floor && rates[u] < *inst.rate_floor * (1.0 - tol) - tol) return false;
    }
    for (int c : per_channel) {
      if (c > 1) return false;
    }
    if (total > inst.power_cap * (1.0 + tol) + tol) return false;
  }
  return true;
}

namespace {

struct Option {
  std::vector<std::pair<int, int>> pairs;  // (user, channel)
  std::vector<double> powers;
};

// Every assignment of one base station paired with grid powers within budget.
std::vector<Option> options_for(const OracleInstance& inst, int b, const std::vector<double>& levels) {
  const auto& users = inst.shape.users_by_bs[b];
  const int channels = inst.shape.channels;
  std::vector<Option> out;
  std::vector<int> match(users.size(), -1);
  std::function<void(std::size_t)> assign = [&](std::size_t ui) {
    if (ui == users.size()) {
      Option base;
      for (std::size_t k = 0; k < users.size(); ++k) {
        if (match[k] >= 0) base.pairs.emplace_back(users[k], match[k]);
      }
      if (!base.pairs.empty() && levels.empty()) return;
      std::vector<std::size_t> pick(base.pairs.size(), 0);
      for (;;) {
        Option o = base;
        double total = 0.0;
        for (std::size_t k = 0; k < pick.size(); ++k) {
          o.powers.push_back(levels[pick[k]]);
          total += levels[pick[k]];
        }
        if (total <= inst.power_cap * (1.0 + 1e-12)) out.push_back(std::move(o));
        std::size_t k = 0;
        while (k < pick.size() && ++pick[k] == levels.size()) pick[k++] = 0;
        if (k == pick.size()) break;
      }
      return;
    }
    match[ui] = -1;
    assign(ui + 1);
    for (int n = 0; n < channels; ++n) {
      if (std::find(match.begin(), match.begin() + ui, n) != match.begin() + ui) continue;
      match[ui] = n;
      assign(ui + 1);
    }
    match[ui] = -1;
  };
  assign(0);
  return out;
}

struct Best {
  bool found = false;
  double score = -std::numeric_limits<double>::infinity();  // larger is better
  std::uint64_t index = 0;
  PowerPlan plan;
};

}  // namespace

OracleResult brute_force_solve(const OracleInstance& inst, OracleObjective obj, unsigned threads) {
  const Shape& s = inst.shape;
  if (s.bs_count() < 1 || s.bs_count() > kOracleMaxBs) throw BudgetExceeded("oracle supports 1 to 3 base stations");
  if (s.channels < 1 || s.channels > kOracleMaxChannels) throw BudgetExceeded("oracle supports 1 to 3 channels");
  for (const auto& us : s.users_by_bs) {
    if (us.size() > kOracleMaxUsersPerBs) throw BudgetExceeded("oracle supports at most 3 users per base station");
  }
  std::vector<double> levels;
  for (double l : inst.power_levels) {
    if (l > 0.0) levels.push_back(l);
  }
  if (inst.power_levels.size() > kOracleMaxLevels) throw BudgetExceeded("oracle supports at most 6 power levels");

  std::vector<std::vector<Option>> per_bs;
  double combos = 1.0;
  for (int b = 0; b < s.bs_count(); ++b) {
    per_bs.push_back(options_for(inst, b, levels));
    combos *= static_cast<double>(per_bs.back().size());
  }
  if (combos > kOracleMaxCombinations) {
    throw BudgetExceeded("oracle would enumerate " + std::to_string(static_cast<std::uint64_t>(combos)) +
                         " combinations");
  }
  const std::uint64_t total = static_cast<std::uint64_t>(combos);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, total)));

  auto search = [&](std::uint64_t from, std::uint64_t to, Best& best) {
    PowerPlan plan(s);
    std::vector<std::size_t> digit(per_bs.size());
    for (std::uint64_t idx = from; idx < to; ++idx) {
      std::uint64_t rest = idx;
      for (std::size_t b = 0; b < per_bs.size(); ++b) {
        digit[b] = rest % per_bs[b].size();
        rest /= per_bs[b].size();
      }
      plan = PowerPlan(s);
      for (std::size_t b = 0; b < per_bs.size(); ++b) {
        const Option& o = per_bs[b][digit[b]];
        for (std::size_t k = 0; k < o.pairs.size(); ++k) {
          plan.set(static_cast<int>(b), o.pairs[k].first, o.pairs[k].second, o.powers[k]);
        }
      }
      if (inst.rate_floor) {
        auto rates = user_rates(inst, plan);
        bool ok = true;
        for (const auto& us : s.users_by_bs) {
          for (int u : us) ok = ok && rates[u] >= *inst.rate_floor - 1e-12;
        }
        if (!ok) continue;
      }
      double v = objective_value(inst, obj, plan);
      if (std::isnan(v)) continue;
      double score = maximizes(obj) ? v : -v;
      if (!best.found || score > best.score) {
        best.found = true;
        best.score = score;
        best.index = idx;
        best.plan = plan;
      }
    }
  };

  std::vector<Best> partial(threads);
  if (threads == 1) {
    search(0, total, partial[0]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      std::uint64_t from = total * t / threads, to = total * (t + 1) / threads;
      pool.emplace_back([&, t, from, to] { search(from, to, partial[t]); });
    }
    for (auto& th : pool) th.join();
  }
  Best best;
  for (auto& p : partial) {
    if (p.found && (!best.found || p.score > best.score || (p.score == best.score && p.index < best.index))) {
      best = std::move(p);
    }
  }
  OracleResult r;
  r.combinations = total;
  r.feasible = best.found && std::isfinite(best.score);
  if (best.found) {
    r.value = maximizes(obj) ? best.score : -best.score;
    r.plan = std::move(best.plan);
  } else {
    r.plan = PowerPlan(s);
  }
  return r;
}

double grid_slack(const OracleInstance& inst, OracleObjective obj, const PowerPlan& plan) {
  std::vector<double> levels = inst.power_levels;
  std::sort(levels.begin(), levels.end());
  double step = 0.0;
  for (std::size_t k = 1; k < levels.size(); ++k) step = std::max(step, levels[k] - levels[k - 1]);
  const double base = objective_value(inst, obj, plan);
  double slack = 0.0;
  const Shape& s = inst.shape;
  for (int b = 0; b < s.bs_count(); ++b) {
    for (int u : s.users_by_bs[b]) {
      for (int n = 0; n < s.channels; ++n) {
        double p = plan.get(b, u, n);
        if (p <= 0.0) continue;
        for (double d : {-step, step}) {
          PowerPlan q = plan;
          q.set(b, u, n, std::max(0.0, p + d));
          double v = objective_value(inst, obj, q);
          if (std::isfinite(v)) slack = std::max(slack, std::abs(v - base));
        }
      }
    }
  }
  return slack;
}

OracleInstance toy_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(1, 2);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi), dist(10.0, 50.0);
  std::exponential_distribution<double> fading(1.0);
  const double bs_x[2] = {0.0, 60.0};

  OracleInstance inst;
  inst.shape.channels = 2;
  std::vector<std::pair<double, double>> pos;
  int next = 0;
  for (int b = 0; b < 2; ++b) {
    int k = count(rng);
    std::vector<int> users;
    for (int j = 0; j < k; ++j) users.push_back(next++);
    inst.shape.users_by_bs.push_back(users);
  }
  for (int b = 0; b < 2; ++b) {
    for (std::size_t j = 0; j < inst.shape.users_by_bs[b].size(); ++j) {
      double a = angle(rng), d = dist(rng);
      pos.emplace_back(bs_x[b] + d * std::cos(a), d * std::sin(a));
    }
  }
  inst.gains = GainView(2, next, 2);
  for (int b = 0; b < 2; ++b) {
    for (int u = 0; u < next; ++u) {
      double d = std::hypot(pos[u].first - bs_x[b], pos[u].second);
      for (int n = 0; n < 2; ++n) inst.gains.set(b, u, n, std::pow(d / 10.0, -3.0) * fading(rng));
    }
  }
  inst.noise = 0.01;
  inst.bandwidth = 1.0;
  inst.power_cap = 1.0;
  inst.rate_floor = 0.5;
  inst.power_levels = {0.0, 0.25, 0.5, 0.75, 1.0};
  return inst;
}

std::vector<std::uint64_t> feasible_toy_seeds(std::size_t count) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t seed = 0; seeds.size() < count; ++seed) {
    if (brute_force_solve(toy_instance(seed), OracleObjective::MinPower).feasible) seeds.push_back(seed);
    if (seed > 100 * count + 1000) throw BudgetExceeded("too few feasible toy instances");
  }
  return seeds;
}

}  // namespace cellos
