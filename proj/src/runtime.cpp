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
#include <limits>
#include <numbers>
#include <set>

#include "cellos/error.hpp"
#include "cellos/runtime.hpp"

namespace cellos {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMaxMatchings = 4096;
constexpr double kDivergenceGuard = 1e12;

std::vector<int> fixed_indices(const SymbolMeta& m) {
  std::vector<int> idx;
  for (const auto& ib : m.indices) idx.push_back(ib.arg.value);
  return idx;
}

bool satisfied(double lhs, Relation rel, double rhs) {
  double tol = 1e-9 * (1.0 + std::abs(rhs));
  switch (rel) {
    case Relation::Le: return lhs <= rhs + tol;
    case Relation::Ge: return lhs >= rhs - tol;
    case Relation::Eq: return std::abs(lhs - rhs) <= tol;
  }
  return false;
}

bool is_user_var(const std::vector<Quantifier>& qs, const std::string& var) {
  for (const auto& q : qs) {
    if (q.var != var) continue;
    auto k = q.domain.kind;
    return k == IndexDomain::Kind::ServedUsers || k == IndexDomain::Kind::ScopedUsers ||
           k == IndexDomain::Kind::AllUsers;
  }
  return false;
}

// Visits every quantifier assignment whose base-station index is the owner.
void for_each_assignment(const std::vector<Quantifier>& qs, Grounder& gr, int owner,
                         const std::function<void(const Grounder::Env&)>& visit) {
  Grounder::Env env;
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == qs.size()) {
      visit(env);
      return;
    }
    for (int v : gr.enumerate(qs[k].domain, env)) {
      if (qs[k].domain.kind == IndexDomain::Kind::BaseStations && v != owner) continue;
      env.emplace_back(qs[k].var, v);
      rec(k + 1);
      env.pop_back();
    }
  };
  rec(0);
}

}  // namespace

// ---------------------------------------------------------------------------

GainView::GainView(int bs_count, int ue_count, int channels)
    : bs_(bs_count), ues_(ue_count), channels_(channels),
      values_(static_cast<std::size_t>(bs_count) * ue_count * channels, kNaN) {}

void GainView::set(int b, int u, int n, double g) {
  if (b < 0 || b >= bs_ || u < 0 || u >= ues_ || n < 0 || n >= channels_) {
    throw InvalidNetwork("gain index out of range");
  }
  values_[(static_cast<std::size_t>(b) * ues_ + u) * channels_ + n] = g;
}

double GainView::get(int b, int u, int n) const {
  if (b < 0 || b >= bs_ || u < 0 || u >= ues_ || n < 0 || n >= channels_) return kNaN;
  return values_[(static_cast<std::size_t>(b) * ues_ + u) * channels_ + n];
}

// ---------------------------------------------------------------------------

BoundProgram bind_runtime(const DistributedProgram& dp, const RuntimeInputs& in) {
  if (dp.owner < 0 || dp.owner >= in.shape.bs_count()) {
    throw InvalidNetwork("program owner " + std::to_string(dp.owner) + " is not a base station of the shape");
  }
  if (in.shape.channels <= 0) throw InvalidNetwork("no channels to schedule");
  static const std::set<std::string> kSources = {family::kGain,      family::kNoise,    family::kBandwidth,
                                                 family::kRateFloor, family::kPowerCap, family::kPublished};
  for (const auto& name : dp.placeholder_manifest) {
    if (!kSources.count(name)) throw UnresolvedPlaceholder("no run-time source for " + name);
  }

  BoundProgram bp;
  bp.owner = dp.owner;
  bp.slice_id = dp.slice_id;
  bp.lagrangian = dp.lagrangian;
  bp.shape = in.shape;
  bp.users = in.shape.users_by_bs[dp.owner];
  bp.channels = in.shape.channels;
  bp.engine = dp.engine;
  bp.neighbors = dp.neighbors;

  SymbolTable templates = dp.symbols;
  FamilyDeclarer f(templates);
  SymbolId y_fam = f.assignment(), p_fam = f.power();
  Grounder gr(templates, bp.shape, bp.table);
  // The local solver maximizes; uncoupled programs keep the operator's direction.
  bp.objective = gr.ground(dp.direction == Direction::Minimize ? ex::neg(dp.objective) : dp.objective);

  const int me = dp.owner;
  for (int u : bp.users) {
    for (int n = 0; n < bp.channels; ++n) {
      PairSlot s;
      s.user = u;
      s.channel = n;
      s.y = gr.scalar(y_fam, {me, u, n});
      s.p = gr.scalar(p_fam, {me, u, n});
      if (dp.auxiliary) {
        s.aux = gr.scalar(templates.require(dp.auxiliary->family), {me, u, n});
        s.h = CompiledExpr(gr.ground(dp.auxiliary->h, {{"u", u}, {"n", n}}));
      }
      bp.pairs.push_back(std::move(s));
    }
  }

  bp.lambda.assign(bp.users.size(), std::nullopt);
  bp.lambda_step.assign(bp.users.size(), CompiledExpr{});
  bp.user_rate.assign(bp.users.size(), CompiledExpr{});
  auto user_slot = [&](int u) -> std::optional<std::size_t> {
    auto it = std::find(bp.users.begin(), bp.users.end(), u);
    if (it == bp.users.end()) return std::nullopt;
    return static_cast<std::size_t>(it - bp.users.begin());
  };

  for (const auto& rule : dp.update_rules) {
    SymbolId fam = templates.require(rule.multiplier);
    if (rule.multiplier == family::kRateMultiplier) {
      const Quantifier& q = rule.quantifiers.at(0);
      for (int u : gr.enumerate(q.domain, {})) {
        auto ui = user_slot(u);
        if (!ui) continue;
        bp.lambda[*ui] = gr.scalar(fam, {me, u});
        bp.lambda_step[*ui] = CompiledExpr(gr.ground(rule.subgradient, {{q.var, u}}));
      }
    } else if (rule.multiplier == family::kCouplingMultiplier) {
      for (std::size_t ui = 0; ui < bp.users.size(); ++ui) {
        for (int n = 0; n < bp.channels; ++n) {
          PairSlot& s = bp.pairs[bp.pair_index(ui, n)];
          s.mu = gr.scalar(fam, {me, bp.users[ui], n});
          s.mu_step = CompiledExpr(gr.ground(rule.subgradient, {{"u", bp.users[ui]}, {"n", n}}));
        }
      }
    } else {
      throw MalformedProgram("unknown multiplier family " + rule.multiplier);
    }
  }

  std::optional<Expr> floor_rhs, cap_rhs;
  for (const auto& c : dp.constraints) {
    switch (c.kind) {
      case ConstraintKind::MinRate: {
        for_each_assignment(c.quantifiers, gr, me, [&](const Grounder::Env& env) {
          for (const auto& [var, value] : env) {
            auto ui = user_slot(value);
            if (!ui || !is_user_var(c.quantifiers, var)) continue;
            bp.user_rate[*ui] = CompiledExpr(gr.ground(c.lhs, env));
          }
        });
        floor_rhs = gr.ground(c.rhs);
        break;
      }
      case ConstraintKind::PowerBudget:
        cap_rhs = gr.ground(c.rhs);
        ground_constraint(c, gr, bp.checks);
        break;
      case ConstraintKind::OneChannelPerUser:
      case ConstraintKind::OneUserPerChannel:
      case ConstraintKind::AuxiliaryBound:
        ground_constraint(c, gr, bp.checks);
        break;
      case ConstraintKind::AuxiliaryCoupling:
        throw MalformedProgram("auxiliary coupling must be relaxed, not enforced");
    }
  }
  if (!cap_rhs) throw MalformedProgram("program has no power budget");

  // Derivative tapes. Differentiation adds no symbols to the table.
  std::map<SymbolId, int> user_of_power;
  for (const auto& s : bp.pairs) user_of_power[s.p] = s.user;
  for (auto& s : bp.pairs) {
    Expr d1 = differentiate(bp.objective, s.p, &bp.table);
    Expr d2 = differentiate(d1, s.p, &bp.table);
    for (SymbolId v : free_symbols(d1)) {
      auto it = user_of_power.find(v);
      if (it != user_of_power.end() && it->second != s.user) bp.separable = false;
    }
    s.d1 = CompiledExpr(d1);
    s.d2 = CompiledExpr(d2);
  }
  bp.objective_tape = CompiledExpr(bp.objective);

  // Run-time values.
  bp.base.assign(bp.table.size(), 0.0);
  std::map<int, std::size_t> remote_of;
  for (const auto& m : bp.table.all()) {
    double& v = bp.base[m.id];
    if (m.family == family::kGain) {
      auto idx = fixed_indices(m);
      v = in.gains.get(idx[0], idx[1], idx[2]);
      if (!std::isfinite(v) || v < 0.0) throw UnresolvedPlaceholder("no channel gain for " + m.name);
    } else if (m.family == family::kNoise) {
      v = in.noise;
    } else if (m.family == family::kBandwidth) {
      v = in.bandwidth;
    } else if (m.family == family::kRateFloor) {
      if (in.rate_floor) {
        v = *in.rate_floor;
      } else if (m.value) {
        v = *m.value;
      } else {
        throw UnresolvedPlaceholder("no value for " + m.name);
      }
    } else if (m.family == family::kPowerCap) {
      if (in.power_cap) {
        v = *in.power_cap;
      } else if (m.value) {
        v = *m.value;
      } else {
        throw UnresolvedPlaceholder("no value for " + m.name);
      }
    } else if (m.family == family::kPublished) {
      auto idx = fixed_indices(m);
      int b = idx[0], u = idx[1], n = idx[2];
      if (b == me || b < 0 || b >= bp.shape.bs_count()) throw UnresolvedPlaceholder("no publisher for " + m.name);
      const auto& theirs = bp.shape.users_by_bs[b];
      auto pos = std::find(theirs.begin(), theirs.end(), u);
      if (pos == theirs.end()) throw UnresolvedPlaceholder("no publisher for " + m.name);
      if (!remote_of.count(b)) {
        remote_of[b] = bp.remotes.size();
        RemoteSlots r;
        r.bs = b;
        r.x.assign(theirs.size() * bp.channels, std::nullopt);
        bp.remotes.push_back(std::move(r));
      }
      bp.remotes[remote_of[b]].x[(pos - theirs.begin()) * bp.channels + n] = m.id;
    } else if (m.kind == SymbolKind::Variable || m.kind == SymbolKind::Multiplier) {
      if (m.owner && *m.owner != me) throw MalformedProgram(m.name + " belongs to another base station");
    } else if (m.value) {
      v = *m.value;
    } else {
      throw UnresolvedPlaceholder("no run-time source for " + m.name);
    }
  }
  std::sort(bp.remotes.begin(), bp.remotes.end(), [](const auto& a, const auto& b) { return a.bs < b.bs; });
  bp.power_cap = eval_dense(*cap_rhs, bp.base);
  if (!(bp.power_cap >= 0.0)) throw InvalidEngineConfig("negative power budget");
  if (floor_rhs) bp.rate_floor = eval_dense(*floor_rhs, bp.base);
  return bp;
}

// ---------------------------------------------------------------------------

MultiplierState MultiplierState::zero(const BoundProgram& bp) {
  MultiplierState ms;
  ms.users = bp.users;
  ms.channels = bp.channels;
  ms.lambda.assign(bp.users.size(), 0.0);
  ms.mu.assign(bp.pairs.size(), 0.0);
  ms.aux.assign(bp.pairs.size(), 0.0);
  return ms;
}

LocalAllocation LocalAllocation::empty(const BoundProgram& bp) {
  LocalAllocation a;
  a.owner = bp.owner;
  a.users = bp.users;
  a.channels = bp.channels;
  a.y.assign(bp.pairs.size(), 0);
  a.p.assign(bp.pairs.size(), 0.0);
  return a;
}

double LocalAllocation::total_power() const {
  double s = 0.0;
  for (double v : p) s += v;
  return s;
}

std::vector<int> LocalAllocation::matching() const {
  std::vector<int> m(users.size(), -1);
  for (std::size_t ui = 0; ui < users.size(); ++ui) {
    for (int n = 0; n < channels; ++n) {
      if (y[ui * channels + n]) m[ui] = n;
    }
  }
  return m;
}

std::vector<double> waterfill(std::span<const double> weights, std::span<const double> floors, double budget) {
  const std::size_t k = weights.size();
  std::vector<double> p(k, 0.0);
  auto fill = [&](double nu) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = weights[j] > 0.0 ? std::max(0.0, weights[j] / (std::numbers::ln2 * nu) - floors[j]) : 0.0;
      s += p[j];
    }
    return s;
  };
  double lo = 0.0, hi = 1.0;
  while (fill(hi) > budget) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == 0.0 || fill(mid) > budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  fill(hi);
  return p;
}

// ---------------------------------------------------------------------------
// Inner solve.

namespace {

class InnerSolver {
 public:
  InnerSolver(const BoundProgram& bp, std::span<const double> values, bool enforce, double target)
      : bp_(bp), w_(values.begin(), values.end()), enforce_(enforce), target_(target) {}

  // Power allocation for a matching (channel per user or -1). Returns the
  // objective, -inf when infeasible.
  double solve(const std::vector<int>& match, std::vector<double>& powers) {
    reset();
    active_.clear();
    lo_.clear();
    for (std::size_t ui = 0; ui < match.size(); ++ui) {
      bool needs_rate = enforce_ && !bp_.user_rate[ui].empty();
      if (match[ui] < 0) {
        if (needs_rate && target_ > 0.0) return -kInf;
        continue;
      }
      std::size_t k = bp_.pair_index(ui, match[ui]);
      active_.push_back(k);
      w_[bp_.pairs[k].y] = 1.0;
      double lo = 0.0;
      if (needs_rate && target_ > 0.0) {
        auto m = min_power(ui, k);
        if (!m) return -kInf;
        lo = *m;
      }
      lo_.push_back(lo);
    }
    double lo_sum = 0.0;
    for (double v : lo_) lo_sum += v;
    const double budget = bp_.power_cap;
    if (lo_sum > budget * (1.0 + 1e-12)) return -kInf;
    cap_.clear();
    for (std::size_t j = 0; j < active_.size(); ++j) {
      cap_.push_back(std::max(lo_[j], budget - (lo_sum - lo_[j])));
      set_p(j, lo_[j]);
    }

    if (!active_.empty()) {
      allocate(budget);
      clamp(budget);
    }
    powers.assign(bp_.pairs.size(), 0.0);
    for (std::size_t j = 0; j < active_.size(); ++j) powers[active_[j]] = w_[bp_.pairs[active_[j]].p];
    double v = bp_.objective_tape.eval_extended(w_);
    return std::isnan(v) ? -kInf : v;
  }

  std::span<const double> values() const { return w_; }

 private:
  void reset() {
    for (const auto& s : bp_.pairs) {
      w_[s.y] = 0.0;
      w_[s.p] = 0.0;
    }
  }

  void set_p(std::size_t j, double v) { w_[bp_.pairs[active_[j]].p] = v; }
  double get_p(std::size_t j) const { return w_[bp_.pairs[active_[j]].p]; }

  // Smallest power on pair k meeting the rate target of user ui.
  std::optional<double> min_power(std::size_t ui, std::size_t k) {
    const auto& rate = bp_.user_rate[ui];
    SymbolId p = bp_.pairs[k].p;
    double hi = bp_.power_cap;
    w_[p] = hi;
    if (!(rate.eval_extended(w_) >= target_)) {
      w_[p] = 0.0;
      return std::nullopt;
    }
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
      double mid = 0.5 * (lo + hi);
      w_[p] = mid;
      if (rate.eval_extended(w_) >= target_) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    w_[p] = 0.0;
    return hi;
  }

  double slope(std::size_t j) const {
    double g = bp_.pairs[active_[j]].d1.eval_extended(w_);
    return std::isnan(g) ? kInf : g;
  }

  // argmax over [lo, cap] of f(p) - nu p for pair j, other powers fixed.
  double best_response(std::size_t j, double nu) {
    double a = lo_[j], b = cap_[j];
    set_p(j, a);
    if (slope(j) - nu <= 0.0) return a;
    set_p(j, b);
    if (slope(j) - nu >= 0.0) return b;
    double x = 0.5 * (a + b);
    for (int it = 0; it < 100; ++it) {
      set_p(j, x);
      double g = slope(j) - nu;
      if (g > 0.0) {
        a = x;
      } else {
        b = x;
      }
      if (g == 0.0 || b - a <= 1e-15 * (1.0 + b)) break;
      double d = bp_.pairs[active_[j]].d2.eval_extended(w_);
      double next = (d < 0.0 && std::isfinite(d)) ? x - g / d : 0.5 * (a + b);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - x) <= 1e-15 * (1.0 + x)) {
        x = next;
        break;
      }
      x = next;
    }
    return x;
  }

  // Sets all active powers to their responses at price nu; returns the sum.
  double respond(double nu) {
    const int sweeps = bp_.separable ? 1 : 200;
    for (int s = 0; s < sweeps; ++s) {
      double change = 0.0;
      for (std::size_t j = 0; j < active_.size(); ++j) {
        double before = get_p(j);
        double v = best_response(j, nu);
        set_p(j, v);
        change = std::max(change, std::abs(v - before));
      }
      if (change <= 1e-13) break;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < active_.size(); ++j) total += get_p(j);
    return total;
  }

  std::vector<double> snapshot() const {
    std::vector<double> out;
    for (std::size_t j = 0; j < active_.size(); ++j) out.push_back(get_p(j));
    return out;
  }

  // Scales powers above their floors so the budget holds exactly.
  void clamp(double budget) {
    double total = 0.0, floors = 0.0;
    for (std::size_t j = 0; j < active_.size(); ++j) {
      total += get_p(j);
      floors += lo_[j];
    }
    if (total <= budget || total <= floors) return;
    double f = std::max(0.0, (budget - floors) / (total - floors)) * (1.0 - 1e-15);
    for (std::size_t j = 0; j < active_.size(); ++j) set_p(j, lo_[j] + f * (get_p(j) - lo_[j]));
  }

  // KKT price search on the power budget.
  void allocate(double budget) {
    double tol = 1e-12 * (1.0 + budget);
    if (respond(0.0) <= budget + tol) return;
    double lo = 0.0, hi = 1.0;
    int grow = 0;
    while (respond(hi) > budget + tol) {
      hi *= 2.0;
      if (++grow > 2000) throw NumericalDivergence("no price meets the power budget");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      double mid = 0.5 * (lo + hi);
      if (respond(mid) > budget + tol) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    double s_lo = respond(lo);
    std::vector<double> p_lo = snapshot();
    double s_hi = respond(hi);
    // Linear pieces make the response jump at the optimal price; mix the two
    // responses so the budget binds.
    double leftover = budget - s_hi;
    if (leftover > tol && s_lo > s_hi) {
      double t = std::min(1.0, leftover / (s_lo - s_hi));
      for (std::size_t j = 0; j < active_.size(); ++j) set_p(j, get_p(j) + t * (p_lo[j] - get_p(j)));
    }
  }

  const BoundProgram& bp_;
  std::vector<double> w_;
  bool enforce_;
  double target_;
  std::vector<std::size_t> active_;
  std::vector<double> lo_, cap_;
};

std::size_t matching_count(std::size_t users, std::size_t channels, bool full) {
  // sum over k scheduled users of C(users, k) * channels! / (channels - k)!
  double total = 0.0;
  for (std::size_t k = full ? users : 0; k <= std::min(users, channels); ++k) {
    double c = 1.0;
    for (std::size_t j = 0; j < k; ++j) c *= static_cast<double>(users - j) / static_cast<double>(j + 1);
    for (std::size_t j = 0; j < k; ++j) c *= static_cast<double>(channels - j);
    total += c;
    if (total > 1e18) break;
  }
  return total > 1e18 ? static_cast<std::size_t>(-1) : static_cast<std::size_t>(total);
}

void enumerate_matchings(std::size_t ui, std::size_t users, int channels, bool full, std::vector<int>& cur,
                         std::vector<bool>& used, const std::function<void(const std::vector<int>&)>& visit) {
  if (ui == users) {
    visit(cur);
    return;
  }
  if (!full) {
    cur[ui] = -1;
    enumerate_matchings(ui + 1, users, channels, full, cur, used, visit);
  }
  for (int n = 0; n < channels; ++n) {
    if (used[n]) continue;
    used[n] = true;
    cur[ui] = n;
    enumerate_matchings(ui + 1, users, channels, full, cur, used, visit);
    used[n] = false;
  }
  cur[ui] = -1;
}

void write_allocation(const BoundProgram& bp, const std::vector<int>& match, const std::vector<double>& powers,
                      LocalAllocation& out) {
  out = LocalAllocation::empty(bp);
  for (std::size_t ui = 0; ui < match.size(); ++ui) {
    if (match[ui] < 0) continue;
    std::size_t k = bp.pair_index(ui, match[ui]);
    out.y[k] = 1;
    out.p[k] = powers[k];
  }
}

bool better(double v, double best) { return v > best + 1e-12 * (1.0 + std::abs(best)) || (best == -kInf && v > best); }

}  // namespace

double solve_inner(const BoundProgram& bp, std::span<const double> values, bool enforce_rate, double rate_target,
                   const std::optional<std::vector<int>>& keep_matching, LocalAllocation& out) {
  InnerSolver solver(bp, values, enforce_rate, rate_target);
  const std::size_t users = bp.users.size();
  std::vector<double> powers;
  double best = -kInf;
  std::vector<int> best_match(users, -1);
  std::vector<double> best_powers(bp.pairs.size(), 0.0);

  auto consider = [&](const std::vector<int>& m) {
    double v = solver.solve(m, powers);
    if (better(v, best)) {
      best = v;
      best_match = m;
      best_powers = powers;
    }
  };

  bool full = false;
  if (enforce_rate && rate_target > 0.0) {
    full = std::all_of(bp.user_rate.begin(), bp.user_rate.end(), [](const CompiledExpr& e) { return !e.empty(); });
  }
  if (keep_matching) {
    consider(*keep_matching);
  } else if (matching_count(users, bp.channels, full) <= kMaxMatchings) {
    std::vector<int> cur(users, -1);
    std::vector<bool> used(bp.channels, false);
    enumerate_matchings(0, users, bp.channels, full, cur, used, consider);
  } else {
    // Greedy: add the (user, channel) pair with the best objective until no
    // addition improves it.
    std::vector<int> cur(users, -1);
    consider(cur);
    for (;;) {
      std::vector<int> step_best;
      double step_value = best;
      for (std::size_t ui = 0; ui < users; ++ui) {
        if (cur[ui] >= 0) continue;
        for (int n = 0; n < bp.channels; ++n) {
          if (std::find(cur.begin(), cur.end(), n) != cur.end()) continue;
          auto m = cur;
          m[ui] = n;
          double v = solver.solve(m, powers);
          if (better(v, step_value)) {
            step_value = v;
            step_best = m;
          }
        }
      }
      if (step_best.empty()) break;
      cur = step_best;
      consider(cur);
    }
    if (full && std::find(best_match.begin(), best_match.end(), -1) != best_match.end()) best = -kInf;
  }
  write_allocation(bp, best_match, best_powers, out);
  return best;
}

namespace {

std::vector<double> bind_state(const BoundProgram& bp, const MultiplierState& ms) {
  std::vector<double> w = bp.base;
  for (std::size_t ui = 0; ui < bp.users.size(); ++ui) {
    if (bp.lambda[ui]) w[*bp.lambda[ui]] = ms.lambda[ui];
  }
  for (std::size_t k = 0; k < bp.pairs.size(); ++k) {
    if (bp.pairs[k].mu) w[*bp.pairs[k].mu] = ms.mu[k];
    if (bp.pairs[k].aux) w[*bp.pairs[k].aux] = ms.aux[k];
  }
  return w;
}

void apply_allocation(const BoundProgram& bp, const LocalAllocation& a, std::vector<double>& w) {
  for (std::size_t k = 0; k < bp.pairs.size(); ++k) {
    w[bp.pairs[k].y] = a.y[k];
    w[bp.pairs[k].p] = a.p[k];
  }
}

void apply_inbox(const BoundProgram& bp, const Inbox& inbox, int iteration, std::vector<double>& w) {
  for (const auto& r : bp.remotes) {
    auto it = inbox.find(r.bs);
    if (it == inbox.end()) {
      if (iteration >= 2) {
        throw InboxIncomplete("no publication from base station " + std::to_string(r.bs) + " for iteration " +
                              std::to_string(iteration - 1));
      }
      continue;
    }
    const X2Message& msg = it->second;
    if (iteration >= 2 && static_cast<int>(msg.iteration) != iteration - 1) {
      throw InboxIncomplete("publication of base station " + std::to_string(r.bs) + " is from iteration " +
                            std::to_string(msg.iteration) + ", expected " + std::to_string(iteration - 1));
    }
    std::size_t their_users = bp.shape.users_by_bs[r.bs].size();
    if (msg.payload.size() != their_users * (bp.channels + 1)) {
      throw MalformedMessage("publication of base station " + std::to_string(r.bs) + " has " +
                             std::to_string(msg.payload.size()) + " values");
    }
    for (std::size_t j = 0; j < r.x.size(); ++j) {
      if (r.x[j]) w[*r.x[j]] = msg.payload[j];
    }
  }
}

}  // namespace

X2Message publication(const BoundProgram& bp, const LocalAllocation& alloc, const MultiplierState& ms,
                      std::uint32_t iteration) {
  X2Message msg;
  msg.sender = static_cast<std::uint16_t>(bp.owner);
  msg.iteration = iteration;
  msg.payload.reserve(bp.users.size() * (bp.channels + 1));
  for (std::size_t k = 0; k < bp.pairs.size(); ++k) {
    msg.payload.push_back(static_cast<float>(alloc.y[k] ? alloc.p[k] : 0.0));
  }
  for (std::size_t ui = 0; ui < bp.users.size(); ++ui) {
    msg.payload.push_back(static_cast<float>(bp.lambda[ui] ? ms.lambda[ui] : 0.0));
  }
  return msg;
}

IterationResult local_solve_iteration(const BoundProgram& bp, const MultiplierState& ms, const Inbox& inbox,
                                      const LocalAllocation& previous, std::mt19937_64& rng) {
  IterationResult r;
  r.state = ms;
  const int k = ms.iteration + 1;
  std::vector<double> w = bind_state(bp, ms);
  apply_inbox(bp, inbox, k, w);

  // Interference estimates from the stale publications.
  for (std::size_t j = 0; j < bp.pairs.size(); ++j) {
    const PairSlot& s = bp.pairs[j];
    if (!s.aux) continue;
    double h = s.h.eval_extended(w);
    r.state.aux[j] = std::max(0.0, h);
    w[*s.aux] = r.state.aux[j];
  }

  bool enforce = bp.rate_floor.has_value();
  double target = enforce ? *bp.rate_floor * (1.0 + bp.engine.rate_margin) : 0.0;
  double value = solve_inner(bp, w, enforce, target, std::nullopt, r.allocation);
  if (value == -kInf && enforce) {
    enforce = false;
    value = solve_inner(bp, w, false, 0.0, std::nullopt, r.allocation);
  }

  // Hysteresis: the previous matching stays while it is within epsilon of the
  // best response. Past the warm-up, real improvements are adopted with
  // probability inertia_switch / sqrt(k - warmup), which breaks synchronous
  // best-response cycles and lets the matchings settle.
  if (previous.users == bp.users && previous.channels == bp.channels) {
    auto prev = previous.matching();
    if (prev != r.allocation.matching()) {
      LocalAllocation kept;
      double v = solve_inner(bp, w, enforce, target, prev, kept);
      bool close = v > -kInf && v >= value - bp.engine.epsilon * std::max(1.0, std::abs(value));
      bool hold = close;
      if (!hold && v > -kInf && k > bp.engine.inertia_warmup) {
        double since = static_cast<double>(k - bp.engine.inertia_warmup);
        std::bernoulli_distribution adopt(bp.engine.inertia_switch / std::sqrt(since));
        hold = !adopt(rng);
      }
      if (hold) {
        r.allocation = std::move(kept);
        value = v;
      }
    }
  }

  apply_allocation(bp, r.allocation, w);
  for (const auto& c : bp.checks) {
    if (!satisfied(eval_dense(c.lhs, w), c.relation, eval_dense(c.rhs, w))) {
      throw InvariantViolation("local allocation violates " + c.label);
    }
  }
  r.objective = bp.objective_tape.eval_extended(w);
  if (std::isnan(r.objective) || (std::isfinite(r.objective) && std::abs(r.objective) > kDivergenceGuard)) {
    throw NumericalDivergence("local objective of base station " + std::to_string(bp.owner) + " is " +
                              std::to_string(r.objective));
  }
  (void)value;

  // Projected subgradient steps.
  const double step = bp.engine.alpha / std::sqrt(static_cast<double>(k));
  for (std::size_t ui = 0; ui < bp.users.size(); ++ui) {
    if (!bp.lambda[ui]) continue;
    double g = bp.lambda_step[ui].eval_extended(w);
    if (std::isfinite(g)) r.state.lambda[ui] = std::max(0.0, r.state.lambda[ui] + step * g);
  }
  for (std::size_t j = 0; j < bp.pairs.size(); ++j) {
    if (!bp.pairs[j].mu) continue;
    double g = bp.pairs[j].mu_step.eval_extended(w);
    if (std::isfinite(g)) r.state.mu[j] = std::max(0.0, r.state.mu[j] + step * g);
  }
  r.state.iteration = k;
  r.message = publication(bp, r.allocation, r.state, static_cast<std::uint32_t>(k));
  return r;
}

double dual_value(const BoundProgram& bp, const MultiplierState& ms) {
  for (double m : ms.mu) {
    if (m > 0.0) return kInf;  // the supremum over i is unbounded
  }
  std::vector<double> w = bind_state(bp, ms);
  for (const auto& s : bp.pairs) {
    if (s.aux) w[*s.aux] = 0.0;
  }
  LocalAllocation scratch;
  if (bp.lagrangian && !bp.lambda.empty() &&
      std::any_of(bp.lambda.begin(), bp.lambda.end(), [](const auto& l) { return l.has_value(); })) {
    return solve_inner(bp, w, false, 0.0, std::nullopt, scratch);
  }
  // Constraints that are not priced stay hard.
  bool enforce = bp.rate_floor.has_value();
  return solve_inner(bp, w, enforce, enforce ? *bp.rate_floor : 0.0, std::nullopt, scratch);
}

double local_objective(const BoundProgram& bp, const MultiplierState& ms, const LocalAllocation& alloc) {
  std::vector<double> w = bind_state(bp, ms);
  apply_allocation(bp, alloc, w);
  return bp.objective_tape.eval_extended(w);
}

}  // namespace cellos
