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
#include <condition_variable>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "cellos/error.hpp"
#include "cellos/runtime.hpp"

namespace cellos {

namespace {

// Reusable barrier whose waits fail with BarrierTimeout.
class TimedBarrier {
 public:
  TimedBarrier(std::size_t parties, std::chrono::milliseconds timeout) : parties_(parties), timeout_(timeout) {}

  // Returns false when the barrier was aborted.
  bool arrive_and_wait() {
    std::unique_lock lock(mu_);
    if (aborted_) return false;
    std::size_t gen = generation_;
    if (++arrived_ == parties_) {
      arrived_ = 0;
      ++generation_;
      cv_.notify_all();
      return true;
    }
    auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (gen == generation_ && !aborted_) {
      if (cv_.wait_until(lock, deadline) == std::cv_status::timeout && gen == generation_ && !aborted_) {
        aborted_ = true;
        cv_.notify_all();
        throw BarrierTimeout("agents did not reach the iteration barrier within " + std::to_string(timeout_.count()) +
                             " ms");
      }
    }
    return gen != generation_;
  }

  void abort() {
    std::lock_guard lock(mu_);
    aborted_ = true;
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t parties_;
  std::chrono::milliseconds timeout_;
  std::size_t arrived_ = 0;
  std::size_t generation_ = 0;
  bool aborted_ = false;
};

double relative_change(double now, double before) {
  if (now == before) return 0.0;
  if (!std::isfinite(now) || !std::isfinite(before)) return std::numeric_limits<double>::infinity();
  return std::abs(now - before) / std::max(1.0, std::abs(before));
}

std::uint64_t agent_seed(std::uint64_t seed, const BoundProgram& bp) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(bp.owner), static_cast<std::uint32_t>(bp.slice_id)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

Agent::Agent(BoundProgram bp, std::uint64_t seed) : bp_(std::move(bp)), rng_(agent_seed(seed, bp_)) {
  ms_ = MultiplierState::zero(bp_);
  alloc_ = LocalAllocation::empty(bp_);
  outbox_ = publication(bp_, alloc_, ms_, 0);
}

void Agent::step() {
  IterationResult r = local_solve_iteration(bp_, ms_, inbox_, alloc_, rng_);
  alloc_ = std::move(r.allocation);
  ms_ = std::move(r.state);
  objective_ = r.objective;
  outbox_ = std::move(r.message);
}

void Agent::rebind(BoundProgram bp) {
  MultiplierState ms = MultiplierState::zero(bp);
  LocalAllocation alloc = LocalAllocation::empty(bp);
  for (std::size_t ui = 0; ui < bp.users.size(); ++ui) {
    auto it = std::find(ms_.users.begin(), ms_.users.end(), bp.users[ui]);
    if (it == ms_.users.end()) continue;
    std::size_t old = it - ms_.users.begin();
    ms.lambda[ui] = ms_.lambda[old];
    if (bp.channels != ms_.channels) continue;
    for (int n = 0; n < bp.channels; ++n) {
      ms.mu[bp.pair_index(ui, n)] = ms_.mu[old * ms_.channels + n];
      alloc.y[bp.pair_index(ui, n)] = alloc_.y[old * alloc_.channels + n];
      alloc.p[bp.pair_index(ui, n)] = alloc_.p[old * alloc_.channels + n];
    }
  }
  // The carried-over allocation may exceed a smaller budget.
  double total = alloc.total_power();
  if (total > bp.power_cap && total > 0.0) {
    for (double& p : alloc.p) p *= bp.power_cap / total;
  }
  bp_ = std::move(bp);
  ms_ = std::move(ms);
  alloc_ = std::move(alloc);
  inbox_.clear();
  outbox_ = publication(bp_, alloc_, ms_, 0);
}

// ---------------------------------------------------------------------------

Ensemble::Ensemble(std::vector<BoundProgram> programs, std::uint64_t seed) {
  for (auto& bp : programs) {
    if (!agents_.empty()) {
      const auto& s0 = agents_.front().program().shape;
      if (bp.shape.users_by_bs != s0.users_by_bs || bp.shape.channels != s0.channels) {
        throw InvalidNetwork("agents bound to different network shapes");
      }
    }
    agents_.emplace_back(std::move(bp), seed);
  }
}

std::vector<OverheadEntry> Ensemble::exchange_round() {
  std::vector<OverheadEntry> round;
  if (agents_.empty()) return round;
  std::map<int, Agent*> by_owner;
  for (auto& a : agents_) by_owner[a.program().owner] = &a;
  std::size_t total = 0;
  for (auto& a : agents_) {
    const auto& neighbors = a.program().neighbors;
    if (neighbors.empty()) continue;
    std::vector<std::uint8_t> frame = encode(a.outbox());
    for (int nb : neighbors) {
      auto it = by_owner.find(nb);
      if (it == by_owner.end()) throw EndpointUnreachable("no agent for base station " + std::to_string(nb));
      it->second->inbox()[a.program().owner] = decode(frame);
    }
    OverheadEntry e;
    e.iteration = static_cast<int>(a.outbox().iteration);
    e.sender = a.program().owner;
    e.values = a.outbox().payload.size();
    e.bytes = 4 * e.values;
    total += e.values;
    round.push_back(e);
  }
  const Shape& shape = agents_.front().program().shape;
  std::size_t bound = static_cast<std::size_t>(shape.user_count()) * (shape.channels + 1);
  if (total > bound) {
    throw InvariantViolation("exchanged " + std::to_string(total) + " values in one iteration, bound is " +
                             std::to_string(bound));
  }
  ledger_.insert(ledger_.end(), round.begin(), round.end());
  return round;
}

bool Ensemble::static_problem() const {
  for (const auto& a : agents_) {
    const auto& bp = a.program();
    if (!bp.neighbors.empty() || !bp.remotes.empty()) return false;
    for (const auto& l : bp.lambda) {
      if (l) return false;
    }
    for (const auto& s : bp.pairs) {
      if (s.mu) return false;
    }
  }
  return true;
}

ConvergenceReport Ensemble::run_until_converged(const RunOptions& opt) {
  ConvergenceReport rep;
  if (agents_.empty()) return rep;
  const EngineConfig& eng = agents_.front().program().engine;
  const int max_iter = static_problem() ? 1 : eng.max_iterations;
  const std::size_t ledger_start = ledger_.size();

  std::vector<double> prev_obj;
  std::vector<std::vector<double>> prev_lambda;
  int stable = 0;

  auto snapshot = [&](std::vector<double>& obj, std::vector<std::vector<double>>& lam) {
    obj.clear();
    lam.clear();
    for (const auto& a : agents_) {
      obj.push_back(a.objective());
      lam.push_back(a.state().lambda);
    }
  };
  // Returns true when the run should stop.
  auto after_round = [&](int it) {
    exchange_round();
    ++iteration_;
    rep.iterations = it;
    std::vector<double> obj;
    std::vector<std::vector<double>> lam;
    snapshot(obj, lam);
    if (max_iter == 1) {
      rep.converged = true;
      return true;
    }
    if (!prev_obj.empty()) {
      double change = 0.0;
      for (std::size_t a = 0; a < obj.size(); ++a) {
        change = std::max(change, relative_change(obj[a], prev_obj[a]));
        for (std::size_t u = 0; u < lam[a].size(); ++u) {
          change = std::max(change, relative_change(lam[a][u], prev_lambda[a][u]));
        }
      }
      stable = change < eng.epsilon ? stable + 1 : 0;
    }
    prev_obj = std::move(obj);
    prev_lambda = std::move(lam);
    if (stable >= opt.persistence) {
      rep.converged = true;
      return true;
    }
    return it >= max_iter;
  };

  if (opt.mode == ExecutionMode::Sequential) {
    for (int it = 1;; ++it) {
      for (auto& a : agents_) {
        if (opt.before_step) opt.before_step(a.program().owner, it);
        a.step();
      }
      if (after_round(it)) break;
    }
  } else {
    const std::size_t n = agents_.size();
    TimedBarrier start(n + 1, opt.barrier_timeout), done(n + 1, opt.barrier_timeout);
    bool stop = false;
    int current = 0;
    std::mutex err_mu;
    std::exception_ptr error;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < n; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (;;) {
            if (!start.arrive_and_wait() || stop) return;
            try {
              if (opt.before_step) opt.before_step(agents_[w].program().owner, current);
              agents_[w].step();
            } catch (...) {
              std::lock_guard lock(err_mu);
              if (!error) error = std::current_exception();
            }
            if (!done.arrive_and_wait()) return;
          }
        } catch (const BarrierTimeout&) {
          start.abort();
          done.abort();
        }
      });
    }
    auto shutdown = [&] {
      start.abort();
      done.abort();
      for (auto& t : workers) t.join();
    };
    try {
      for (int it = 1;; ++it) {
        current = it;
        start.arrive_and_wait();
        if (!done.arrive_and_wait()) throw BarrierTimeout("an agent aborted the iteration barrier");
        if (error) std::rethrow_exception(error);
        if (after_round(it)) break;
      }
      stop = true;
      start.arrive_and_wait();
      for (auto& t : workers) t.join();
    } catch (...) {
      shutdown();
      throw;
    }
  }

  for (std::size_t k = ledger_start; k < ledger_.size(); ++k) {
    rep.total_values += ledger_[k].values;
    rep.total_bytes += ledger_[k].bytes;
  }
  rep.dual_value = dual_value();
  for (const auto& a : agents_) rep.objectives.push_back(a.objective());
  return rep;
}

void Ensemble::rebind(std::vector<BoundProgram> programs) {
  std::map<int, BoundProgram*> by_owner;
  for (auto& bp : programs) by_owner[bp.owner] = &bp;
  for (auto& a : agents_) {
    auto it = by_owner.find(a.program().owner);
    if (it == by_owner.end()) throw EndpointUnreachable("no program for base station " + std::to_string(a.program().owner));
    a.rebind(std::move(*it->second));
  }
  // Warm start: neighbors see the carried-over allocations as iteration 0.
  exchange_round();
}

double Ensemble::dual_value() const {
  double total = 0.0;
  for (const auto& a : agents_) total += cellos::dual_value(a.program(), a.state());
  return total;
}

std::vector<LocalAllocation> Ensemble::allocations() const {
  std::vector<LocalAllocation> out;
  for (const auto& a : agents_) out.push_back(a.allocation());
  return out;
}

}  // namespace cellos
