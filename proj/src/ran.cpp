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
#include <random>
#include <set>
#include <string>

#include "cellos/error.hpp"
#include "cellos/ran.hpp"

namespace cellos {

GainView generate_gains(const ChannelModel& model) {
  const int nb = static_cast<int>(model.bs_positions.size());
  const int nu = static_cast<int>(model.ue_positions.size());
  if (model.channels < 1) throw InvalidNetwork("channel count must be positive");
  GainView g(nb, nu, model.channels);
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> shadow(0.0, 1.0);
  std::exponential_distribution<double> fading(1.0);
  for (int b = 0; b < nb; ++b) {
    for (int u = 0; u < nu; ++u) {
      double d = std::hypot(model.bs_positions[b].x - model.ue_positions[u].x,
                            model.bs_positions[b].y - model.ue_positions[u].y);
      if (d <= 0.0) {
        throw CoincidentNodes("base station " + std::to_string(b) + " and UE " + std::to_string(u));
      }
      double mean = model.reference_gain * std::pow(d, -model.pathloss_exponent);
      // Draws happen whether or not the effect is enabled so that turning one
      // on does not reshuffle the other.
      double s = shadow(rng);
      if (model.shadowing_db > 0.0) mean *= std::pow(10.0, model.shadowing_db * s / 10.0);
      for (int n = 0; n < model.channels; ++n) {
        double f = fading(rng);
        g.set(b, u, n, model.rayleigh ? mean * f : mean);
      }
    }
  }
  return g;
}

std::vector<PrbRange> partition_slices(int prbs, const std::vector<double>& shares) {
  if (prbs < 1) throw InvalidShare("PRB count must be positive");
  if (shares.empty()) throw InvalidShare("no slices");
  double total = 0.0;
  for (double s : shares) {
    if (!(s > 0.0) || s > 1.0) throw InvalidShare("share " + std::to_string(s) + " outside (0, 1]");
    total += s;
  }
  if (total > 1.0 + 1e-9) throw InvalidShare("shares sum to more than 1");
  std::vector<int> sizes;
  int used = 0;
  for (double s : shares) {
    sizes.push_back(static_cast<int>(std::floor(s * prbs + 1e-9)));
    used += sizes.back();
  }
  // Only a full partition hands out the rounding leftovers.
  if (total > 1.0 - 1e-9) sizes[0] += prbs - used;
  std::vector<PrbRange> out;
  int first = 0;
  for (int size : sizes) {
    out.push_back({first, size});
    first += size;
  }
  return out;
}

bool RanState::any_backlogged() const {
  return std::any_of(buffer_bits.begin(), buffer_bits.end(), [](double b) { return b > 0.0; });
}

std::vector<int> RanState::users(int b, int s, bool backlogged_only) const {
  std::vector<int> out;
  for (int u = 0; u < ue_count(); ++u) {
    if (serving[u] == b && slice_of[u] == s && (!backlogged_only || backlogged(u))) out.push_back(u);
  }
  return out;
}

double RanState::slice_budget(int s) const {
  return cfg.pmax_w * static_cast<double>(slices[s].count) / static_cast<double>(cfg.prbs);
}

void RanState::validate() const {
  if (bs_count < 1) throw InvalidNetwork("no base stations");
  if (slice_of.size() != serving.size() || buffer_bits.size() != serving.size()) {
    throw InvalidNetwork("per-UE vectors differ in length");
  }
  for (int u = 0; u < ue_count(); ++u) {
    if (serving[u] < 0 || serving[u] >= bs_count) throw InvalidNetwork("UE " + std::to_string(u) + " unserved");
    if (slice_of[u] < 0 || slice_of[u] >= static_cast<int>(slices.size())) {
      throw InvalidNetwork("UE " + std::to_string(u) + " has no slice");
    }
    if (buffer_bits[u] < 0.0) throw InvalidNetwork("negative buffer");
  }
  std::vector<int> owner(cfg.prbs, -1);
  for (std::size_t s = 0; s < slices.size(); ++s) {
    for (int n = slices[s].first; n < slices[s].first + slices[s].count; ++n) {
      if (n < 0 || n >= cfg.prbs) throw InvalidNetwork("slice range outside the grid");
      if (owner[n] >= 0) throw InvalidNetwork("slices overlap at PRB " + std::to_string(n));
      owner[n] = static_cast<int>(s);
    }
  }
}

namespace {

double gain_of(const GainView& g, int b, int u, int n) {
  double v = g.get(b, u, n);
  if (!std::isfinite(v) || v <= 0.0) {
    throw InvariantViolation("no channel gain for (" + std::to_string(b) + "," + std::to_string(u) + "," +
                             std::to_string(n) + ")");
  }
  return v;
}

}  // namespace

std::vector<double> allocation_rates(const RanState& state, const Allocation& alloc, const GainView& gains) {
  const int prbs = state.cfg.prbs;
  std::vector<double> tot(static_cast<std::size_t>(state.bs_count) * prbs, 0.0);
  for (const auto& g : alloc.grants) tot[static_cast<std::size_t>(g.bs) * prbs + g.prb] += g.power_w;
  std::vector<double> rate(state.ue_count(), 0.0);
  for (const auto& gr : alloc.grants) {
    if (gr.power_w <= 0.0) continue;
    double interference = 0.0;
    for (int b = 0; b < state.bs_count; ++b) {
      double p = tot[static_cast<std::size_t>(b) * prbs + gr.prb];
      if (b != gr.bs && p > 0.0) interference += gain_of(gains, b, gr.ue, gr.prb) * p;
    }
    double sinr = gain_of(gains, gr.bs, gr.ue, gr.prb) * gr.power_w / (state.cfg.noise_w + interference);
    rate[gr.ue] += state.cfg.prb_bandwidth_hz * std::log2(1.0 + sinr);
  }
  return rate;
}

TtiOutcome step_tti(RanState& state, const Allocation& alloc, const GainView& gains) {
  const int prbs = state.cfg.prbs;
  std::set<std::pair<int, int>> booked;
  std::vector<double> bs_power(state.bs_count, 0.0);
  for (const auto& g : alloc.grants) {
    std::string where = "(" + std::to_string(g.bs) + "," + std::to_string(g.ue) + "," + std::to_string(g.prb) + ")";
    if (g.bs < 0 || g.bs >= state.bs_count || g.ue < 0 || g.ue >= state.ue_count() || g.prb < 0 || g.prb >= prbs) {
      throw InvariantViolation("grant " + where + " outside the grid");
    }
    if (!std::isfinite(g.power_w) || g.power_w < 0.0) throw InvariantViolation("negative power at " + where);
    if (state.serving[g.ue] != g.bs) throw InvariantViolation("association: UE not served at " + where);
    if (!state.slices[state.slice_of[g.ue]].contains(g.prb)) {
      throw InvariantViolation("slice isolation: PRB outside the UE's slice at " + where);
    }
    if (!state.backlogged(g.ue)) throw InvariantViolation("empty buffer: grant at " + where);
    if (!booked.insert({g.bs, g.prb}).second) throw InvariantViolation("PRB double-booked at " + where);
    bs_power[g.bs] += g.power_w;
  }
  for (int b = 0; b < state.bs_count; ++b) {
    if (bs_power[b] > state.cfg.pmax_w * (1.0 + 1e-9)) {
      throw InvariantViolation("power budget: base station " + std::to_string(b) + " uses " +
                               std::to_string(bs_power[b]) + " W");
    }
  }

  TtiOutcome out;
  out.tti = state.tti;
  out.rate_bps = allocation_rates(state, alloc, gains);
  out.power_w.assign(state.ue_count(), 0.0);
  for (const auto& g : alloc.grants) out.power_w[g.ue] += g.power_w;
  out.bits.assign(state.ue_count(), 0.0);
  for (int u = 0; u < state.ue_count(); ++u) {
    double bits = std::min(state.buffer_bits[u], out.rate_bps[u] * state.cfg.tti_s);
    out.bits[u] = bits;
    if (std::isfinite(state.buffer_bits[u])) state.buffer_bits[u] = std::max(0.0, state.buffer_bits[u] - bits);
  }
  ++state.tti;
  return out;
}

}  // namespace cellos
