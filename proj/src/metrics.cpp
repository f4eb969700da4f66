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
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "cellos/error.hpp"
#include "cellos/ran.hpp"

namespace cellos {

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double normalized_power(const RanConfig& cfg, double p) {
  double span = cfg.pmax_w - cfg.pmin_w;
  if (span <= 0.0) return 0.0;
  return std::clamp((p - cfg.pmin_w) / span, 0.0, 1.0);
}

}  // namespace

double jain_index(const std::vector<double>& rates) {
  if (rates.empty()) return 1.0;
  double sum = 0.0, sq = 0.0;
  for (double r : rates) {
    sum += r;
    sq += r * r;
  }
  if (sq == 0.0) return 1.0;
  return sum * sum / (static_cast<double>(rates.size()) * sq);
}

MetricsTracker::MetricsTracker(const RanState& state)
    : cfg_(state.cfg),
      serving_(state.serving),
      slice_of_(state.slice_of),
      bits_(state.ue_count(), 0.0),
      energy_j_(state.ue_count(), 0.0) {}

void MetricsTracker::add(const TtiOutcome& out) {
  for (std::size_t u = 0; u < bits_.size(); ++u) {
    bits_[u] += out.bits[u];
    energy_j_[u] += out.power_w[u] * cfg_.tti_s;
  }
  last_ = out;
  ++ttis_;
}

MetricsRecord MetricsTracker::record() const {
  MetricsRecord m;
  const std::size_t nu = bits_.size();
  m.elapsed_s = static_cast<double>(ttis_) * cfg_.tti_s;
  m.user_throughput.assign(nu, 0.0);
  m.user_power_w.assign(nu, 0.0);
  m.p_norm.assign(nu, 0.0);
  if (ttis_ == 0) return m;
  double bits = 0.0, energy = 0.0;
  for (std::size_t u = 0; u < nu; ++u) {
    m.user_throughput[u] = bits_[u] / m.elapsed_s;
    m.user_power_w[u] = energy_j_[u] / m.elapsed_s;
    m.p_norm[u] = normalized_power(cfg_, m.user_power_w[u]);
    bits += bits_[u];
    energy += energy_j_[u];
  }
  m.sum_throughput = bits / m.elapsed_s;
  if (energy > 0.0) {
    m.ee = bits / energy;
  } else {
    m.ee = std::numeric_limits<double>::infinity();
    m.ee_infinite = true;
  }
  m.jain = jain_index(m.user_throughput);
  return m;
}

void MetricsTracker::write_header(std::ostream& os) {
  os << "tti,slice,bs,ue,bits,power_w,p_norm,cum_throughput_bps,jain,ee_bpj\n";
}

void MetricsTracker::write_rows(std::ostream& os) const {
  MetricsRecord m = record();
  for (std::size_t u = 0; u < bits_.size(); ++u) {
    os << last_.tti << ',' << slice_of_[u] << ',' << serving_[u] << ',' << u << ',' << num(last_.bits[u]) << ','
       << num(last_.power_w[u]) << ',' << num(normalized_power(cfg_, last_.power_w[u])) << ','
       << num(m.user_throughput[u]) << ',' << num(m.jain) << ',' << num(m.ee) << '\n';
  }
}

MetricsRecord metrics(const RanState& state, const std::vector<TtiOutcome>& log) {
  if (log.empty()) throw InvariantViolation("metrics of an empty log");
  MetricsTracker t(state);
  for (const auto& out : log) t.add(out);
  return t.record();
}

}  // namespace cellos
