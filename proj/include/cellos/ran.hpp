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

// Downlink multi-cell RAN simulator: channel gains, the PRB grid split into
// slices, per-user buffers, 1 ms TTI stepping, baseline schedulers and the
// throughput / power / energy-efficiency / fairness metrics.

#ifndef CELLOS_RAN_HPP_
#define CELLOS_RAN_HPP_

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "cellos/runtime.hpp"

namespace cellos {

// ---------------------------------------------------------------------------
// Channel.

struct Point {
  double x = 0.0, y = 0.0;
};

struct ChannelModel {
  double pathloss_exponent = 3.0;
  double reference_gain = 1e-3;  // gain at 1 m
  double shadowing_db = 0.0;     // lognormal standard deviation per (b,u); 0 disables
  bool rayleigh = false;         // unit-mean exponential power fading per (b,u,n)
  std::uint64_t seed = 0;
  std::vector<Point> bs_positions;
  std::vector<Point> ue_positions;
  int channels = 50;
};

// g[b,u,n] = reference_gain * d^-exponent * fading. Throws CoincidentNodes.
GainView generate_gains(const ChannelModel& model);

// ---------------------------------------------------------------------------
// State.

struct PrbRange {
  int first = 0;
  int count = 0;
  bool contains(int n) const { return n >= first && n < first + count; }
  bool operator==(const PrbRange&) const = default;
};

// Contiguous ranges of floor(share * prbs) PRBs; leftovers go to the first
// slice. Throws InvalidShare.
std::vector<PrbRange> partition_slices(int prbs, const std::vector<double>& shares);

struct RanConfig {
  int prbs = 50;
  double prb_bandwidth_hz = 200e3;
  double noise_w = 1e-13;  // per PRB
  double pmax_w = 1.0;     // per base station
  double pmin_w = 0.0;
  double tti_s = 1e-3;
};

inline constexpr double kFullBuffer = std::numeric_limits<double>::infinity();

struct RanState {
  RanConfig cfg;
  int bs_count = 0;
  std::vector<int> serving;   // per UE
  std::vector<int> slice_of;  // per UE
  std::vector<PrbRange> slices;
  std::vector<double> buffer_bits;  // per UE, kFullBuffer for full-buffer traffic
  long tti = 0;

  int ue_count() const { return static_cast<int>(serving.size()); }
  bool backlogged(int u) const { return buffer_bits[u] > 0.0; }
  bool any_backlogged() const;
  // Users of base station b in slice s, ascending; backlogged ones only when asked.
  std::vector<int> users(int b, int s, bool backlogged_only = true) const;
  // Power budget of one slice at one base station, proportional to its PRBs.
  double slice_budget(int s) const;
  // Throws InvalidNetwork on inconsistent sizes or overlapping slices.
  void validate() const;
};

struct PrbGrant {
  int bs = 0;
  int ue = 0;
  int prb = 0;
  double power_w = 0.0;
  bool operator==(const PrbGrant&) const = default;
};

// y[b,u,n] = 1 for every grant, p[b,u,n] = power_w.
struct Allocation {
  std::vector<PrbGrant> grants;
  bool operator==(const Allocation&) const = default;
};

struct TtiOutcome {
  long tti = 0;
  std::vector<double> bits;     // delivered per UE
  std::vector<double> power_w;  // summed over the UE's PRBs
  std::vector<double> rate_bps; // Shannon rate before the buffer cap
};

// Shannon rate of every UE under the allocation, with co-channel
// interference from the other base stations.
std::vector<double> allocation_rates(const RanState& state, const Allocation& alloc, const GainView& gains);

// Throws InvariantViolation on a power budget overrun, a double-booked PRB,
// a grant to an empty buffer, a grant outside the UE's slice or to a UE the
// base station does not serve.
TtiOutcome step_tti(RanState& state, const Allocation& alloc, const GainView& gains);

// ---------------------------------------------------------------------------
// Baseline schedulers. Each PRB of a slice goes to one backlogged UE of that
// slice; power is split equally over the allocated PRBs of a slice budget.
// All throw NoBackloggedUsers when no UE has data.

struct RoundRobinMemory {
  std::vector<int> last;  // last served UE per (b, slice), -1 initially
};

Allocation round_robin(const RanState& state, RoundRobinMemory& memory);

inline constexpr int kPfWindow = 100;

// avg holds the windowed average rate per UE. Within a TTI the metric uses a
// provisional average that already counts the PRBs granted so far.
Allocation proportional_fair(const RanState& state, const GainView& gains, const std::vector<double>& avg,
                             int window = kPfWindow);
void update_average(std::vector<double>& avg, const TtiOutcome& out, double tti_s, int window = kPfWindow);

Allocation greedy(const RanState& state, const GainView& gains);

// ---------------------------------------------------------------------------
// Metrics.

struct MetricsRecord {
  double elapsed_s = 0.0;
  double sum_throughput = 0.0;          // bit/s
  std::vector<double> user_throughput;  // bit/s
  std::vector<double> user_power_w;     // mean transmit power
  std::vector<double> p_norm;
  double ee = 0.0;  // bit/J
  bool ee_infinite = false;
  double jain = 1.0;
};

double jain_index(const std::vector<double>& rates);

class MetricsTracker {
 public:
  explicit MetricsTracker(const RanState& state);

  void add(const TtiOutcome& out);
  long ttis() const { return ttis_; }
  MetricsRecord record() const;

  static void write_header(std::ostream& os);
  // Rows of the last added TTI, one per UE.
  void write_rows(std::ostream& os) const;

 private:
  RanConfig cfg_;
  std::vector<int> serving_, slice_of_;
  std::vector<double> bits_, energy_j_;
  TtiOutcome last_;
  long ttis_ = 0;
};

MetricsRecord metrics(const RanState& state, const std::vector<TtiOutcome>& log);

}  // namespace cellos

#endif  // CELLOS_RAN_HPP_
