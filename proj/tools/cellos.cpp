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

// Command-line front end: compile scenarios to per-BS programs, run them in
// the simulator against baseline schedulers, sweep slice shares and run the
// oracle acceptance suite.
//
// Exit codes: 0 success, 1 failed check, 2 scenario schema violation,
// 3 compilation error, 4 runtime invariant violation.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cellos/error.hpp"
#include "cellos/experiment.hpp"
#include "cellos/program_io.hpp"
#include "cellos/suite.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kSchema = 2, kCompile = 3, kRuntime = 4 };

struct Options {
  std::string scenario;
  std::string scheduler = "cellos";
  std::optional<long> seed;
  std::string out = "out";
  bool json = false;
  bool deterministic = false;
  std::vector<double> shares = {0.7, 0.5, 0.3};
  std::size_t count = 50;
};

// A failure tagged with the exit code of the stage that raised it.
struct StageError {
  int code;
  std::string kind;
  std::string message;
};

int report_error(const Options& opt, const StageError& e) {
  std::cerr << e.message << '\n';
  if (opt.json) std::cout << json{{"error", e.kind}, {"message", e.message}, {"exit_code", e.code}}.dump() << '\n';
  return e.code;
}

template <typename F>
auto stage(int code, F&& f) {
  try {
    return f();
  } catch (const cellos::SyntaxError& e) {
    throw StageError{code, e.kind(), e.what()};
  } catch (const cellos::Error& e) {
    throw StageError{code, e.kind(), e.what()};
  }
}

cellos::Scenario load(const Options& opt) {
  cellos::Scenario sc = stage(kSchema, [&] { return cellos::load_scenario(opt.scenario); });
  if (opt.seed) {
    if (*opt.seed < 0) throw StageError{kSchema, "SchemaViolation", "seed must be nonnegative"};
    sc.seed = static_cast<std::uint64_t>(*opt.seed);
    sc.channel.seed = sc.seed;
  }
  return sc;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StageError{kRuntime, "IOError", "cannot write " + path.string()};
  out << text;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json summary_json(const cellos::RunSummary& s) {
  json slices = json::array();
  for (const auto& ss : s.slices) {
    slices.push_back({{"slice", ss.slice},
                      {"sum_throughput", ss.sum_throughput},
                      {"min_user_throughput", ss.min_user_throughput},
                      {"power_w", ss.power_w}});
  }
  return {{"scheduler", cellos::to_string(s.scheduler)},
          {"ttis", s.ttis},
          {"sum_throughput", s.metrics.sum_throughput},
          {"ee", number_or_null(s.metrics.ee)},
          {"ee_infinite", s.metrics.ee_infinite},
          {"jain", s.metrics.jain},
          {"total_overhead_bytes", s.total_overhead_bytes},
          {"total_overhead_values", s.total_overhead_values},
          {"iterations", s.iterations},
          {"solves", s.solves},
          {"user_throughput", s.metrics.user_throughput},
          {"p_norm", s.metrics.p_norm},
          {"slices", slices}};
}

int cmd_compile(const Options& opt) {
  cellos::Scenario sc = load(opt);
  auto compiled = stage(kCompile, [&] { return cellos::compile_scenario(sc); });
  fs::create_directories(opt.out);
  json files = json::array();
  for (std::size_t s = 0; s < compiled.programs.size(); ++s) {
    for (const auto& dp : compiled.programs[s]) {
      std::string name = "slice" + std::to_string(s) + "_bs" + std::to_string(dp.owner) + ".ir.json";
      write_file(fs::path(opt.out) / name, stage(kCompile, [&] { return cellos::serialize_program(dp); }));
      files.push_back(name);
    }
  }
  json report = {{"parse_ms", compiled.timing.parse_ms},
                 {"generate_ms", compiled.timing.generate_ms},
                 {"decompose_ms", compiled.timing.decompose_ms},
                 {"total_ms", compiled.timing.total_ms},
                 {"files", files}};
  write_file(fs::path(opt.out) / "compile_report.json", report.dump(2) + "\n");
  spdlog::info("compiled {} programs in {:.3f} ms", files.size(), compiled.timing.total_ms);
  if (opt.json) {
    std::cout << report.dump() << '\n';
  } else {
    std::cout << "programs: " << files.size() << "\nparse_ms: " << compiled.timing.parse_ms
              << "\ngenerate_ms: " << compiled.timing.generate_ms << "\ndecompose_ms: " << compiled.timing.decompose_ms
              << "\ntotal_ms: " << compiled.timing.total_ms << '\n';
  }
  return kOk;
}

cellos::ExecutionMode mode_of(const Options& opt) {
  return opt.deterministic ? cellos::ExecutionMode::Sequential : cellos::ExecutionMode::Threaded;
}

int cmd_run(const Options& opt) {
  cellos::Scenario sc = load(opt);
  auto kind = stage(kSchema, [&] { return cellos::parse_scheduler(opt.scheduler); });
  if (kind == cellos::SchedulerKind::CellOS) stage(kCompile, [&] { return cellos::compile_scenario(sc); });
  fs::create_directories(opt.out);
  std::ofstream metrics(fs::path(opt.out) / "metrics.csv", std::ios::binary);
  std::ofstream overhead(fs::path(opt.out) / "overhead.csv", std::ios::binary);
  cellos::RunSinks sinks{&metrics, &overhead};
  auto summary = stage(kRuntime, [&] { return cellos::run_experiment(sc, kind, sinks, mode_of(opt)); });
  json j = summary_json(summary);
  write_file(fs::path(opt.out) / "summary.json", j.dump(2) + "\n");
  spdlog::info("{}: {} TTIs, sum throughput {:.6g} bit/s", opt.scheduler, summary.ttis, summary.metrics.sum_throughput);
  if (opt.json) {
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "scheduler: " << opt.scheduler << "\nttis: " << summary.ttis
              << "\nsum_throughput: " << summary.metrics.sum_throughput << "\nee: " << summary.metrics.ee
              << "\njain: " << summary.metrics.jain << "\ntotal_overhead_bytes: " << summary.total_overhead_bytes
              << "\niterations: " << summary.iterations << '\n';
  }
  return kOk;
}

int cmd_sweep(const Options& opt) {
  cellos::Scenario sc = load(opt);
  auto kind = stage(kSchema, [&] { return cellos::parse_scheduler(opt.scheduler); });
  if (sc.slices.size() != 2) {
    throw StageError{kSchema, "SchemaViolation", "sweep-slices needs a scenario with exactly two slices"};
  }
  if (kind == cellos::SchedulerKind::CellOS) stage(kCompile, [&] { return cellos::compile_scenario(sc); });
  auto points = stage(kRuntime, [&] { return cellos::sweep_slices(sc, opt.shares, kind, mode_of(opt)); });
  fs::create_directories(opt.out);
  json all = json::array();
  std::ostringstream csv;
  csv << "share,slice,sum_throughput,min_user_throughput,power_w\n";
  for (const auto& p : points) {
    json j = summary_json(p.summary);
    j["share"] = p.share;
    all.push_back(j);
    for (const auto& ss : p.summary.slices) {
      csv << p.share << ',' << ss.slice << ',' << ss.sum_throughput << ',' << ss.min_user_throughput << ','
          << ss.power_w << '\n';
    }
  }
  write_file(fs::path(opt.out) / "sweep.json", all.dump(2) + "\n");
  write_file(fs::path(opt.out) / "sweep.csv", csv.str());
  std::cout << (opt.json ? all.dump() + "\n" : csv.str());
  return kOk;
}

int cmd_oracle_check(const Options& opt) {
  json out = json::array();
  bool ok = true;
  double seconds = 0.0;
  for (auto obj : {cellos::OracleObjective::MaxRate, cellos::OracleObjective::MinPower}) {
    auto s = stage(kRuntime, [&] { return cellos::run_toy_suite(obj, opt.count); });
    bool pass = s.passed * 10 >= s.cases.size() * 9;
    ok = ok && pass;
    seconds += s.seconds;
    out.push_back({{"objective", cellos::to_string(obj)},
                   {"cases", s.cases.size()},
                   {"within_bound", s.passed},
                   {"converged", s.converged},
                   {"seconds", s.seconds},
                   {"pass", pass}});
    if (!opt.json) {
      std::cout << cellos::to_string(obj) << ": " << s.passed << "/" << s.cases.size() << " within bound, "
                << s.converged << " converged, " << s.seconds << " s " << (pass ? "PASS" : "FAIL") << '\n';
    }
  }
  ok = ok && seconds < 120.0;
  if (opt.json) std::cout << json{{"suites", out}, {"seconds", seconds}, {"pass", ok}}.dump() << '\n';
  return ok ? kOk : kCheckFailed;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("cellos");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CELLOS_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"cellos: compile and run network objectives on a simulated RAN"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    auto* s = cmd->add_option("--scenario", opt.scenario, "scenario file (schema v1)");
    if (needs_scenario) s->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", opt.seed, "override the scenario seed");
    cmd->add_option("--out", opt.out, "output directory");
    cmd->add_flag("--json", opt.json, "machine-readable output");
    cmd->add_flag("--deterministic", opt.deterministic, "run agents single-threaded");
  };
  auto* compile = app.add_subcommand("compile", "write one ir-v1 program per base station and slice");
  add_common(compile, true);
  auto* run = app.add_subcommand("run", "simulate the scenario with one scheduler");
  add_common(run, true);
  run->add_option("--scheduler", opt.scheduler, "cellos, round_robin, proportional_fair or greedy");
  auto* sweep = app.add_subcommand("sweep-slices", "rerun a two-slice scenario over first-slice shares");
  add_common(sweep, true);
  sweep->add_option("--scheduler", opt.scheduler, "scheduler");
  sweep->add_option("--shares", opt.shares, "first-slice shares")->delimiter(',');
  auto* oracle = app.add_subcommand("oracle-check", "compare the agents with exhaustive search on toy instances");
  add_common(oracle, false);
  oracle->add_option("--count", opt.count, "number of toy instances per objective");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*compile) return cmd_compile(opt);
    if (*run) return cmd_run(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*oracle) return cmd_oracle_check(opt);
  } catch (const StageError& e) {
    return report_error(opt, e);
  } catch (const std::exception& e) {
    return report_error(opt, {kRuntime, "InternalError", e.what()});
  }
  return kOk;
}
