#pragma once

// Command implementations behind the `cqc` tool. run_cli returns the process
// exit status: 0 ok, 2 configuration or usage error, 3 checker violation,
// 4 enumeration guard.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cqc/checker.hpp"
#include "cqc/config.hpp"
#include "cqc/error.hpp"
#include "cqc/family.hpp"
#include "cqc/metrics.hpp"
#include "cqc/simnet.hpp"
#include "cqc/trace.hpp"

namespace cqc {

enum ExitStatus { kExitOk = 0, kExitConfig = 2, kExitCheckFailed = 3, kExitTooLarge = 4 };

inline constexpr const char* kDefaultPGrid = "0.05:0.95:0.05";

// "start:stop:step", inclusive of stop up to rounding.
inline std::vector<double> parse_p_grid(const std::string& text) {
  double start = 0, stop = 0, step = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &start, &stop, &step, &tail) != 3) {
    throw Error(ErrorCode::ConfigError, "p-grid must look like start:stop:step, got '" + text + "'");
  }
  if (!(step > 0) || start > stop) throw Error(ErrorCode::ConfigError, "p-grid needs step > 0 and start <= stop");
  if (start < 0 || stop > 1) throw Error(ErrorCode::ConfigError, "p-grid must stay within [0, 1]");
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> grid;
  for (long i = 0; i < count; ++i) {
    // Snap to 12 significant digits so 0.1 + 0.2 style drift never reaches the output.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", start + static_cast<double>(i) * step);
    grid.push_back(std::stod(buf));
  }
  return grid;
}

inline std::string fmt12(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string join_sizes(const std::set<int>& sizes) {
  std::string out;
  for (int s : sizes) out += (out.empty() ? "" : " ") + std::to_string(s);
  return out;
}

inline void render_analysis(std::ostream& out, const QuorumFamily& f, const std::vector<double>& ps) {
  const auto writes = write_quorum_sizes(f);
  out << "family: " << f.name() << '\n'
      << "sites: " << f.n() << '\n'
      << "read_quorum_sizes: " << join_sizes(read_quorum_sizes(f)) << '\n'
      << "write_quorum_size_min: " << writes.min << '\n'
      << "write_quorum_size_max: " << writes.max << '\n'
      << "fault_tolerance: " << fault_tolerance(f) << '\n'
      << "read_capacity: " << read_capacity(f) << '\n'
      << "p,read_availability,structural_write_availability,protocol_write_availability\n";
  for (double p : ps) {
    const Probability prob(p);
    out << fmt12(p) << ',' << fmt12(read_availability(f, prob)) << ','
        << fmt12(structural_write_availability(f, prob)) << ',' << fmt12(protocol_write_availability(f, prob))
        << '\n';
  }
}

inline void render_comparison(std::ostream& out, std::vector<QuorumFamily> families, const std::vector<double>& ps) {
  std::stable_sort(families.begin(), families.end(),
                   [](const QuorumFamily& a, const QuorumFamily& b) { return a.name() < b.name(); });
  std::vector<double> grid = ps;
  std::sort(grid.begin(), grid.end());
  out << "family,p,read_availability,structural_write_availability,protocol_write_availability,read_capacity,"
         "fault_tolerance,min_read_q,min_write_q\n";
  for (const auto& f : families) {
    const int capacity = read_capacity(f);
    const int tolerance = fault_tolerance(f);
    const int min_read = *read_quorum_sizes(f).begin();
    const int min_write = write_quorum_sizes(f).min;
    for (double p : grid) {
      const Probability prob(p);
      out << csv_field(f.name()) << ',' << fmt12(p) << ',' << fmt12(read_availability(f, prob)) << ','
          << fmt12(structural_write_availability(f, prob)) << ',' << fmt12(protocol_write_availability(f, prob))
          << ',' << capacity << ',' << tolerance << ',' << min_read << ',' << min_write << '\n';
    }
  }
}

inline void render_quorums(std::ostream& out, const std::vector<NodeSet>& quorums) {
  for (const auto& q : quorums) out << q.to_string() << '\n';
}

struct SimulationSummary {
  Verdict serial;
  Verdict liveness;
  int ok = 0;
  int system_failures = 0;
  bool passed() const { return serial.ok() && liveness.ok(); }
};

inline SimulationSummary summarize(const Trace& trace, const Scenario& sc, Expectation expect) {
  SimulationSummary s;
  s.serial = check_serial_isolation(trace);
  s.liveness = check_liveness(trace, std::vector<Expectation>(static_cast<std::size_t>(sc.txn_count), expect));
  for (const auto& e : trace) {
    if (e.kind != EventKind::Response) continue;
    s.ok += e.outcome == Outcome::Ok;
    s.system_failures += e.outcome == Outcome::SystemFailure;
  }
  return s;
}

namespace detail {

// Writes to --out when given, otherwise to `fallback`.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw Error(ErrorCode::ConfigError, "cannot write " + path);
    out_ = &file_;
  }
  std::ostream& stream() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

inline const QuorumFamily& single_family(const Config& cfg) {
  if (!cfg.family) throw Error(ErrorCode::ConfigError, "config has no 'family'");
  return *cfg.family;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Circular quorum systems: analysis, enumeration and protocol simulation", "cqc"};
  app.require_subcommand(1);
  std::string config_path, out_path, p_grid = kDefaultPGrid;
  std::optional<std::uint64_t> seed;
  bool reads = false, writes = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file")->required();
    cmd->add_option("--out", out_path, "output path (default: standard output)");
  };
  auto* analyze = app.add_subcommand("analyze", "metrics for one family");
  add_common(analyze);
  analyze->add_option("--p-grid", p_grid, "start:stop:step, used when the config has no p list");
  auto* compare = app.add_subcommand("compare", "CSV comparison of several families over a p grid");
  add_common(compare);
  compare->add_option("--p-grid", p_grid, "start:stop:step");
  auto* enumerate = app.add_subcommand("enumerate", "list minimal read or write quorums");
  add_common(enumerate);
  auto* which = enumerate->add_option_group("kind");
  which->add_flag("--reads", reads, "minimal read quorums");
  which->add_flag("--writes", writes, "minimal write quorums");
  which->require_option(1);
  auto* simulate = app.add_subcommand("simulate", "run a scenario, write its trace and check it");
  add_common(simulate);
  simulate->add_option("--seed", seed, "overrides the scenario seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::string what = e.what();
    std::replace(what.begin(), what.end(), '\n', ' ');
    err << "error UsageError: " << what << '\n';
    return kExitConfig;
  }

  try {
    const Config cfg = load_config(config_path);
    if (analyze->parsed()) {
      const auto ps = cfg.p.empty() ? parse_p_grid(p_grid) : cfg.p;
      detail::Output o(out_path, out);
      render_analysis(o.stream(), detail::single_family(cfg), ps);
      return kExitOk;
    }
    if (compare->parsed()) {
      std::vector<QuorumFamily> families = cfg.families;
      if (families.empty() && cfg.family) families.push_back(*cfg.family);
      if (families.empty()) throw Error(ErrorCode::ConfigError, "config has no 'families'");
      const auto ps = parse_p_grid(p_grid);
      detail::Output o(out_path, out);
      render_comparison(o.stream(), families, ps);
      return kExitOk;
    }
    if (enumerate->parsed()) {
      const QuorumFamily& f = detail::single_family(cfg);
      const auto quorums = reads ? minimal_read_quorums(f) : minimal_write_quorums(f);
      detail::Output o(out_path, out);
      render_quorums(o.stream(), quorums);
      return kExitOk;
    }
    // simulate
    if (!cfg.scenario) throw Error(ErrorCode::ConfigError, "config has no 'scenario'");
    Scenario sc = *cfg.scenario;
    if (seed) sc.seed = *seed;
    const Trace trace = run(sc);
    {
      detail::Output o(out_path.empty() ? "trace.log" : out_path, out);
      write_trace(o.stream(), trace);
    }
    const SimulationSummary s = summarize(trace, sc, cfg.expect);
    out << "events: " << trace.size() << " last_tick: " << (trace.empty() ? 0 : trace.back().tick) << '\n'
        << "responses: ok=" << s.ok << " system_failure=" << s.system_failures << '\n'
        << s.serial.report() << s.liveness.report() << s.serial.summary("serial_isolation") << '\n'
        << s.liveness.summary("liveness") << '\n';
    if (!s.passed()) {
      err << "error CheckFailed: " << s.serial.violations.size() + s.liveness.violations.size()
          << " checker violation(s)\n";
      return kExitCheckFailed;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::TooLargeToEnumerate: return kExitTooLarge;
      default: return kExitConfig;
    }
  }
}

}  // namespace cqc
