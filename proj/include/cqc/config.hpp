#pragma once

// YAML configuration files for the command line tool.
//
//   version: 1
//   family: {kind: alpha, arcs: [2, 2, 2], t: 2, full_arc_reads: true}
//   families: [...]          # compare: several family blocks
//   p: [0.5, 0.9]            # analyze: probabilities to report
//   scenario: {...}          # simulate
//
// Family kinds: alpha, beta (arcs, t), majority (n, v_r, v_w), rowa (n),
// grid (rows, cols), diamond (rows: list of row sizes), generalized_grid
// (planes, plane_size, t). Every kind accepts an optional display `name`.
// Unknown keys are rejected at every level.

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cqc/checker.hpp"
#include "cqc/error.hpp"
#include "cqc/family.hpp"
#include "cqc/metrics.hpp"
#include "cqc/simnet.hpp"

namespace cqc {

struct Config {
  int version = 1;
  std::optional<QuorumFamily> family;
  std::vector<QuorumFamily> families;
  std::vector<double> p;
  std::optional<Scenario> scenario;
  Expectation expect = Expectation::MustSucceed;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

inline void allow_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> keys) {
  if (!node.IsMap()) config_error(where, "expected a mapping");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) config_error(where, "unknown key '" + key + "'");
  }
}

template <typename T>
T required(const YAML::Node& node, const char* key, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) config_error(where, std::string("missing '") + key + "'");
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    config_error(where, std::string("bad value for '") + key + "'");
  }
}

template <typename T>
T optional_value(const YAML::Node& node, const char* key, T fallback, const std::string& where) {
  if (!node[key]) return fallback;
  return required<T>(node, key, where);
}

inline QuorumFamily parse_family(const YAML::Node& node, const std::string& where) {
  if (!node.IsMap()) config_error(where, "expected a family mapping");
  const auto kind = required<std::string>(node, "kind", where);
  const std::string at = where + " (" + kind + ")";
  auto family = [&]() -> QuorumFamily {
    if (kind == "alpha") {
      allow_keys(node, at, {"kind", "name", "arcs", "t", "full_arc_reads"});
      const auto arcs = required<std::vector<int>>(node, "arcs", at);
      return QuorumFamily::alpha(CircularStructure::build(arcs), required<int>(node, "t", at),
                                 optional_value<bool>(node, "full_arc_reads", true, at));
    }
    if (kind == "beta") {
      allow_keys(node, at, {"kind", "name", "arcs", "t"});
      const auto arcs = required<std::vector<int>>(node, "arcs", at);
      return QuorumFamily::beta(CircularStructure::build(arcs), required<int>(node, "t", at));
    }
    if (kind == "majority") {
      allow_keys(node, at, {"kind", "name", "n", "v_r", "v_w"});
      return make_majority(required<int>(node, "n", at), required<int>(node, "v_r", at), required<int>(node, "v_w", at));
    }
    if (kind == "rowa") {
      allow_keys(node, at, {"kind", "name", "n"});
      return make_rowa(required<int>(node, "n", at));
    }
    if (kind == "grid") {
      allow_keys(node, at, {"kind", "name", "rows", "cols"});
      return make_grid(required<int>(node, "rows", at), required<int>(node, "cols", at));
    }
    if (kind == "diamond") {
      allow_keys(node, at, {"kind", "name", "rows"});
      return make_diamond(required<std::vector<int>>(node, "rows", at));
    }
    if (kind == "generalized_grid") {
      allow_keys(node, at, {"kind", "name", "planes", "plane_size", "t"});
      return make_generalized_grid(required<int>(node, "planes", at), required<int>(node, "plane_size", at),
                                   required<int>(node, "t", at));
    }
    config_error(where, "unknown family kind '" + kind + "'");
  }();
  if (node["name"]) family.with_name(required<std::string>(node, "name", at));
  return family;
}

inline CrashEntry parse_crash(const YAML::Node& node, const std::string& where) {
  allow_keys(node, where, {"tick", "site", "action"});
  CrashEntry c;
  c.tick = required<Tick>(node, "tick", where);
  c.site = required<NodeId>(node, "site", where);
  const auto action = optional_value<std::string>(node, "action", "crash", where);
  if (action == "crash") {
    c.action = CrashEntry::Action::Crash;
  } else if (action == "recover") {
    c.action = CrashEntry::Action::Recover;
  } else {
    config_error(where, "action must be crash or recover");
  }
  return c;
}

inline Scenario parse_scenario(const YAML::Node& node, QuorumFamily family) {
  const std::string where = "scenario";
  allow_keys(node, where,
             {"items", "initial_values", "initial_stores", "clients", "txn_count", "read_fraction", "max_txn_items",
              "delay_min", "delay_max", "think_max", "timeout_ticks", "stall_ticks", "max_ticks", "seed", "crashes"});
  Scenario sc;
  sc.family = std::move(family);
  if (node["items"] && node["initial_values"]) config_error(where, "give either items or initial_values");
  if (node["initial_values"]) {
    sc.initial_values = required<std::vector<Value>>(node, "initial_values", where);
  } else {
    sc.initial_values.assign(static_cast<std::size_t>(optional_value<int>(node, "items", 1, where)), 0);
  }
  if (const YAML::Node stores = node["initial_stores"]) {
    // site -> list of [value, version] per item
    if (!stores.IsMap()) config_error(where, "initial_stores must map sites to item lists");
    for (const auto& kv : stores) {
      const std::string at = where + ".initial_stores";
      NodeId site = 0;
      std::vector<std::vector<std::int64_t>> rows;
      try {
        site = kv.first.as<NodeId>();
        rows = kv.second.as<std::vector<std::vector<std::int64_t>>>();
      } catch (const YAML::Exception&) {
        config_error(at, "expected site: [[value, version], ...]");
      }
      std::vector<ItemRecord> store;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != 2 || rows[i][1] < 0) config_error(at, "each item is [value, version]");
        store.push_back({static_cast<ItemId>(i), rows[i][0], static_cast<Version>(rows[i][1])});
      }
      sc.initial_stores[site] = std::move(store);
    }
  }
  sc.clients = optional_value(node, "clients", sc.clients, where);
  sc.txn_count = optional_value(node, "txn_count", sc.txn_count, where);
  sc.read_fraction = optional_value(node, "read_fraction", sc.read_fraction, where);
  sc.max_txn_items = optional_value(node, "max_txn_items", sc.max_txn_items, where);
  sc.delay_min = optional_value(node, "delay_min", sc.delay_min, where);
  sc.delay_max = optional_value(node, "delay_max", sc.delay_max, where);
  sc.think_max = optional_value(node, "think_max", sc.think_max, where);
  sc.timeout_ticks = optional_value(node, "timeout_ticks", sc.timeout_ticks, where);
  sc.stall_ticks = optional_value(node, "stall_ticks", sc.stall_ticks, where);
  sc.max_ticks = optional_value(node, "max_ticks", sc.max_ticks, where);
  sc.seed = optional_value(node, "seed", sc.seed, where);
  if (const YAML::Node crashes = node["crashes"]) {
    if (!crashes.IsSequence()) config_error(where, "crashes must be a list");
    for (std::size_t i = 0; i < crashes.size(); ++i) {
      sc.crash_schedule.push_back(parse_crash(crashes[i], where + ".crashes[" + std::to_string(i) + "]"));
    }
  }
  sc.validate();
  return sc;
}

inline Config parse_config_node(const YAML::Node& root) {
  allow_keys(root, "config", {"version", "family", "families", "p", "scenario", "expect"});
  Config cfg;
  cfg.version = required<int>(root, "version", "config");
  if (cfg.version != 1) config_error("config", "unsupported version " + std::to_string(cfg.version));
  if (root["family"]) cfg.family = parse_family(root["family"], "family");
  if (const YAML::Node list = root["families"]) {
    if (!list.IsSequence()) config_error("families", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.families.push_back(parse_family(list[i], "families[" + std::to_string(i) + "]"));
    }
  }
  if (root["p"]) {
    cfg.p = required<std::vector<double>>(root, "p", "config");
    for (double x : cfg.p) (void)Probability(x);
  }
  if (root["scenario"]) {
    if (!cfg.family) config_error("scenario", "a scenario needs a top-level family");
    cfg.scenario = parse_scenario(root["scenario"], *cfg.family);
  }
  const auto expect = optional_value<std::string>(root, "expect", "must_succeed", "config");
  if (expect == "must_succeed") {
    cfg.expect = Expectation::MustSucceed;
  } else if (expect == "may_system_fail") {
    cfg.expect = Expectation::MaySystemFail;
  } else {
    config_error("expect", "must be must_succeed or may_system_fail");
  }
  return cfg;
}

}  // namespace detail

// Family and scenario violations surface as ConfigError too.
inline Config parse_config(const std::string& text) {
  try {
    return detail::parse_config_node(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("yaml: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace cqc
