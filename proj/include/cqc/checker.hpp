#pragma once

// Trace-only verification of one-copy serial isolation and liveness.
//
// Serial isolation rules:
//   R1  per item, committed versions run base+1, base+2, ... with no gap or
//       repeat, where base is the highest initial version of the item;
//   R2  every value a query returned is the value written at that version,
//       and the version was current at some point inside the query's
//       submit/response window;
//   R3  every committed update read values that match their versions, read
//       nothing already overwritten before it was submitted, and its writes
//       are its body evaluated on those reads;
//   R4  one commit per transaction, and a single serial order exists that
//       respects version order, read-from order and real-time order.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/family.hpp"
#include "cqc/trace.hpp"

namespace cqc {

struct Violation {
  std::string rule;
  std::vector<std::uint64_t> events;  // trace sequence numbers
  std::string explanation;
};

struct Verdict {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }

  bool has(std::string_view rule) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.rule == rule; });
  }

  std::string report() const {
    std::ostringstream out;
    for (const auto& v : violations) {
      out << v.rule << ": " << v.explanation;
      if (!v.events.empty()) {
        out << " [events";
        for (auto e : v.events) out << ' ' << e;
        out << ']';
      }
      out << '\n';
    }
    return out.str();
  }

  std::string summary(std::string_view check) const {
    return std::string(ok() ? "PASS " : "FAIL ") + std::string(check) + " violations=" +
           std::to_string(violations.size());
  }
};

namespace detail {

struct SubmitInfo {
  std::uint64_t seq = 0;
  std::size_t index = 0;
  std::uint64_t op = 0;
  Transaction txn;
};

struct ResponseInfo {
  std::uint64_t seq = 0;
  std::size_t index = 0;
  Outcome outcome = Outcome::Ok;
  std::vector<ItemRecord> values;
};

struct CommitInfo {
  std::uint64_t seq = 0;
  Transaction txn;
  ExecutionResult result;
};

struct TraceIndex {
  std::optional<QuorumFamily> family;
  std::vector<Value> initial_values;
  std::map<std::pair<ItemId, Version>, Value> initial;  // (item, version) -> value
  std::map<ItemId, Version> base;                       // highest initial version per item
  std::map<TxnId, SubmitInfo> submits;
  std::map<TxnId, ResponseInfo> responses;
  std::map<TxnId, CommitInfo> commits;
  std::vector<std::pair<TxnId, std::uint64_t>> divergent;  // second commit with a different result
};

inline TraceIndex index_trace(const Trace& trace) {
  TraceIndex ix;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const SimEvent& e = trace[i];
    if (i > 0 && (e.tick < trace[i - 1].tick || e.seq <= trace[i - 1].seq)) {
      malformed("events out of order at seq", std::to_string(e.seq));
    }
    switch (e.kind) {
      case EventKind::Config:
        if (ix.family) malformed("second Config event", std::to_string(e.seq));
        ix.family = parse_family_spec(e.family);
        if (e.n != ix.family->n()) malformed("Config site count disagrees with family", e.family);
        ix.initial_values = e.initial_values;
        for (std::size_t item = 0; item < e.initial_values.size(); ++item) {
          ix.initial[{static_cast<ItemId>(item), 0}] = e.initial_values[item];
          ix.base[static_cast<ItemId>(item)] = 0;
        }
        break;
      case EventKind::Init:
        for (const auto& r : e.values) {
          ix.initial[{r.item, r.version}] = r.value;
          ix.base[r.item] = std::max(ix.base[r.item], r.version);
        }
        break;
      case EventKind::Submit:
        if (!ix.submits.emplace(e.txn.id, SubmitInfo{e.seq, i, e.op, e.txn}).second) {
          malformed("duplicate submit of txn", std::to_string(e.txn.id));
        }
        break;
      case EventKind::Response:
        if (!ix.submits.count(e.txn_id)) malformed("response without submit for txn", std::to_string(e.txn_id));
        if (!ix.responses.emplace(e.txn_id, ResponseInfo{e.seq, i, e.outcome, e.values}).second) {
          malformed("duplicate response for txn", std::to_string(e.txn_id));
        }
        break;
      case EventKind::Deliver: {
        const Message& m = e.msg;
        if (m.kind != MsgKind::Commit && m.kind != MsgKind::Restart && m.kind != MsgKind::Committed) break;
        auto [it, fresh] = ix.commits.emplace(m.txn.id, CommitInfo{e.seq, m.txn, m.result});
        if (!fresh && it->second.result != m.result) ix.divergent.push_back({m.txn.id, e.seq});
        break;
      }
      default: break;
    }
  }
  if (!trace.empty() && !ix.family) malformed("trace has no Config event", "");
  return ix;
}

}  // namespace detail

inline Verdict check_serial_isolation(const Trace& trace) {
  Verdict v;
  if (trace.empty()) return v;
  const detail::TraceIndex ix = detail::index_trace(trace);
  auto add = [&](std::string rule, std::vector<std::uint64_t> events, std::string text) {
    v.violations.push_back({std::move(rule), std::move(events), std::move(text)});
  };
  auto rec = [](ItemId item, Version version) {
    return "item " + std::to_string(item) + " version " + std::to_string(version);
  };

  for (const auto& [txn, seq] : ix.divergent) {
    add("R4", {ix.commits.at(txn).seq, seq}, "transaction " + std::to_string(txn) + " committed with two results");
  }

  // R1: version sequences; writer lookup.
  std::map<std::pair<ItemId, Version>, TxnId> writer;
  std::map<ItemId, std::vector<std::pair<Version, TxnId>>> per_item;
  for (const auto& [txn, c] : ix.commits) {
    for (const auto& w : c.result.writes) per_item[w.item].push_back({w.version, txn});
  }
  for (auto& [item, list] : per_item) {
    std::sort(list.begin(), list.end());
    const Version base = ix.base.count(item) ? ix.base.at(item) : 0;
    Version expect = base + 1;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto [version, txn] = list[i];
      if (i > 0 && version == list[i - 1].first) {
        const TxnId other = list[i - 1].second;
        add("R1", {ix.commits.at(other).seq, ix.commits.at(txn).seq},
            rec(item, version) + " written by transactions " + std::to_string(other) + " and " +
                std::to_string(txn));
        continue;
      }
      if (version != expect) {
        add("R1", {ix.commits.at(txn).seq},
            rec(item, version) + " committed but expected version " + std::to_string(expect));
      }
      writer[{item, version}] = txn;
      expect = version + 1;
    }
  }

  auto value_at = [&](ItemId item, Version version) -> std::optional<Value> {
    if (auto it = writer.find({item, version}); it != writer.end()) {
      for (const auto& w : ix.commits.at(it->second).result.writes) {
        if (w.item == item && w.version == version) return w.value;
      }
    }
    if (auto it = ix.initial.find({item, version}); it != ix.initial.end()) return it->second;
    return std::nullopt;
  };

  // Acknowledged updates must have committed what they reported.
  for (const auto& [txn, r] : ix.responses) {
    const auto& s = ix.submits.at(txn);
    if (r.outcome != Outcome::Ok || s.txn.is_query()) continue;
    auto c = ix.commits.find(txn);
    if (c == ix.commits.end() || c->second.result.writes != r.values) {
      add("R4", {r.seq}, "update " + std::to_string(txn) + " acknowledged without a matching commit");
    }
  }

  // Nodes of the serialization graph: committed updates and answered queries.
  struct Node {
    TxnId txn;
    std::size_t submit_index;
    std::optional<std::size_t> response_index;
    std::vector<ItemRecord> reads;
    std::uint64_t seq;
  };
  std::vector<Node> nodes;
  std::map<TxnId, std::size_t> node_of;

  for (const auto& [txn, c] : ix.commits) {
    auto s = ix.submits.find(txn);
    if (s == ix.submits.end()) {
      add("R4", {c.seq}, "transaction " + std::to_string(txn) + " committed but never submitted");
      continue;
    }
    std::optional<std::size_t> resp;
    if (auto r = ix.responses.find(txn); r != ix.responses.end() && r->second.outcome == Outcome::Ok) {
      resp = r->second.index;
    }
    node_of[txn] = nodes.size();
    nodes.push_back({txn, s->second.index, resp, c.result.reads, c.seq});

    // R3: inputs match their versions, body recomputes the writes.
    const Transaction& body = s->second.txn;
    std::map<ItemId, Value> inputs;
    bool inputs_ok = true;
    for (const auto& r : c.result.reads) {
      auto expected = value_at(r.item, r.version);
      if (!expected || *expected != r.value) {
        add("R3", {c.seq}, "update " + std::to_string(txn) + " read " + rec(r.item, r.version) +
                               " with a value that version never held");
        inputs_ok = false;
      }
      inputs[r.item] = r.value;
    }
    std::set<ItemId> read_items;
    for (const auto& r : c.result.reads) read_items.insert(r.item);
    std::set<ItemId> written_items;
    for (const auto& w : c.result.writes) written_items.insert(w.item);
    if (read_items != body.read_set || written_items != body.write_set) {
      add("R3", {c.seq}, "update " + std::to_string(txn) + " committed a different item set than submitted");
      continue;
    }
    if (!inputs_ok) continue;
    for (const auto& op : body.body) {
      const Value expect = op.expr.eval(inputs);
      for (const auto& w : c.result.writes) {
        if (w.item == op.item && w.value != expect) {
          add("R3", {c.seq}, "update " + std::to_string(txn) + " wrote " + std::to_string(w.value) + " to item " +
                                 std::to_string(w.item) + ", body gives " + std::to_string(expect));
        }
      }
    }
    // Items both read and written advance by exactly one version.
    for (const auto& r : c.result.reads) {
      for (const auto& w : c.result.writes) {
        if (w.item == r.item && w.version != r.version + 1) {
          add("R3", {c.seq}, "update " + std::to_string(txn) + " wrote " + rec(w.item, w.version) +
                                 " from a read at version " + std::to_string(r.version));
        }
      }
    }
  }

  for (const auto& [txn, r] : ix.responses) {
    const auto& s = ix.submits.at(txn);
    if (r.outcome != Outcome::Ok || !s.txn.is_query()) continue;
    std::set<ItemId> items;
    for (const auto& rr : r.values) {
      items.insert(rr.item);
      auto expected = value_at(rr.item, rr.version);
      if (!expected || *expected != rr.value) {
        add("R2", {r.seq}, "query " + std::to_string(txn) + " returned " + rec(rr.item, rr.version) +
                               " with a value that version never held");
      }
    }
    if (items != s.txn.read_set) add("R2", {r.seq}, "query " + std::to_string(txn) + " returned the wrong items");
    node_of[txn] = nodes.size();
    nodes.push_back({txn, s.index, r.index, r.values, r.seq});
  }

  // Stale and future reads against real time.
  for (const auto& node : nodes) {
    const bool query = ix.submits.at(node.txn).txn.is_query();
    const std::string rule = query ? "R2" : "R3";
    for (const auto& r : node.reads) {
      auto next = writer.find({r.item, r.version + 1});
      if (next != writer.end() && next->second != node.txn) {
        auto resp = ix.responses.find(next->second);
        if (resp != ix.responses.end() && resp->second.outcome == Outcome::Ok &&
            resp->second.index < node.submit_index) {
          add(rule, {resp->second.seq, node.seq},
              (query ? "query " : "update ") + std::to_string(node.txn) + " read " + rec(r.item, r.version) +
                  " after a newer version was acknowledged");
        }
      }
      auto from = writer.find({r.item, r.version});
      if (from != writer.end() && node.response_index &&
          ix.submits.at(from->second).index > *node.response_index) {
        add(rule, {node.seq}, (query ? "query " : "update ") + std::to_string(node.txn) + " read " +
                                  rec(r.item, r.version) + " before its writer was submitted");
      }
    }
  }

  // R4: one serial order for versions, read-from and real time.
  const std::size_t count = nodes.size();
  std::vector<std::set<std::size_t>> out(count);
  auto edge = [&](std::size_t a, std::size_t b) {
    if (a != b) out[a].insert(b);
  };
  for (const auto& [key, txn] : writer) {
    auto next = writer.find({key.first, key.second + 1});
    if (next != writer.end() && node_of.count(txn) && node_of.count(next->second)) {
      edge(node_of[txn], node_of[next->second]);
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    for (const auto& r : nodes[i].reads) {
      if (auto w = writer.find({r.item, r.version}); w != writer.end() && node_of.count(w->second)) {
        edge(node_of[w->second], i);
      }
      if (auto w = writer.find({r.item, r.version + 1}); w != writer.end() && node_of.count(w->second)) {
        edge(i, node_of[w->second]);
      }
    }
  }
  std::vector<std::size_t> by_submit(count);
  for (std::size_t i = 0; i < count; ++i) by_submit[i] = i;
  std::sort(by_submit.begin(), by_submit.end(),
            [&](std::size_t a, std::size_t b) { return nodes[a].submit_index < nodes[b].submit_index; });
  for (std::size_t a = 0; a < count; ++a) {
    if (!nodes[a].response_index) continue;
    const std::size_t done = *nodes[a].response_index;
    auto first = std::upper_bound(by_submit.begin(), by_submit.end(), done,
                                  [&](std::size_t d, std::size_t b) { return d < nodes[b].submit_index; });
    for (auto it = first; it != by_submit.end(); ++it) edge(a, *it);
  }
  std::vector<int> indegree(count, 0);
  for (const auto& targets : out) {
    for (std::size_t b : targets) ++indegree[b];
  }
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < count; ++i) {
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::size_t ordered = 0;
  while (!ready.empty()) {
    const std::size_t a = ready.back();
    ready.pop_back();
    ++ordered;
    for (std::size_t b : out[a]) {
      if (--indegree[b] == 0) ready.push_back(b);
    }
  }
  if (ordered != count) {
    std::vector<std::uint64_t> stuck;
    for (std::size_t i = 0; i < count; ++i) {
      if (indegree[i] > 0) stuck.push_back(nodes[i].seq);
    }
    add("R4", stuck, std::to_string(count - ordered) + " transactions admit no serial order");
  }
  return v;
}

// --- liveness ----------------------------------------------------------------

enum class Expectation { MustSucceed, MaySystemFail };

// Expectation per workload operation; operations beyond the list may fail.
inline Verdict check_liveness(const Trace& trace, const std::vector<Expectation>& expectations) {
  Verdict v;
  if (trace.empty()) return v;
  const detail::TraceIndex ix = detail::index_trace(trace);
  const QuorumFamily& family = *ix.family;
  const int n = family.n();

  std::vector<bool> up(static_cast<std::size_t>(n) + 1, true);
  std::vector<bool> working(static_cast<std::size_t>(n) + 1, true);
  auto working_read_quorum = [&] {
    NodeSet live;
    for (NodeId s = 1; s <= n; ++s) {
      if (up[static_cast<std::size_t>(s)] && working[static_cast<std::size_t>(s)]) live.insert(s);
    }
    return family.is_read_quorum(live);
  };
  bool declared = false;
  std::set<std::uint64_t> succeeded;
  std::set<std::uint64_t> attempted;
  for (const SimEvent& e : trace) {
    const auto s = static_cast<std::size_t>(e.site);
    switch (e.kind) {
      case EventKind::Crash:
        up[s] = false;
        working[s] = false;
        break;
      case EventKind::Recover: up[s] = true; break;
      case EventKind::Mode: working[s] = e.mode == Mode::Working; break;
      case EventKind::SystemFailed:
        if (working_read_quorum()) {
          v.violations.push_back({"L3", {e.seq}, "system failure declared while a working read quorum existed"});
        }
        declared = true;
        break;
      case EventKind::Submit: attempted.insert(e.op); break;
      case EventKind::Response:
        if (e.outcome == Outcome::Ok) succeeded.insert(ix.submits.at(e.txn_id).op);
        if (e.outcome == Outcome::SystemFailure && !declared && working_read_quorum()) {
          v.violations.push_back(
              {"L3", {e.seq}, "system failure answered while a working read quorum existed"});
        }
        break;
      case EventKind::StallDetected:
        v.violations.push_back({"L2", {e.seq}, "no progress within the stall window"});
        break;
      default: break;
    }
  }
  for (std::size_t op = 0; op < expectations.size(); ++op) {
    if (expectations[op] == Expectation::MustSucceed && !succeeded.count(op)) {
      v.violations.push_back({"L1", {}, "operation " + std::to_string(op) + " never succeeded" +
                                            (attempted.count(op) ? "" : " (never submitted)")});
    }
  }
  return v;
}

inline std::vector<Expectation> all_must_succeed(std::size_t ops) {
  return std::vector<Expectation>(ops, Expectation::MustSucceed);
}

}  // namespace cqc
