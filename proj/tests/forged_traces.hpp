#pragma once

// Hand-forged invalid traces for the checker, each derived from a clean run
// by editing what the sites saw committed or what a client was told.

#include <algorithm>
#include <functional>
#include <set>

#include "cqc/simnet.hpp"

namespace cqc::testing {

// Several updates and queries on one item.
inline Trace clean_trace() {
  Scenario sc;
  sc.family = make_rowa(3);
  sc.initial_values = {100};
  sc.clients = 2;
  sc.txn_count = 12;
  sc.read_fraction = 0.5;
  sc.seed = 21;
  return run(sc);
}

inline bool is_commit(const SimEvent& e) {
  return e.kind == EventKind::Deliver &&
         (e.msg.kind == MsgKind::Commit || e.msg.kind == MsgKind::Restart || e.msg.kind == MsgKind::Committed);
}

inline std::vector<TxnId> committed_updates(const Trace& t) {
  std::vector<TxnId> out;
  for (const auto& e : t) {
    if (is_commit(e) && !e.msg.result.writes.empty() &&
        std::find(out.begin(), out.end(), e.msg.txn.id) == out.end()) {
      out.push_back(e.msg.txn.id);
    }
  }
  return out;
}

// Rewrites every commit of `txn`, and its acknowledgement, the same way.
inline void edit_commits(Trace& t, TxnId txn, const std::function<void(ExecutionResult&)>& edit) {
  for (auto& e : t) {
    if (is_commit(e) && e.msg.txn.id == txn) edit(e.msg.result);
    if (e.kind == EventKind::Response && e.txn_id == txn) {
      ExecutionResult r{{}, e.values};
      edit(r);
      e.values = r.writes;
    }
  }
}

// The first update skips a version.
inline Trace forge_version_gap() {
  Trace t = clean_trace();
  edit_commits(t, committed_updates(t).front(), [](ExecutionResult& r) {
    for (auto& w : r.writes) ++w.version;
  });
  return t;
}

// The second update claims the version the first one installed.
inline Trace forge_simultaneous_commit() {
  Trace t = clean_trace();
  const auto ups = committed_updates(t);
  Version taken = 0;
  for (const auto& e : t) {
    if (is_commit(e) && e.msg.txn.id == ups.at(0)) taken = e.msg.result.writes.at(0).version;
  }
  edit_commits(t, ups.at(1), [&](ExecutionResult& r) {
    for (auto& w : r.writes) w.version = taken;
  });
  return t;
}

// A query submitted after an update was acknowledged returns the initial copy.
// Empty when the clean run has no such query.
inline Trace forge_stale_read() {
  Trace t = clean_trace();
  bool acked = false;
  std::set<TxnId> late;
  for (const auto& e : t) {
    if (e.kind == EventKind::Response && !e.values.empty() && e.values[0].version > 0) acked = true;
    if (e.kind == EventKind::Submit && acked && e.txn.write_set.empty()) late.insert(e.txn.id);
  }
  for (auto& e : t) {
    if (e.kind == EventKind::Response && late.count(e.txn_id) && e.outcome == Outcome::Ok) {
      e.values[0] = {0, 100, 0};
      return t;
    }
  }
  return {};
}

}  // namespace cqc::testing
