#pragma once

// Simulation trace and its line format. One event per line:
//
//   <tick> <seq> <Kind> key=value ...
//
// Keys appear in a fixed order and fields at their default value are
// omitted. Lists are comma separated, an empty list is "-". Records are
// item:value:version. A transaction is id@clock.site/reads/writes/body where
// the body is ';'-separated writes: 3=c5 (constant), 3=k1 (copy of item 1),
// 3=s0,1+5 (sum plus constant).

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/family.hpp"
#include "cqc/message.hpp"
#include "cqc/replica.hpp"

namespace cqc {

using Tick = std::uint64_t;

enum class EventKind { Config, Init, Submit, Deliver, Crash, Recover, Mode, Response, SystemFailed, StallDetected, Final };

inline constexpr std::string_view kEventKindNames[] = {
    "Config", "Init", "Submit", "Deliver", "Crash", "Recover", "Mode", "Response", "SystemFailed", "StallDetected", "Final",
};

inline std::string_view to_string(EventKind k) { return kEventKindNames[static_cast<int>(k)]; }
inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Ok: return "Ok";
    case Outcome::SystemFailure: return "SystemFailure";
    case Outcome::Lost: return "Lost";
  }
  return "?";
}
inline std::string_view to_string(Mode m) { return m == Mode::Working ? "Working" : "Failed"; }

struct SimEvent {
  Tick tick = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Config;

  NodeId site = 0;  // subject site; receiver for Deliver

  // Config
  int n = 0;
  std::string family;  // family_spec() text
  std::vector<Value> initial_values;

  // Deliver
  Message msg;
  Clock rclock = 0;  // receiver clock after handling

  // Submit
  Transaction txn;
  std::uint64_t op = 0;  // workload operation; retries share it

  // Response
  TxnId txn_id = 0;
  Outcome outcome = Outcome::Ok;
  std::vector<ItemRecord> values;  // also Init and Final stores

  // Mode, Final
  Mode mode = Mode::Working;
  bool up = true;

  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

using Trace = std::vector<SimEvent>;

// --- family spec -------------------------------------------------------------

// Compact round-trippable family text: alpha:2,2,2:t=1:full=1, beta:1,1,1:t=2,
// majority:16:2:15.
inline std::string family_spec(const QuorumFamily& f) {
  auto arcs = [](const CircularStructure& s) {
    std::string out;
    for (int a : s.arc_sizes()) out += (out.empty() ? "" : ",") + std::to_string(a);
    return out;
  };
  if (auto* a = f.as_alpha()) {
    return "alpha:" + arcs(a->structure) + ":t=" + std::to_string(a->t) + ":full=" + (a->full_arc_reads ? "1" : "0");
  }
  if (auto* b = f.as_beta()) return "beta:" + arcs(b->structure) + ":t=" + std::to_string(b->t);
  const auto* m = f.as_majority();
  return "majority:" + std::to_string(m->n) + ":" + std::to_string(m->v_r) + ":" + std::to_string(m->v_w);
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] inline void malformed(std::string_view what, std::string_view text) {
  throw Error(ErrorCode::MalformedTrace, std::string(what) + ": '" + std::string(text) + "'");
}

template <class T>
T parse_number(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) malformed("bad number", s);
  return v;
}

template <class T>
std::vector<T> parse_list(std::string_view s) {
  std::vector<T> out;
  if (s == "-" || s.empty()) return out;
  for (auto part : split(s, ',')) out.push_back(parse_number<T>(part));
  return out;
}

template <class Range>
std::string join(const Range& r) {
  std::string out;
  for (const auto& v : r) out += (out.empty() ? "" : ",") + std::to_string(v);
  return out.empty() ? "-" : out;
}

inline std::string_view strip_prefix(std::string_view s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) != prefix) malformed("expected " + std::string(prefix), s);
  return s.substr(prefix.size());
}

}  // namespace detail

inline QuorumFamily parse_family_spec(std::string_view text) {
  using namespace detail;
  const auto parts = split(text, ':');
  try {
    if (parts[0] == "alpha" && parts.size() == 4) {
      auto arcs = parse_list<int>(parts[1]);
      return QuorumFamily::alpha(CircularStructure::build(arcs), parse_number<int>(strip_prefix(parts[2], "t=")),
                                 strip_prefix(parts[3], "full=") == "1");
    }
    if (parts[0] == "beta" && parts.size() == 3) {
      auto arcs = parse_list<int>(parts[1]);
      return QuorumFamily::beta(CircularStructure::build(arcs), parse_number<int>(strip_prefix(parts[2], "t=")));
    }
    if (parts[0] == "majority" && parts.size() == 4) {
      return QuorumFamily::majority(parse_number<int>(parts[1]), parse_number<int>(parts[2]),
                                    parse_number<int>(parts[3]));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedTrace) throw;
    malformed(e.what(), text);
  }
  malformed("bad family", text);
}

// --- records and transactions --------------------------------------------------

inline std::string format_records(const std::vector<ItemRecord>& records) {
  if (records.empty()) return "-";
  std::string out;
  for (const auto& r : records) {
    if (!out.empty()) out += ',';
    out += std::to_string(r.item) + ":" + std::to_string(r.value) + ":" + std::to_string(r.version);
  }
  return out;
}

inline std::vector<ItemRecord> parse_records(std::string_view s) {
  using namespace detail;
  std::vector<ItemRecord> out;
  if (s == "-") return out;
  for (auto part : split(s, ',')) {
    auto f = split(part, ':');
    if (f.size() != 3) malformed("bad record", part);
    out.push_back({parse_number<ItemId>(f[0]), parse_number<Value>(f[1]), parse_number<Version>(f[2])});
  }
  return out;
}

inline std::string format_timestamp(const Timestamp& ts) { return ts.to_string(); }

inline Timestamp parse_timestamp(std::string_view s) {
  auto f = detail::split(s, '.');
  if (f.size() != 2) detail::malformed("bad timestamp", s);
  return {detail::parse_number<Clock>(f[0]), detail::parse_number<NodeId>(f[1])};
}

inline std::string format_expr(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Constant: return "c" + std::to_string(e.constant);
    case Expr::Kind::Copy: return "k" + std::to_string(e.items.at(0));
    case Expr::Kind::Sum: return "s" + detail::join(e.items) + "+" + std::to_string(e.constant);
  }
  return "";
}

inline Expr parse_expr(std::string_view s) {
  using namespace detail;
  if (s.empty()) malformed("empty expression", s);
  const char tag = s[0];
  s.remove_prefix(1);
  if (tag == 'c') return Expr::make_constant(parse_number<Value>(s));
  if (tag == 'k') return Expr::make_copy(parse_number<ItemId>(s));
  if (tag == 's') {
    const auto plus = s.rfind('+');
    if (plus == std::string_view::npos) malformed("bad sum", s);
    return Expr::make_sum(parse_list<ItemId>(s.substr(0, plus)), parse_number<Value>(s.substr(plus + 1)));
  }
  malformed("bad expression", s);
}

inline std::string format_txn(const Transaction& t) {
  std::string body;
  for (const auto& op : t.body) {
    if (!body.empty()) body += ';';
    body += std::to_string(op.item) + "=" + format_expr(op.expr);
  }
  return std::to_string(t.id) + "@" + format_timestamp(t.ts) + "/" + detail::join(t.read_set) + "/" +
         detail::join(t.write_set) + "/" + (body.empty() ? "-" : body);
}

inline Transaction parse_txn(std::string_view s) {
  using namespace detail;
  const auto at = s.find('@');
  if (at == std::string_view::npos) malformed("bad transaction", s);
  auto f = split(s.substr(at + 1), '/');
  if (f.size() != 4) malformed("bad transaction", s);
  Transaction t;
  t.id = parse_number<TxnId>(s.substr(0, at));
  t.ts = parse_timestamp(f[0]);
  for (ItemId i : parse_list<ItemId>(f[1])) t.read_set.insert(i);
  for (ItemId i : parse_list<ItemId>(f[2])) t.write_set.insert(i);
  if (f[3] != "-") {
    for (auto op : split(f[3], ';')) {
      const auto eq = op.find('=');
      if (eq == std::string_view::npos) malformed("bad write", op);
      t.body.push_back({parse_number<ItemId>(op.substr(0, eq)), parse_expr(op.substr(eq + 1))});
    }
  }
  return t;
}

// --- events ------------------------------------------------------------------

inline std::string format_event(const SimEvent& e) {
  std::ostringstream out;
  out << e.tick << ' ' << e.seq << ' ' << to_string(e.kind);
  auto kv = [&](std::string_view k, const auto& v) { out << ' ' << k << '=' << v; };
  switch (e.kind) {
    case EventKind::Config:
      kv("n", e.n);
      kv("family", e.family);
      kv("values", detail::join(e.initial_values));
      break;
    case EventKind::Init:
      kv("site", e.site);
      kv("store", format_records(e.values));
      break;
    case EventKind::Submit:
      kv("site", e.site);
      kv("op", e.op);
      kv("txn", format_txn(e.txn));
      break;
    case EventKind::Deliver: {
      const Message& m = e.msg;
      const Message blank;
      kv("kind", to_string(m.kind));
      kv("from", m.from);
      kv("to", e.site);
      kv("clock", m.clock);
      kv("rclock", e.rclock);
      if (m.ts != blank.ts) kv("ts", format_timestamp(m.ts));
      if (m.txn != blank.txn) kv("txn", format_txn(m.txn));
      if (m.quorum != blank.quorum) kv("quorum", detail::join(m.quorum.members()));
      if (m.query_id != 0) kv("qid", m.query_id);
      if (m.round != 0) kv("round", m.round);
      if (m.recovery) kv("recovery", 1);
      if (!m.items.empty()) kv("items", detail::join(m.items));
      if (!m.records.empty()) kv("records", format_records(m.records));
      if (!m.result.reads.empty()) kv("reads", format_records(m.result.reads));
      if (!m.result.writes.empty()) kv("writes", format_records(m.result.writes));
      break;
    }
    case EventKind::Crash:
    case EventKind::Recover:
    case EventKind::SystemFailed:
      kv("site", e.site);
      break;
    case EventKind::Mode:
      kv("site", e.site);
      kv("mode", to_string(e.mode));
      break;
    case EventKind::Response:
      kv("site", e.site);
      kv("txn", e.txn_id);
      kv("outcome", to_string(e.outcome));
      kv("values", format_records(e.values));
      break;
    case EventKind::StallDetected: break;
    case EventKind::Final:
      kv("site", e.site);
      kv("up", e.up ? 1 : 0);
      kv("mode", to_string(e.mode));
      kv("store", format_records(e.values));
      break;
  }
  return out.str();
}

inline SimEvent parse_event(std::string_view line) {
  using namespace detail;
  auto tokens = split(line, ' ');
  if (tokens.size() < 3) malformed("short event line", line);
  SimEvent e;
  e.tick = parse_number<Tick>(tokens[0]);
  e.seq = parse_number<std::uint64_t>(tokens[1]);
  bool known = false;
  for (int i = 0; i < static_cast<int>(std::size(kEventKindNames)); ++i) {
    if (kEventKindNames[i] == tokens[2]) {
      e.kind = static_cast<EventKind>(i);
      known = true;
    }
  }
  if (!known) malformed("unknown event kind", tokens[2]);
  for (std::size_t i = 3; i < tokens.size(); ++i) {
    const auto tok = tokens[i];
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) malformed("expected key=value", tok);
    const auto key = tok.substr(0, eq);
    const auto val = tok.substr(eq + 1);
    if (key == "n") e.n = parse_number<int>(val);
    else if (key == "family") e.family = std::string(val);
    else if (key == "values" && e.kind == EventKind::Config) e.initial_values = parse_list<Value>(val);
    else if (key == "values" || key == "store") e.values = parse_records(val);
    else if (key == "site" || key == "to") e.site = parse_number<NodeId>(val);
    else if (key == "op") e.op = parse_number<std::uint64_t>(val);
    else if (key == "txn" && e.kind == EventKind::Submit) e.txn = parse_txn(val);
    else if (key == "txn" && e.kind == EventKind::Response) e.txn_id = parse_number<TxnId>(val);
    else if (key == "txn") e.msg.txn = parse_txn(val);
    else if (key == "outcome") {
      if (val == "Ok") e.outcome = Outcome::Ok;
      else if (val == "SystemFailure") e.outcome = Outcome::SystemFailure;
      else if (val == "Lost") e.outcome = Outcome::Lost;
      else malformed("bad outcome", val);
    } else if (key == "mode") {
      if (val == "Working") e.mode = Mode::Working;
      else if (val == "Failed") e.mode = Mode::Failed;
      else malformed("bad mode", val);
    } else if (key == "up") e.up = parse_number<int>(val) != 0;
    else if (key == "kind") {
      auto k = parse_msg_kind(val);
      if (!k) malformed("bad message kind", val);
      e.msg.kind = *k;
    } else if (key == "from") e.msg.from = parse_number<NodeId>(val);
    else if (key == "clock") e.msg.clock = parse_number<Clock>(val);
    else if (key == "rclock") e.rclock = parse_number<Clock>(val);
    else if (key == "ts") e.msg.ts = parse_timestamp(val);
    else if (key == "quorum") {
      for (NodeId s : parse_list<NodeId>(val)) e.msg.quorum.insert(s);
    } else if (key == "qid") e.msg.query_id = parse_number<std::uint64_t>(val);
    else if (key == "round") e.msg.round = parse_number<std::uint64_t>(val);
    else if (key == "recovery") e.msg.recovery = parse_number<int>(val) != 0;
    else if (key == "items") e.msg.items = parse_list<ItemId>(val);
    else if (key == "records") e.msg.records = parse_records(val);
    else if (key == "reads") e.msg.result.reads = parse_records(val);
    else if (key == "writes") e.msg.result.writes = parse_records(val);
    else malformed("unknown key", key);
  }
  return e;
}

inline void write_trace(std::ostream& out, const Trace& trace) {
  for (const auto& e : trace) out << format_event(e) << '\n';
}

inline Trace read_trace(std::istream& in) {
  Trace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    trace.push_back(parse_event(line));
  }
  return trace;
}

}  // namespace cqc
