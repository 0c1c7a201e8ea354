#pragma once

// Deterministic discrete-event harness for the replica protocol: seeded
// message delays, crash/recover injection, closed-loop clients and a global
// trace.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <variant>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/family.hpp"
#include "cqc/replica.hpp"
#include "cqc/trace.hpp"

namespace cqc {

struct CrashEntry {
  enum class Action { Crash, Recover };
  Tick tick = 0;
  NodeId site = 0;
  Action action = Action::Crash;

  friend bool operator==(const CrashEntry&, const CrashEntry&) = default;
};

struct Scenario {
  QuorumFamily family = make_rowa(1);
  std::vector<Value> initial_values{0};
  std::map<NodeId, std::vector<ItemRecord>> initial_stores;  // per-site overrides
  int clients = 1;
  int txn_count = 0;
  double read_fraction = 0.5;
  int max_txn_items = 3;
  Tick delay_min = 1;
  Tick delay_max = 5;
  Tick think_max = 3;  // client pause between operations, uniform in [0, think_max]
  Tick timeout_ticks = 40;
  std::vector<CrashEntry> crash_schedule;
  std::uint64_t seed = 1;
  Tick max_ticks = 1'000'000;
  Tick stall_ticks = 4000;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidParams, what); };
    const int n = family.n();
    if (n > kMaxEnumerationNodes) fail("simulation supports at most 24 sites");
    if (initial_values.empty()) fail("scenario needs at least one item");
    if (!(read_fraction >= 0.0 && read_fraction <= 1.0)) fail("read_fraction must lie in [0,1]");
    if (txn_count < 0) fail("txn_count must be non-negative");
    if (txn_count > 0 && clients < 1) fail("a workload needs at least one client");
    if (max_txn_items < 1) fail("max_txn_items must be positive");
    if (delay_min < 1 || delay_max < delay_min) fail("delays must satisfy 1 <= min <= max");
    if (timeout_ticks < 1) fail("timeout_ticks must be positive");
    if (stall_ticks < 1) fail("stall_ticks must be positive");
    for (const auto& c : crash_schedule) {
      if (c.tick >= max_ticks) fail("crash schedule entry at or after max_ticks");
      if (c.site < 1 || c.site > n) fail("crash schedule names an unknown site");
    }
    for (const auto& [site, store] : initial_stores) {
      if (site < 1 || site > n) fail("initial store for an unknown site");
      if (store.size() != initial_values.size()) fail("initial store size differs from item count");
      for (std::size_t i = 0; i < store.size(); ++i) {
        if (store[i].item != static_cast<ItemId>(i)) fail("initial store items out of order");
      }
    }
  }
};

// Operation list for a scenario: exactly round(read_fraction * txn_count)
// queries at seeded positions, each touching 1..max_txn_items items.
inline std::vector<Transaction> generate_workload(const Scenario& sc, std::mt19937_64& rng) {
  const int items = static_cast<int>(sc.initial_values.size());
  const int queries = static_cast<int>(std::lround(sc.read_fraction * sc.txn_count));
  std::vector<bool> is_query(static_cast<std::size_t>(sc.txn_count), false);
  std::fill(is_query.begin(), is_query.begin() + queries, true);
  std::shuffle(is_query.begin(), is_query.end(), rng);

  std::vector<ItemId> all(static_cast<std::size_t>(items));
  for (int i = 0; i < items; ++i) all[static_cast<std::size_t>(i)] = i;
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  std::vector<Transaction> ops;
  for (bool query : is_query) {
    std::shuffle(all.begin(), all.end(), rng);
    const int size = uniform(1, std::min(sc.max_txn_items, items));
    std::vector<ItemId> chosen(all.begin(), all.begin() + size);
    Transaction t;
    if (query) {
      t.read_set.insert(chosen.begin(), chosen.end());
    } else {
      const int writes = uniform(1, size);
      for (int i = 0; i < size; ++i) {
        const ItemId item = chosen[static_cast<std::size_t>(i)];
        if (i < writes) {
          t.write_set.insert(item);
          if (uniform(0, 1)) t.read_set.insert(item);
        } else {
          t.read_set.insert(item);
        }
      }
      const std::vector<ItemId> reads(t.read_set.begin(), t.read_set.end());
      for (ItemId item : t.write_set) {
        const int shape = reads.empty() ? 0 : uniform(0, 2);
        Expr e;
        if (shape == 0) {
          e = Expr::make_constant(uniform(1, 100));
        } else if (shape == 1) {
          e = Expr::make_copy(reads[static_cast<std::size_t>(uniform(0, static_cast<int>(reads.size()) - 1))]);
        } else {
          e = Expr::make_sum(reads, uniform(0, 9));
        }
        t.body.push_back({item, e});
      }
    }
    t.validate();
    ops.push_back(std::move(t));
  }
  return ops;
}

class Simulation : public ClusterView {
 public:
  explicit Simulation(Scenario sc) : sc_(std::move(sc)), rng_(sc_.seed) {
    sc_.validate();
    const int n = sc_.family.n();
    auto tables = std::make_shared<const QuorumTables>(sc_.family);
    for (NodeId s = 1; s <= n; ++s) {
      replicas_.emplace_back(s, tables, sc_.initial_values);
      if (auto it = sc_.initial_stores.find(s); it != sc_.initial_stores.end()) replicas_.back().set_store(it->second);
    }
    up_.assign(static_cast<std::size_t>(n), true);
    incarnation_.assign(static_cast<std::size_t>(n), 0);
    modes_.assign(static_cast<std::size_t>(n), Mode::Working);
    ops_ = generate_workload(sc_, rng_);
    clients_.resize(static_cast<std::size_t>(std::max(sc_.clients, 0)));
  }

  // ClusterView
  int size() const override { return static_cast<int>(replicas_.size()); }
  bool is_up(NodeId s) const override { return up_.at(idx(s)); }
  bool is_working(NodeId s) const override { return is_up(s) && replicas_.at(idx(s)).mode() == Mode::Working; }
  std::uint64_t incarnation(NodeId s) const override { return incarnation_.at(idx(s)); }

  Trace run() {
    record_config();
    for (std::size_t i = 0; i < sc_.crash_schedule.size(); ++i) push(sc_.crash_schedule[i].tick, Scheduled{i});
    for (std::size_t c = 0; c < clients_.size(); ++c) push(think(), ClientWake{c});

    while (!queue_.empty()) {
      Pending next = queue_.top();
      queue_.pop();
      if (next.tick > sc_.max_ticks) break;
      now_ = next.tick;
      std::visit([&](const auto& item) { process(item); }, next.item);
      if (quiescent()) break;
      if (now_ - last_progress_ > sc_.stall_ticks && busy()) {
        emit(EventKind::StallDetected);
        break;
      }
    }
    record_final();
    return std::move(trace_);
  }

 private:
  struct Delivery {
    NodeId to;
    Message msg;
  };
  struct TimerFire {
    NodeId site;
    std::uint64_t token;
    std::uint64_t incarnation;
  };
  struct ClientWake {
    std::size_t client;
  };
  struct Scheduled {
    std::size_t entry;
  };
  struct Pending {
    Tick tick;
    std::uint64_t seq;
    std::variant<Delivery, TimerFire, ClientWake, Scheduled> item;
    bool operator>(const Pending& o) const { return std::tie(tick, seq) > std::tie(o.tick, o.seq); }
  };

  struct Attempt {
    std::size_t op;
    TxnId txn;
    NodeId site;
  };
  struct Client {
    std::optional<std::size_t> op;  // operation in progress
    std::optional<Attempt> attempt;
  };

  static std::size_t idx(NodeId s) { return static_cast<std::size_t>(s - 1); }

  template <class T>
  void push(Tick tick, T item) {
    if (std::is_same_v<T, Delivery>) ++in_flight_;
    queue_.push({tick, queue_seq_++, std::move(item)});
  }

  Tick think() { return std::uniform_int_distribution<Tick>(0, sc_.think_max)(rng_); }
  Tick delay() { return std::uniform_int_distribution<Tick>(sc_.delay_min, sc_.delay_max)(rng_); }

  SimEvent& emit(EventKind kind, NodeId site = 0) {
    SimEvent e;
    e.tick = now_;
    e.seq = trace_.size();
    e.kind = kind;
    e.site = site;
    trace_.push_back(std::move(e));
    if (kind != EventKind::Deliver) last_progress_ = now_;
    return trace_.back();
  }

  void record_config() {
    auto& e = emit(EventKind::Config);
    e.n = size();
    e.family = family_spec(sc_.family);
    e.initial_values = sc_.initial_values;
    for (const auto& [site, store] : sc_.initial_stores) emit(EventKind::Init, site).values = store;
  }

  void record_final() {
    for (NodeId s = 1; s <= size(); ++s) {
      auto& e = emit(EventKind::Final, s);
      e.up = is_up(s);
      e.mode = replicas_[idx(s)].mode();
      e.values = replicas_[idx(s)].store();
    }
  }

  // Run one replica step and turn its effects into trace events and queue
  // entries.
  void drive(NodeId site, const Event& event) {
    Replica& r = replicas_[idx(site)];
    Effects fx = r.step(event, *this);
    if (auto* d = std::get_if<Deliver>(&event)) {
      auto& e = emit(EventKind::Deliver, site);
      e.msg = d->msg;
      e.rclock = r.clock();
    }
    if (fx.declared_system_failure) emit(EventKind::SystemFailed, site);
    if (r.mode() != modes_[idx(site)]) {
      modes_[idx(site)] = r.mode();
      emit(EventKind::Mode, site).mode = r.mode();
    }
    for (auto& out : fx.sends) push(now_ + delay(), Delivery{out.to, std::move(out.msg)});
    for (std::uint64_t token : fx.timers) push(now_ + sc_.timeout_ticks, TimerFire{site, token, incarnation(site)});
    for (auto& reply : fx.replies) respond(site, reply);
  }

  void respond(NodeId site, const ClientReply& reply) {
    auto it = attempts_.find(reply.txn);
    if (it == attempts_.end()) return;  // resolved already
    const std::size_t c = it->second;
    attempts_.erase(it);
    auto& e = emit(EventKind::Response, site);
    e.txn_id = reply.txn;
    e.outcome = reply.outcome;
    e.values = reply.values;
    Client& client = clients_[c];
    client.attempt.reset();
    if (reply.outcome != Outcome::Lost) {
      client.op.reset();
      ++completed_;
    }
    push(now_ + think(), ClientWake{c});
  }

  void process(const Delivery& d) {
    --in_flight_;
    if (!is_up(d.to)) return;  // crash-stop: dropped
    drive(d.to, Deliver{d.msg});
  }

  void process(const TimerFire& t) {
    if (!is_up(t.site) || incarnation(t.site) != t.incarnation) return;
    drive(t.site, Timeout{t.token});
  }

  void process(const ClientWake& w) {
    Client& client = clients_[w.client];
    if (client.attempt) return;
    if (!client.op) {
      if (next_op_ >= ops_.size()) return;
      client.op = next_op_++;
    }
    // Uniformly random working site; failing that any live site, which will
    // answer with a system failure.
    std::vector<NodeId> working, live;
    for (NodeId s = 1; s <= size(); ++s) {
      if (is_working(s)) working.push_back(s);
      if (is_up(s)) live.push_back(s);
    }
    const auto& pool = working.empty() ? live : working;
    if (pool.empty()) {
      push(now_ + sc_.timeout_ticks, ClientWake{w.client});
      return;
    }
    const NodeId site = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
    Transaction txn = ops_[*client.op];
    txn.id = next_txn_++;
    client.attempt = Attempt{*client.op, txn.id, site};
    attempts_[txn.id] = w.client;
    auto& e = emit(EventKind::Submit, site);
    e.op = *client.op;
    e.txn = txn;
    drive(site, ClientSubmit{std::move(txn)});
  }

  void process(const Scheduled& s) {
    const CrashEntry& entry = sc_.crash_schedule[s.entry];
    ++schedule_done_;
    const NodeId site = entry.site;
    if (entry.action == CrashEntry::Action::Crash) {
      if (!is_up(site)) return;
      emit(EventKind::Crash, site);
      replicas_[idx(site)].crash();
      up_[idx(site)] = false;
      ++incarnation_[idx(site)];
      modes_[idx(site)] = Mode::Failed;
      // Clients waiting on the crashed coordinator learn the attempt is lost.
      std::vector<TxnId> lost;
      for (const auto& [txn, c] : attempts_) {
        if (clients_[c].attempt && clients_[c].attempt->site == site) lost.push_back(txn);
      }
      for (TxnId txn : lost) respond(site, {txn, Outcome::Lost, {}});
    } else {
      if (is_up(site)) return;
      emit(EventKind::Recover, site);
      up_[idx(site)] = true;
      drive(site, RecoverStart{});
    }
  }

  bool busy() const {
    if (!attempts_.empty()) return true;
    return std::any_of(replicas_.begin(), replicas_.end(), [&](const Replica& r) { return is_up(r.id()) && !r.idle(); });
  }

  bool quiescent() const {
    return in_flight_ == 0 && completed_ == ops_.size() && schedule_done_ == sc_.crash_schedule.size() && !busy();
  }

  Scenario sc_;
  std::mt19937_64 rng_;
  std::vector<Replica> replicas_;
  std::vector<bool> up_;
  std::vector<std::uint64_t> incarnation_;
  std::vector<Mode> modes_;

  std::vector<Transaction> ops_;
  std::vector<Client> clients_;
  std::map<TxnId, std::size_t> attempts_;  // outstanding attempt -> client
  std::size_t next_op_ = 0;
  std::size_t completed_ = 0;
  TxnId next_txn_ = 1;

  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  std::uint64_t queue_seq_ = 0;
  std::size_t in_flight_ = 0;
  std::size_t schedule_done_ = 0;
  Tick now_ = 0;
  Tick last_progress_ = 0;
  Trace trace_;
};

inline Trace run(const Scenario& scenario) { return Simulation(scenario).run(); }

// Final per-site state recorded at the end of a trace.
struct FinalSite {
  NodeId site = 0;
  bool up = false;
  Mode mode = Mode::Failed;
  std::vector<ItemRecord> store;
};

inline std::vector<FinalSite> final_sites(const Trace& trace) {
  std::vector<FinalSite> out;
  for (const auto& e : trace) {
    if (e.kind == EventKind::Final) out.push_back({e.site, e.up, e.mode, e.values});
  }
  return out;
}

}  // namespace cqc
