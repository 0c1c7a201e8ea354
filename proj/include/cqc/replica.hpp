#pragma once

// One replica site of the circular quorum consensus protocol. The transaction
// manager, scheduler and data manager roles are folded into a single state
// machine driven through `step`; every interaction with other sites is a
// Message returned in Effects.
//
// Gaps in the protocol description are filled as follows:
//  * conflict queues are kept per item; a transaction is at the head when no
//    earlier conflicting transaction shares one of its item queues;
//  * a summited transaction keeps blocking conflicting replies at a site, and
//    reads of the items it writes stay blocked once applied, until the
//    coordinator multicasts Release (sent after every live participant has
//    acknowledged Committed);
//  * Commit and Restart carry the agreed execution result, so restarted or
//    late sites install values instead of re-executing;
//  * failure detection is the ClusterView oracle, consulted after a timeout;
//  * Reply carries a round number so a Reply overtaken by its own
//    CancelReply is recognised as void;
//  * when successors elected under different views coexist, participants
//    stay with the smallest live one and the others are retired by Release.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/family.hpp"
#include "cqc/message.hpp"
#include "cqc/transaction.hpp"

namespace cqc {

// Membership oracle provided by the harness.
class ClusterView {
 public:
  virtual ~ClusterView() = default;
  virtual int size() const = 0;
  // Not crashed.
  virtual bool is_up(NodeId site) const = 0;
  // Up and in Working mode.
  virtual bool is_working(NodeId site) const = 0;
  // Bumped every time the site crashes.
  virtual std::uint64_t incarnation(NodeId site) const = 0;
};

enum class Mode { Working, Failed };

struct QuorumTables {
  QuorumFamily family;
  std::vector<NodeSet> reads;         // minimal read quorums, canonical order
  std::vector<NodeSet> write_shapes;  // constructed write quorums, canonical order

  explicit QuorumTables(QuorumFamily f)
      : family(std::move(f)), reads(minimal_read_quorums(family)), write_shapes(write_quorum_shapes(family)) {}

  // First read quorum whose members are all working.
  std::optional<NodeSet> working_read_quorum(const ClusterView& view) const {
    for (NodeSet r : reads) {
      if (all_working(r, view)) return r;
    }
    return std::nullopt;
  }

  // First write quorum containing a working read quorum.
  std::optional<NodeSet> working_write_quorum(const ClusterView& view) const {
    for (NodeSet w : write_shapes) {
      if (family.is_read_quorum(working_in(w, view))) return w;
    }
    return std::nullopt;
  }

  static bool all_working(NodeSet s, const ClusterView& view) {
    for (NodeId id : s.members()) {
      if (!view.is_working(id)) return false;
    }
    return true;
  }

  static NodeSet working_in(NodeSet s, const ClusterView& view) {
    NodeSet out;
    for (NodeId id : s.members()) {
      if (view.is_working(id)) out.insert(id);
    }
    return out;
  }
};

// Smallest working member of the write quorum.
inline NodeId elect_coordinator(NodeSet write_quorum, NodeSet working) {
  NodeSet live = write_quorum & working;
  if (live.empty()) throw Error(ErrorCode::NoWorkingMember, "no working member in write quorum");
  return live.min();
}

// --- step interface ----------------------------------------------------------

struct ClientSubmit {
  Transaction txn;  // timestamp assigned by the coordinator
};
struct Deliver {
  Message msg;
};
struct Timeout {
  std::uint64_t token = 0;
};
struct RecoverStart {};

using Event = std::variant<ClientSubmit, Deliver, Timeout, RecoverStart>;

// Lost is reported by the harness when the coordinating site crashes.
enum class Outcome { Ok, SystemFailure, Lost };

struct ClientReply {
  TxnId txn = 0;
  Outcome outcome = Outcome::Ok;
  std::vector<ItemRecord> values;  // query: items read; update: items written
};

struct Outgoing {
  NodeId to = 0;
  Message msg;
};

struct Effects {
  std::vector<Outgoing> sends;
  std::vector<ClientReply> replies;
  std::vector<std::uint64_t> timers;  // each fires once after the scenario timeout
  bool declared_system_failure = false;
};

class Replica {
 public:
  Replica(NodeId id, std::shared_ptr<const QuorumTables> tables, std::vector<Value> initial_values)
      : id_(id), tables_(std::move(tables)) {
    store_.reserve(initial_values.size());
    for (std::size_t i = 0; i < initial_values.size(); ++i) {
      store_.push_back({static_cast<ItemId>(i), initial_values[i], 0});
    }
  }

  Effects step(const Event& event, const ClusterView& view) {
    Effects fx;
    Context ctx{view, fx};
    std::visit([&](const auto& e) { handle(e, ctx); }, event);
    return fx;
  }

  // Crash: volatile state is lost, permanent storage survives.
  void crash() {
    clear_volatile();
    mode_ = Mode::Failed;
  }

  NodeId id() const { return id_; }
  Mode mode() const { return mode_; }
  Clock clock() const { return clock_; }
  const std::vector<ItemRecord>& store() const { return store_; }
  const std::set<ItemId>& commit_set() const { return commit_set_; }
  bool recovering() const { return recovery_.has_value(); }

  // Overwrites permanent storage; scenario setup only.
  void set_store(std::vector<ItemRecord> store) { store_ = std::move(store); }

  // True if this site holds any state for the transaction.
  bool knows(TxnId txn) const {
    for (const auto& [ts, p] : participations_) {
      if (p.txn.id == txn) return true;
    }
    for (const auto& [ts, c] : coordinations_) {
      if (c.txn.id == txn) return true;
    }
    for (const auto& [qid, q] : queries_) {
      if (q.client_txn == txn) return true;
    }
    return finished_txns_.count(txn) != 0;
  }

  // Nothing in flight: no transaction, query or recovery state.
  bool idle() const {
    return participations_.empty() && coordinations_.empty() && queries_.empty() && deferred_reads_.empty() &&
           !recovery_;
  }

  // Transactions holding a reply mark (replied, not yet summited).
  std::vector<Transaction> replied_transactions() const {
    std::vector<Transaction> out;
    for (const auto& [ts, p] : participations_) {
      if (p.phase == Phase::Replied || p.phase == Phase::CancelPending) out.push_back(p.txn);
    }
    return out;
  }

 private:
  struct Context {
    const ClusterView& view;
    Effects& fx;
  };

  // --- participant bookkeeping ---------------------------------------------

  enum class Phase { Queued, Replied, CancelPending, Summited, Executing, CommitRequested, Committed };

  static bool holds_lock(Phase p) { return p >= Phase::Summited; }
  static bool reply_marked(Phase p) { return p == Phase::Replied || p == Phase::CancelPending; }

  struct Participation {
    Transaction txn;
    NodeSet write_quorum;
    NodeId coordinator = 0;
    std::uint64_t coordinator_incarnation = 0;
    Phase phase = Phase::Queued;
    std::optional<ExecutionResult> result;
    std::uint64_t query_id = 0;  // internal read during execution
    std::uint64_t round = 0;     // latest Reply's round
  };

  // --- coordinator bookkeeping ---------------------------------------------

  enum class Stage { CollectReplies, CollectCommitRequests, CollectCommitted };

  struct Coordination {
    Transaction txn;
    NodeSet write_quorum;
    NodeSet participants;  // sites holding the transaction
    std::map<NodeId, std::uint64_t> incarnation;
    Stage stage = Stage::CollectReplies;
    bool has_client = false;  // submitted here; adopted coordinations have none
    NodeSet failed;
    NodeSet replied;
    NodeSet summited;  // Summit recipients
    NodeSet commit_requested;
    NodeSet commit_targets;  // Commit or Restart recipients
    NodeSet committed;
    std::optional<ExecutionResult> result;
    std::map<NodeId, std::uint64_t> cancelled_round;  // replies up to this round are void
  };

  enum class QueryPurpose { Client, Execution, ReadAll };

  struct QueryCoordination {
    QueryPurpose purpose = QueryPurpose::Client;
    TxnId client_txn = 0;
    Timestamp owner;           // update whose execution issued the read
    NodeId requester = 0;      // recovering site for ReadAll
    std::vector<ItemId> items;
    NodeSet quorum;
    std::map<NodeId, std::uint64_t> incarnation;
    std::map<NodeId, std::vector<ItemRecord>> replies;
  };

  struct DeferredRead {
    NodeId from = 0;
    Message msg;
  };

  enum class RecoveryStage { AwaitReadAll, AwaitStart, StartCoordinator };

  struct Recovery {
    RecoveryStage stage = RecoveryStage::AwaitReadAll;
    NodeId contact = 0;  // ReadAll target, or the start coordinator followed
    std::uint64_t contact_incarnation = 0;
    // Start coordinator only.
    std::map<NodeId, std::vector<ItemRecord>> stores;
    NodeSet data_received;
    bool data_sent = false;
    int silent_timeouts = 0;  // AwaitStart: timeouts with no word from the contact
  };

  // Timer purposes.
  struct ParticipantTimer {
    Timestamp ts;
  };
  struct CoordinatorTimer {
    Timestamp ts;
  };
  struct QueryTimer {
    std::uint64_t query_id;
  };
  struct RecoveryTimer {};
  using TimerPurpose = std::variant<ParticipantTimer, CoordinatorTimer, QueryTimer, RecoveryTimer>;

  // --- helpers ---------------------------------------------------------------

  const QuorumFamily& family() const { return tables_->family; }
  int site_count() const { return family().n(); }

  NodeSet working_sites(const ClusterView& view) const {
    NodeSet out;
    for (NodeId s = 1; s <= site_count(); ++s) {
      if (view.is_working(s)) out.insert(s);
    }
    return out;
  }

  Message make(MsgKind kind) const {
    Message m;
    m.kind = kind;
    m.from = id_;
    m.clock = clock_;
    return m;
  }

  void send(Context& ctx, NodeId to, Message msg) { ctx.fx.sends.push_back({to, std::move(msg)}); }

  void multicast(Context& ctx, NodeSet to, const Message& msg) {
    for (NodeId s : to.members()) send(ctx, s, msg);
  }

  void arm(Context& ctx, TimerPurpose purpose) {
    const std::uint64_t token = next_token_++;
    timers_.emplace(token, std::move(purpose));
    ctx.fx.timers.push_back(token);
  }

  bool detected_failed(const ClusterView& view, NodeId site, std::uint64_t incarnation) const {
    return !view.is_working(site) || view.incarnation(site) != incarnation;
  }

  // Incarnation to remember for the sender of a message being handled. A
  // sender that is down (or, for protocol traffic, not working) sent it in an
  // earlier life, so it is remembered as already failed.
  static constexpr std::uint64_t kStaleIncarnation = ~std::uint64_t{0};
  static constexpr int kSilentRecoveryTimeouts = 4;  // then stop waiting for a start coordinator
  static std::uint64_t sender_incarnation(const ClusterView& view, NodeId s, bool need_working = true) {
    const bool alive = need_working ? view.is_working(s) : view.is_up(s);
    return alive ? view.incarnation(s) : kStaleIncarnation;
  }

  void clear_volatile() {
    commit_set_.clear();
    participations_.clear();
    queues_.clear();
    sd_queue_.clear();
    executing_.reset();
    coordinations_.clear();
    queries_.clear();
    deferred_reads_.clear();
    timers_.clear();
    recovery_.reset();
  }

  void install(const std::vector<ItemRecord>& records) {
    for (const auto& r : records) {
      auto& slot = store_.at(static_cast<std::size_t>(r.item));
      if (r.version > slot.version) slot = r;
    }
  }

  // Write an agreed result through the commit set.
  void apply_commit(const Transaction& txn, const ExecutionResult& result) {
    commit_set_ = txn.write_set;
    install(result.writes);
    commit_set_.clear();
  }

  std::vector<ItemRecord> read_items(const std::vector<ItemId>& items) const {
    std::vector<ItemRecord> out;
    for (ItemId item : items) out.push_back(store_.at(static_cast<std::size_t>(item)));
    return out;
  }

  // --- event handlers --------------------------------------------------------

  void handle(const ClientSubmit& e, Context& ctx);
  void handle(const Deliver& e, Context& ctx);
  void handle(const Timeout& e, Context& ctx);
  void handle(const RecoverStart& e, Context& ctx);

  // participant side
  void follow(Participation& p, NodeId from, const ClusterView& view);
  void on_update_request(const Message& m, Context& ctx);
  void on_confirm_cancel(const Message& m, Context& ctx);
  void on_summit(const Message& m, Context& ctx);
  void on_commit(const Message& m, Context& ctx);
  void on_release(const Message& m, Context& ctx);
  bool at_head(const Participation& p) const;
  bool blocked_by_others(const Participation& p) const;
  void try_replies(Context& ctx);
  void cancel_displaced(Context& ctx);
  void run_scheduler(Context& ctx);
  void finish_execution(const Timestamp& ts, const std::map<ItemId, ItemRecord>& inputs, Context& ctx);
  Message participant_message(MsgKind kind, const Participation& p) const;
  void report_state(Participation& p, Context& ctx);
  void participant_timeout(const Timestamp& ts, Context& ctx);
  void dequeue(const Participation& p);
  void release_participation(const Timestamp& ts);

  // coordinator side
  void start_update(Transaction txn, Context& ctx);
  void adopt(const Transaction& txn, NodeSet write_quorum, Stage stage, const std::optional<ExecutionResult>& result,
             Context& ctx);
  static Stage stage_for(Phase phase);
  void on_coordinator_message(const Message& m, Context& ctx);
  void advance(Coordination& c, Context& ctx);
  void coordinator_timeout(const Timestamp& ts, Context& ctx);
  void widen_arbitration(Coordination& c, Context& ctx);
  void finish_update(Coordination& c, Context& ctx);

  // queries
  std::uint64_t start_query(QueryCoordination q, Context& ctx);
  bool dispatch_query(std::uint64_t qid, QueryCoordination& q, Context& ctx);
  void on_query_read(const Message& m, Context& ctx);
  bool read_blocked(const Message& m) const;
  void retry_deferred_reads(Context& ctx);
  void on_query_reply(const Message& m, Context& ctx);
  void query_timeout(std::uint64_t qid, Context& ctx);
  void complete_query(std::uint64_t qid, Context& ctx);

  // failure and recovery
  void declare_system_failure(Context& ctx);
  void enter_failed(Context& ctx);
  void begin_recovery(Context& ctx);
  void on_recovery_message(const Message& m, Context& ctx);
  void recovery_timeout(Context& ctx);
  void seek_recovery_source(Context& ctx);
  void become_start_coordinator(Context& ctx);
  void become_working();

  NodeId id_;
  std::shared_ptr<const QuorumTables> tables_;
  Mode mode_ = Mode::Working;
  Clock clock_ = 0;
  std::uint64_t reply_round_ = 0;  // survives crashes so rounds never repeat
  std::vector<ItemRecord> store_;
  std::set<ItemId> commit_set_;

  std::map<Timestamp, Participation> participations_;
  std::map<ItemId, std::set<Timestamp>> queues_;  // pending, not yet summited
  std::deque<Timestamp> sd_queue_;                // summited, waiting to execute
  std::optional<Timestamp> executing_;
  // Outcome log: transactions released here. Kept across crashes so late
  // messages never resurrect a finished transaction.
  std::set<Timestamp> finished_;
  std::set<TxnId> finished_txns_;

  std::map<Timestamp, Coordination> coordinations_;
  std::map<std::uint64_t, QueryCoordination> queries_;
  std::deque<DeferredRead> deferred_reads_;
  std::optional<Recovery> recovery_;

  std::map<std::uint64_t, TimerPurpose> timers_;
  std::uint64_t next_token_ = 1;
  std::uint64_t next_query_ = 1;
};

}  // namespace cqc

#include "cqc/detail/replica_impl.hpp"
