#pragma once

// Out-of-line members of cqc::Replica; included from replica.hpp.

namespace cqc {

// --- entry points ------------------------------------------------------------

inline void Replica::handle(const ClientSubmit& e, Context& ctx) {
  if (mode_ != Mode::Working) {
    ctx.fx.replies.push_back({e.txn.id, Outcome::SystemFailure, {}});
    return;
  }
  Transaction txn = e.txn;
  txn.ts = {++clock_, id_};
  if (txn.is_query()) {
    QueryCoordination q;
    q.purpose = QueryPurpose::Client;
    q.client_txn = txn.id;
    q.items.assign(txn.read_set.begin(), txn.read_set.end());
    start_query(std::move(q), ctx);
  } else {
    start_update(std::move(txn), ctx);
  }
}

inline void Replica::handle(const Deliver& e, Context& ctx) {
  const Message& m = e.msg;
  clock_ = lamport_update(clock_, m.clock);
  switch (m.kind) {
    case MsgKind::ReadAllReply:
    case MsgKind::PrepareStart:
    case MsgKind::PrepareStartReply:
    case MsgKind::StartData:
    case MsgKind::DataReceived:
    case MsgKind::Start:
      on_recovery_message(m, ctx);
      return;
    default:
      break;
  }
  if (mode_ != Mode::Working) return;
  switch (m.kind) {
    case MsgKind::QueryRead: on_query_read(m, ctx); break;
    case MsgKind::QueryReply: on_query_reply(m, ctx); break;
    case MsgKind::UpdateRequest: on_update_request(m, ctx); break;
    case MsgKind::ConfirmCancelReply: on_confirm_cancel(m, ctx); break;
    case MsgKind::Summit: on_summit(m, ctx); break;
    case MsgKind::Commit:
    case MsgKind::Restart: on_commit(m, ctx); break;
    case MsgKind::Release: on_release(m, ctx); break;
    case MsgKind::Reply:
    case MsgKind::CancelReply:
    case MsgKind::CommitRequest:
    case MsgKind::Committed: on_coordinator_message(m, ctx); break;
    case MsgKind::Failed: enter_failed(ctx); break;
    case MsgKind::ReadAll: {
      QueryCoordination q;
      q.purpose = QueryPurpose::ReadAll;
      q.requester = m.from;
      for (ItemId i = 0; i < static_cast<ItemId>(store_.size()); ++i) q.items.push_back(i);
      start_query(std::move(q), ctx);
      break;
    }
    default: break;
  }
}

inline void Replica::handle(const Timeout& e, Context& ctx) {
  auto it = timers_.find(e.token);
  if (it == timers_.end()) return;
  TimerPurpose purpose = it->second;
  timers_.erase(it);
  if (auto* t = std::get_if<RecoveryTimer>(&purpose)) {
    (void)t;
    recovery_timeout(ctx);
    return;
  }
  if (mode_ != Mode::Working) return;
  if (auto* t = std::get_if<ParticipantTimer>(&purpose)) participant_timeout(t->ts, ctx);
  if (auto* t = std::get_if<CoordinatorTimer>(&purpose)) coordinator_timeout(t->ts, ctx);
  if (auto* t = std::get_if<QueryTimer>(&purpose)) query_timeout(t->query_id, ctx);
}

inline void Replica::handle(const RecoverStart&, Context& ctx) { begin_recovery(ctx); }

// --- participant -------------------------------------------------------------

inline Message Replica::participant_message(MsgKind kind, const Participation& p) const {
  Message m = make(kind);
  m.ts = p.txn.ts;
  m.txn = p.txn;
  m.quorum = p.write_quorum;
  m.round = p.round;
  if (p.result) m.result = *p.result;
  return m;
}

// Tell the coordinator where this site stands; used after a coordinator
// change so the new one can pick up.
inline void Replica::report_state(Participation& p, Context& ctx) {
  if (p.phase == Phase::Replied && !at_head(p)) p.phase = Phase::CancelPending;
  switch (p.phase) {
    case Phase::Replied: send(ctx, p.coordinator, participant_message(MsgKind::Reply, p)); break;
    case Phase::CancelPending: send(ctx, p.coordinator, participant_message(MsgKind::CancelReply, p)); break;
    case Phase::CommitRequested: send(ctx, p.coordinator, participant_message(MsgKind::CommitRequest, p)); break;
    case Phase::Committed: send(ctx, p.coordinator, participant_message(MsgKind::Committed, p)); break;
    default: break;
  }
}

inline bool Replica::at_head(const Participation& p) const {
  for (ItemId item : p.txn.items()) {
    auto q = queues_.find(item);
    if (q == queues_.end()) continue;
    for (const Timestamp& ts : q->second) {
      if (!(ts < p.txn.ts)) break;
      if (conflicts_at(participations_.at(ts).txn, p.txn, item)) return false;
    }
  }
  return true;
}

inline bool Replica::blocked_by_others(const Participation& p) const {
  for (const auto& [ts, other] : participations_) {
    if (ts == p.txn.ts) continue;
    if ((reply_marked(other.phase) || holds_lock(other.phase)) && conflicts(other.txn, p.txn)) return true;
  }
  return false;
}

inline void Replica::try_replies(Context& ctx) {
  for (auto& [ts, p] : participations_) {
    if (p.phase != Phase::Queued) continue;
    if (at_head(p) && !blocked_by_others(p)) {
      p.phase = Phase::Replied;
      p.round = ++reply_round_;
      send(ctx, p.coordinator, participant_message(MsgKind::Reply, p));
    }
  }
}

inline void Replica::cancel_displaced(Context& ctx) {
  for (auto& [ts, p] : participations_) {
    if (p.phase == Phase::Replied && !at_head(p)) {
      p.phase = Phase::CancelPending;
      send(ctx, p.coordinator, participant_message(MsgKind::CancelReply, p));
    }
  }
}

inline void Replica::dequeue(const Participation& p) {
  for (ItemId item : p.txn.items()) {
    auto q = queues_.find(item);
    if (q == queues_.end()) continue;
    q->second.erase(p.txn.ts);
    if (q->second.empty()) queues_.erase(q);
  }
  sd_queue_.erase(std::remove(sd_queue_.begin(), sd_queue_.end(), p.txn.ts), sd_queue_.end());
}

// Successors elected under different views can coexist; a participant stays
// with the smallest live one so that one of them collects everybody.
inline void Replica::follow(Participation& p, NodeId from, const ClusterView& view) {
  if (p.coordinator != from && p.coordinator != 0 && p.coordinator < from &&
      !detected_failed(view, p.coordinator, p.coordinator_incarnation)) {
    return;
  }
  p.coordinator = from;
  p.coordinator_incarnation = sender_incarnation(view, from);
}

inline void Replica::on_update_request(const Message& m, Context& ctx) {
  const Timestamp ts = m.txn.ts;
  if (finished_.count(ts)) {
    Message rel = make(MsgKind::Release);
    rel.ts = ts;
    send(ctx, m.from, rel);
    return;
  }
  auto it = participations_.find(ts);
  if (it != participations_.end()) {
    Participation& p = it->second;
    follow(p, m.from, ctx.view);
    report_state(p, ctx);
    return;
  }
  Participation p;
  p.txn = m.txn;
  p.write_quorum = m.quorum;
  p.coordinator = m.from;
  p.coordinator_incarnation = sender_incarnation(ctx.view, m.from);
  for (ItemId item : p.txn.items()) queues_[item].insert(ts);
  participations_.emplace(ts, std::move(p));
  arm(ctx, ParticipantTimer{ts});
  cancel_displaced(ctx);
  try_replies(ctx);
}

inline void Replica::on_confirm_cancel(const Message& m, Context& ctx) {
  auto it = participations_.find(m.ts);
  if (it == participations_.end() || it->second.phase != Phase::CancelPending) return;
  if (m.round != it->second.round) return;
  it->second.phase = Phase::Queued;
  try_replies(ctx);
}

inline void Replica::on_summit(const Message& m, Context& ctx) {
  const Timestamp ts = m.txn.ts;
  if (finished_.count(ts)) return;
  auto it = participations_.find(ts);
  if (it == participations_.end()) {
    Participation p;
    p.txn = m.txn;
    p.write_quorum = m.quorum;
    it = participations_.emplace(ts, std::move(p)).first;
    arm(ctx, ParticipantTimer{ts});
  }
  Participation& p = it->second;
  follow(p, m.from, ctx.view);
  if (holds_lock(p.phase)) {
    if (p.phase == Phase::CommitRequested || p.phase == Phase::Committed) report_state(p, ctx);
    return;
  }
  dequeue(p);
  p.phase = Phase::Summited;
  sd_queue_.push_back(ts);
  run_scheduler(ctx);
  try_replies(ctx);
}

inline void Replica::run_scheduler(Context& ctx) {
  while (!executing_ && !sd_queue_.empty()) {
    const Timestamp ts = sd_queue_.front();
    sd_queue_.pop_front();
    auto it = participations_.find(ts);
    if (it == participations_.end() || it->second.phase != Phase::Summited) continue;
    it->second.phase = Phase::Executing;
    executing_ = ts;
    QueryCoordination q;
    q.purpose = QueryPurpose::Execution;
    q.owner = ts;
    const auto items = it->second.txn.items();
    q.items.assign(items.begin(), items.end());
    const std::uint64_t qid = start_query(std::move(q), ctx);
    if (auto p = participations_.find(ts); p != participations_.end()) p->second.query_id = qid;
    return;
  }
}

inline void Replica::finish_execution(const Timestamp& ts, const std::map<ItemId, ItemRecord>& inputs,
                                      Context& ctx) {
  if (executing_ == ts) executing_.reset();
  auto it = participations_.find(ts);
  if (it != participations_.end() && it->second.phase == Phase::Executing) {
    Participation& p = it->second;
    p.result = execute(p.txn, inputs);
    p.phase = Phase::CommitRequested;
    send(ctx, p.coordinator, participant_message(MsgKind::CommitRequest, p));
  }
  run_scheduler(ctx);
}

inline void Replica::on_commit(const Message& m, Context& ctx) {
  const Timestamp ts = m.txn.ts;
  Message ack = make(MsgKind::Committed);
  ack.ts = ts;
  ack.txn = m.txn;
  ack.quorum = m.quorum;
  ack.result = m.result;
  if (finished_.count(ts)) {
    install(m.result.writes);
    send(ctx, m.from, ack);
    return;
  }
  auto it = participations_.find(ts);
  if (it == participations_.end()) {
    Participation p;
    p.txn = m.txn;
    p.write_quorum = m.quorum;
    it = participations_.emplace(ts, std::move(p)).first;
    arm(ctx, ParticipantTimer{ts});
  }
  Participation& p = it->second;
  dequeue(p);
  if (executing_ == ts) executing_.reset();
  follow(p, m.from, ctx.view);
  apply_commit(p.txn, m.result);
  p.result = m.result;
  p.phase = Phase::Committed;
  send(ctx, m.from, ack);
  run_scheduler(ctx);
  try_replies(ctx);
}

inline void Replica::release_participation(const Timestamp& ts) {
  auto it = participations_.find(ts);
  if (it != participations_.end()) {
    dequeue(it->second);
    if (executing_ == ts) executing_.reset();
    finished_txns_.insert(it->second.txn.id);
    participations_.erase(it);
  }
  finished_.insert(ts);
}

inline void Replica::on_release(const Message& m, Context& ctx) {
  release_participation(m.ts);
  // A competing successor finished the transaction.
  if (auto c = coordinations_.find(m.ts); c != coordinations_.end() && !c->second.has_client) {
    coordinations_.erase(c);
  }
  retry_deferred_reads(ctx);
  cancel_displaced(ctx);
  try_replies(ctx);
  run_scheduler(ctx);
}

inline void Replica::participant_timeout(const Timestamp& ts, Context& ctx) {
  auto it = participations_.find(ts);
  if (it == participations_.end()) return;
  Participation& p = it->second;
  const bool own = p.coordinator == id_ && coordinations_.count(ts);
  if (own || !detected_failed(ctx.view, p.coordinator, p.coordinator_incarnation)) {
    arm(ctx, ParticipantTimer{ts});
    return;
  }
  // The submitting site never resumes a transaction it lost in a crash.
  NodeSet candidates = p.write_quorum;
  candidates.insert(id_);
  candidates.erase(ts.site);
  if ((candidates & working_sites(ctx.view)).empty()) {
    arm(ctx, ParticipantTimer{ts});
    return;
  }
  const NodeId next = elect_coordinator(candidates, working_sites(ctx.view));
  if (next == id_) {
    adopt(p.txn, p.write_quorum, stage_for(p.phase), p.result, ctx);
  } else {
    p.coordinator = next;
    p.coordinator_incarnation = ctx.view.incarnation(next);
    report_state(p, ctx);
  }
  if (participations_.count(ts)) arm(ctx, ParticipantTimer{ts});
}

// --- coordinator -------------------------------------------------------------

inline Replica::Stage Replica::stage_for(Phase phase) {
  switch (phase) {
    case Phase::Queued:
    case Phase::Replied:
    case Phase::CancelPending: return Stage::CollectReplies;
    case Phase::Summited:
    case Phase::Executing:
    case Phase::CommitRequested: return Stage::CollectCommitRequests;
    case Phase::Committed: return Stage::CollectCommitted;
  }
  return Stage::CollectReplies;
}

inline void Replica::start_update(Transaction txn, Context& ctx) {
  auto w = tables_->working_write_quorum(ctx.view);
  if (!w) {
    ctx.fx.replies.push_back({txn.id, Outcome::SystemFailure, {}});
    declare_system_failure(ctx);
    return;
  }
  Coordination c;
  c.txn = txn;
  c.write_quorum = *w;
  c.participants = *w;
  c.has_client = true;
  for (NodeId s : w->members()) {
    c.incarnation[s] = ctx.view.incarnation(s);
    if (!ctx.view.is_working(s)) c.failed.insert(s);
  }
  Message req = make(MsgKind::UpdateRequest);
  req.ts = txn.ts;
  req.txn = txn;
  req.quorum = *w;
  multicast(ctx, *w - c.failed, req);
  const Timestamp ts = txn.ts;
  coordinations_.emplace(ts, std::move(c));
  arm(ctx, CoordinatorTimer{ts});
}

// Take over a transaction whose coordinator failed, at the stage this site
// knows it reached.
inline void Replica::adopt(const Transaction& txn, NodeSet write_quorum, Stage stage,
                           const std::optional<ExecutionResult>& result, Context& ctx) {
  const Timestamp ts = txn.ts;
  if (coordinations_.count(ts) || finished_.count(ts)) return;
  Coordination c;
  c.txn = txn;
  c.write_quorum = write_quorum;
  c.participants = write_quorum;
  for (NodeId s : write_quorum.members()) {
    c.incarnation[s] = ctx.view.incarnation(s);
    if (!ctx.view.is_working(s)) c.failed.insert(s);
  }
  if (stage == Stage::CollectCommitted && !result) stage = Stage::CollectCommitRequests;
  c.stage = stage;
  c.result = result;
  const NodeSet live = write_quorum - c.failed;
  Message m = make(MsgKind::UpdateRequest);
  m.ts = ts;
  m.txn = txn;
  m.quorum = write_quorum;
  switch (stage) {
    case Stage::CollectReplies: break;
    case Stage::CollectCommitRequests:
      m.kind = MsgKind::Summit;
      c.summited = live;
      break;
    case Stage::CollectCommitted:
      m.kind = MsgKind::Commit;
      m.result = *result;
      c.commit_targets = live;
      break;
  }
  multicast(ctx, live, m);
  coordinations_.emplace(ts, std::move(c));
  arm(ctx, CoordinatorTimer{ts});
}

inline void Replica::on_coordinator_message(const Message& m, Context& ctx) {
  const Timestamp ts = m.txn.ts;
  auto it = coordinations_.find(ts);
  if (it == coordinations_.end()) {
    if (finished_.count(ts)) {
      Message rel = make(MsgKind::Release);
      rel.ts = ts;
      send(ctx, m.from, rel);
      return;
    }
    // Only an elected successor is addressed for a transaction it does not
    // coordinate; the submitting site never resumes one lost in a crash.
    if (ts.site == id_) return;
    std::optional<ExecutionResult> result;
    Stage stage = Stage::CollectReplies;
    if (m.kind == MsgKind::CommitRequest) stage = Stage::CollectCommitRequests;
    if (m.kind == MsgKind::Committed) {
      stage = Stage::CollectCommitted;
      result = m.result;
    }
    auto own = participations_.find(ts);
    if (own != participations_.end()) {
      stage = std::max(stage, stage_for(own->second.phase));
      if (!result && own->second.phase == Phase::Committed) result = own->second.result;
    }
    adopt(m.txn, m.quorum, stage, result, ctx);
    it = coordinations_.find(ts);
    if (it == coordinations_.end()) return;
  }
  Coordination& c = it->second;
  const NodeId s = m.from;
  if (m.kind == MsgKind::Reply) {
    auto cancelled = c.cancelled_round.find(s);
    if (cancelled != c.cancelled_round.end() && m.round <= cancelled->second) return;
  }
  c.participants.insert(s);
  c.incarnation[s] = sender_incarnation(ctx.view, s);
  if (c.incarnation[s] == kStaleIncarnation) {
    c.failed.insert(s);
  } else {
    c.failed.erase(s);
  }
  switch (m.kind) {
    case MsgKind::Reply:
      if (c.stage == Stage::CollectReplies) {
        c.replied.insert(s);
      } else if (c.stage == Stage::CollectCommitRequests) {
        if (!c.summited.contains(s)) {
          Message sm = make(MsgKind::Summit);
          sm.ts = ts;
          sm.txn = c.txn;
          sm.quorum = c.write_quorum;
          send(ctx, s, sm);
          c.summited.insert(s);
        }
      } else if (!c.commit_targets.contains(s)) {
        Message cm = make(MsgKind::Commit);
        cm.ts = ts;
        cm.txn = c.txn;
        cm.quorum = c.write_quorum;
        cm.result = *c.result;
        send(ctx, s, cm);
        c.commit_targets.insert(s);
      }
      break;
    case MsgKind::CancelReply:
      if (c.stage == Stage::CollectReplies) {
        c.replied.erase(s);
        c.cancelled_round[s] = std::max(c.cancelled_round[s], m.round);
        Message conf = make(MsgKind::ConfirmCancelReply);
        conf.ts = ts;
        conf.round = m.round;
        send(ctx, s, conf);
      }
      break;
    case MsgKind::CommitRequest:
      if (!c.result) c.result = m.result;
      if (c.stage == Stage::CollectReplies) {
        // Another site was already summited by a failed predecessor.
        Message sm = make(MsgKind::Summit);
        sm.ts = ts;
        sm.txn = c.txn;
        sm.quorum = c.write_quorum;
        const NodeSet live = c.participants - c.failed;
        multicast(ctx, live - NodeSet::of({s}), sm);
        c.summited = live;
        c.stage = Stage::CollectCommitRequests;
      }
      c.summited.insert(s);
      if (c.stage == Stage::CollectCommitRequests) {
        c.commit_requested.insert(s);
      } else if (!c.commit_targets.contains(s)) {
        Message cm = make(MsgKind::Commit);
        cm.ts = ts;
        cm.txn = c.txn;
        cm.quorum = c.write_quorum;
        cm.result = *c.result;
        send(ctx, s, cm);
        c.commit_targets.insert(s);
      }
      break;
    case MsgKind::Committed:
      if (!c.result) c.result = m.result;
      c.stage = Stage::CollectCommitted;
      c.commit_targets.insert(s);
      c.committed.insert(s);
      break;
    default: break;
  }
  advance(c, ctx);
}

inline void Replica::advance(Coordination& c, Context& ctx) {
  const Timestamp ts = c.txn.ts;
  if (c.stage == Stage::CollectReplies) {
    if (!(c.participants - c.replied - c.failed).empty()) return;
    // Members given up earlier but working again must queue the transaction
    // before it is summited, or they could grant a conflicting one.
    NodeSet rejoined;
    for (NodeId s : c.failed.members()) {
      if (ctx.view.is_working(s)) rejoined.insert(s);
    }
    if (!rejoined.empty()) {
      Message req = make(MsgKind::UpdateRequest);
      req.ts = ts;
      req.txn = c.txn;
      req.quorum = c.write_quorum;
      multicast(ctx, rejoined, req);
      for (NodeId s : rejoined.members()) {
        c.failed.erase(s);
        c.replied.erase(s);
        c.incarnation[s] = ctx.view.incarnation(s);
      }
      return;
    }
    // Live reply holders must still form a read quorum so that every later
    // write quorum meets one of them; otherwise widen the arbitration.
    if (!family().is_read_quorum(QuorumTables::working_in(c.replied - c.failed, ctx.view))) {
      widen_arbitration(c, ctx);
      return;
    }
    Message sm = make(MsgKind::Summit);
    sm.ts = ts;
    sm.txn = c.txn;
    sm.quorum = c.write_quorum;
    const NodeSet targets = c.replied - c.failed;
    multicast(ctx, targets, sm);
    c.summited = targets;
    c.stage = Stage::CollectCommitRequests;
  }
  if (c.stage == Stage::CollectCommitRequests) {
    if (!(c.summited - c.commit_requested - c.failed).empty()) return;
    if (!c.result) {
      // Every summited site failed before reporting; arbitrate again.
      c.stage = Stage::CollectReplies;
      c.replied = NodeSet{};
      c.summited = NodeSet{};
      c.failed = c.participants;
      widen_arbitration(c, ctx);
      return;
    }
    const NodeSet requesters = QuorumTables::working_in(c.commit_requested - c.failed, ctx.view);
    Message cm = make(MsgKind::Commit);
    cm.ts = ts;
    cm.txn = c.txn;
    cm.quorum = c.write_quorum;
    cm.result = *c.result;
    multicast(ctx, requesters, cm);
    c.commit_targets |= requesters;
    if (!family().is_read_quorum(requesters)) {
      auto r = tables_->working_read_quorum(ctx.view);
      if (!r) {
        declare_system_failure(ctx);
        return;
      }
      cm.kind = MsgKind::Restart;
      multicast(ctx, *r - requesters, cm);
      c.commit_targets |= *r;
      for (NodeId s : r->members()) c.incarnation[s] = ctx.view.incarnation(s);
    }
    c.stage = Stage::CollectCommitted;
  }
  if (!(c.commit_targets - c.committed - c.failed).empty()) return;
  finish_update(c, ctx);
}

inline void Replica::widen_arbitration(Coordination& c, Context& ctx) {
  auto w = tables_->working_write_quorum(ctx.view);
  if (!w) {
    declare_system_failure(ctx);
    return;
  }
  const NodeSet targets = QuorumTables::working_in(*w, ctx.view) - (c.replied - c.failed);
  Message req = make(MsgKind::UpdateRequest);
  req.ts = c.txn.ts;
  req.txn = c.txn;
  req.quorum = c.write_quorum;
  multicast(ctx, targets, req);
  c.participants |= targets;
  for (NodeId s : targets.members()) {
    c.failed.erase(s);
    c.replied.erase(s);
    c.incarnation[s] = ctx.view.incarnation(s);
  }
}

inline void Replica::finish_update(Coordination& c, Context& ctx) {
  const Timestamp ts = c.txn.ts;
  Message cm = make(MsgKind::Commit);
  cm.ts = ts;
  cm.txn = c.txn;
  cm.quorum = c.write_quorum;
  cm.result = *c.result;
  // Members that were excluded or restarted since must see the result before
  // the locks go.
  bool waiting = false;
  for (NodeId s : (c.participants | c.commit_targets).members()) {
    const bool changed = c.incarnation.count(s) && c.incarnation[s] != ctx.view.incarnation(s);
    if (!c.failed.contains(s) && !changed) continue;
    if (ctx.view.is_working(s)) {
      send(ctx, s, cm);
      c.commit_targets.insert(s);
      c.failed.erase(s);
      c.committed.erase(s);
      c.incarnation[s] = ctx.view.incarnation(s);
      waiting = true;
    } else if (ctx.view.is_up(s)) {
      waiting = true;  // recovering; retried on the next timeout
    } else {
      c.failed.insert(s);
      c.incarnation[s] = ctx.view.incarnation(s);
    }
  }
  if (waiting) return;
  const NodeSet holders = QuorumTables::working_in(c.committed, ctx.view);
  if (!family().is_read_quorum(holders)) {
    auto r = tables_->working_read_quorum(ctx.view);
    if (!r) {
      declare_system_failure(ctx);
      return;
    }
    cm.kind = MsgKind::Restart;
    multicast(ctx, *r - holders, cm);
    c.commit_targets |= *r;
    for (NodeId s : r->members()) c.incarnation[s] = ctx.view.incarnation(s);
    return;
  }
  if (c.has_client) ctx.fx.replies.push_back({c.txn.id, Outcome::Ok, c.result->writes});
  Message rel = make(MsgKind::Release);
  rel.ts = ts;
  multicast(ctx, (c.participants | c.commit_targets) - c.failed, rel);
  finished_.insert(ts);
  finished_txns_.insert(c.txn.id);
  coordinations_.erase(ts);
}

inline void Replica::coordinator_timeout(const Timestamp& ts, Context& ctx) {
  auto it = coordinations_.find(ts);
  if (it == coordinations_.end()) return;
  Coordination& c = it->second;
  NodeSet awaited;
  switch (c.stage) {
    case Stage::CollectReplies: awaited = c.participants - c.replied; break;
    case Stage::CollectCommitRequests: awaited = c.summited - c.commit_requested; break;
    case Stage::CollectCommitted: awaited = c.commit_targets - c.committed; break;
  }
  for (NodeId s : (awaited - c.failed).members()) {
    if (detected_failed(ctx.view, s, c.incarnation[s])) c.failed.insert(s);
  }
  if (!c.has_client) {
    // Another successor may hold these participants; ask again.
    Message m = make(MsgKind::UpdateRequest);
    m.ts = ts;
    m.txn = c.txn;
    m.quorum = c.write_quorum;
    if (c.stage == Stage::CollectCommitRequests) m.kind = MsgKind::Summit;
    if (c.stage == Stage::CollectCommitted) {
      m.kind = MsgKind::Commit;
      m.result = *c.result;
    }
    multicast(ctx, awaited - c.failed, m);
  }
  advance(c, ctx);
  if (coordinations_.count(ts)) arm(ctx, CoordinatorTimer{ts});
}

// --- queries -----------------------------------------------------------------

inline std::uint64_t Replica::start_query(QueryCoordination q, Context& ctx) {
  const std::uint64_t qid = next_query_++;
  auto& slot = queries_.emplace(qid, std::move(q)).first->second;
  dispatch_query(qid, slot, ctx);
  return qid;
}

inline bool Replica::dispatch_query(std::uint64_t qid, QueryCoordination& q, Context& ctx) {
  auto r = tables_->working_read_quorum(ctx.view);
  if (!r) {
    if (q.purpose == QueryPurpose::Client) {
      ctx.fx.replies.push_back({q.client_txn, Outcome::SystemFailure, {}});
      queries_.erase(qid);
    }
    declare_system_failure(ctx);
    return false;
  }
  q.quorum = *r;
  q.replies.clear();
  q.incarnation.clear();
  Message m = make(MsgKind::QueryRead);
  m.query_id = qid;
  m.items = q.items;
  m.ts = q.owner;
  m.recovery = q.purpose == QueryPurpose::ReadAll;
  for (NodeId s : r->members()) {
    q.incarnation[s] = ctx.view.incarnation(s);
    send(ctx, s, m);
  }
  arm(ctx, QueryTimer{qid});
  return true;
}

inline bool Replica::read_blocked(const Message& m) const {
  for (ItemId item : m.items) {
    if (commit_set_.count(item)) return true;
  }
  if (m.recovery) return false;
  for (const auto& [ts, p] : participations_) {
    if (ts == m.ts || p.phase != Phase::Committed) continue;
    for (ItemId item : m.items) {
      if (p.txn.write_set.count(item)) return true;
    }
  }
  return false;
}

inline void Replica::on_query_read(const Message& m, Context& ctx) {
  if (read_blocked(m)) {
    deferred_reads_.push_back({m.from, m});
    return;
  }
  Message reply = make(MsgKind::QueryReply);
  reply.query_id = m.query_id;
  reply.records = read_items(m.items);
  send(ctx, m.from, reply);
}

inline void Replica::retry_deferred_reads(Context& ctx) {
  std::deque<DeferredRead> pending;
  pending.swap(deferred_reads_);
  for (auto& d : pending) on_query_read(d.msg, ctx);
}

inline void Replica::on_query_reply(const Message& m, Context& ctx) {
  auto it = queries_.find(m.query_id);
  if (it == queries_.end() || !it->second.quorum.contains(m.from)) return;
  QueryCoordination& q = it->second;
  q.replies[m.from] = m.records;
  if (static_cast<int>(q.replies.size()) == q.quorum.size()) complete_query(m.query_id, ctx);
}

inline void Replica::query_timeout(std::uint64_t qid, Context& ctx) {
  auto it = queries_.find(qid);
  if (it == queries_.end()) return;
  QueryCoordination& q = it->second;
  bool lost = false;
  for (NodeId s : q.quorum.members()) {
    if (!q.replies.count(s) && detected_failed(ctx.view, s, q.incarnation[s])) lost = true;
  }
  if (lost) {
    dispatch_query(qid, q, ctx);
  } else {
    arm(ctx, QueryTimer{qid});
  }
}

inline void Replica::complete_query(std::uint64_t qid, Context& ctx) {
  QueryCoordination q = std::move(queries_.at(qid));
  queries_.erase(qid);
  std::map<ItemId, ItemRecord> best;
  for (const auto& [site, records] : q.replies) {
    for (const auto& r : records) {
      auto [slot, fresh] = best.emplace(r.item, r);
      if (!fresh && r.version > slot->second.version) slot->second = r;
    }
  }
  std::vector<ItemRecord> values;
  for (const auto& [item, r] : best) values.push_back(r);
  switch (q.purpose) {
    case QueryPurpose::Client: ctx.fx.replies.push_back({q.client_txn, Outcome::Ok, std::move(values)}); break;
    case QueryPurpose::Execution: finish_execution(q.owner, best, ctx); break;
    case QueryPurpose::ReadAll: {
      Message m = make(MsgKind::ReadAllReply);
      m.records = std::move(values);
      send(ctx, q.requester, m);
      break;
    }
  }
}

// --- failure and recovery ----------------------------------------------------

inline void Replica::declare_system_failure(Context& ctx) {
  Message m = make(MsgKind::Failed);
  multicast(ctx, NodeSet::range(1, site_count()) - NodeSet::of({id_}), m);
  ctx.fx.declared_system_failure = true;
  enter_failed(ctx);
}

inline void Replica::enter_failed(Context& ctx) {
  for (const auto& [ts, c] : coordinations_) {
    if (c.has_client) ctx.fx.replies.push_back({c.txn.id, Outcome::SystemFailure, {}});
  }
  for (const auto& [qid, q] : queries_) {
    if (q.purpose == QueryPurpose::Client) ctx.fx.replies.push_back({q.client_txn, Outcome::SystemFailure, {}});
  }
  clear_volatile();
  mode_ = Mode::Failed;
}

inline void Replica::begin_recovery(Context& ctx) {
  clear_volatile();
  mode_ = Mode::Failed;
  recovery_ = Recovery{};
  seek_recovery_source(ctx);
}

// Copy from a working read quorum if one exists, else start a restart of the
// whole system; competing start coordinators defer to the smallest id.
inline void Replica::seek_recovery_source(Context& ctx) {
  auto r = tables_->working_read_quorum(ctx.view);
  if (!r) {
    become_start_coordinator(ctx);
    return;
  }
  recovery_->stage = RecoveryStage::AwaitReadAll;
  recovery_->contact = r->min();
  recovery_->contact_incarnation = ctx.view.incarnation(recovery_->contact);
  send(ctx, recovery_->contact, make(MsgKind::ReadAll));
  arm(ctx, RecoveryTimer{});
}

inline void Replica::become_start_coordinator(Context& ctx) {
  recovery_ = Recovery{};
  recovery_->stage = RecoveryStage::StartCoordinator;
  recovery_->stores[id_] = store_;
  multicast(ctx, NodeSet::range(1, site_count()) - NodeSet::of({id_}), make(MsgKind::PrepareStart));
  arm(ctx, RecoveryTimer{});
}

inline void Replica::recovery_timeout(Context& ctx) {
  if (!recovery_) return;
  Recovery& rec = *recovery_;
  switch (rec.stage) {
    case RecoveryStage::AwaitReadAll:
      if (detected_failed(ctx.view, rec.contact, rec.contact_incarnation)) {
        seek_recovery_source(ctx);
        return;
      }
      break;
    case RecoveryStage::AwaitStart:
      // A contact that is working again finished (or abandoned) its restart
      // without us, so nobody will send Start any more.
      if (!ctx.view.is_up(rec.contact) || ctx.view.incarnation(rec.contact) != rec.contact_incarnation ||
          ctx.view.is_working(rec.contact) || ++rec.silent_timeouts > kSilentRecoveryTimeouts) {
        seek_recovery_source(ctx);
        return;
      }
      break;
    case RecoveryStage::StartCoordinator: {
      const NodeSet all = NodeSet::range(1, site_count());
      if (!rec.data_sent) {
        NodeSet missing = all;
        for (const auto& [s, st] : rec.stores) missing.erase(s);
        multicast(ctx, missing, make(MsgKind::PrepareStart));
      } else {
        Message m = make(MsgKind::StartData);
        m.records = store_;
        multicast(ctx, all - rec.data_received, m);
      }
      break;
    }
  }
  arm(ctx, RecoveryTimer{});
}

inline void Replica::on_recovery_message(const Message& m, Context& ctx) {
  switch (m.kind) {
    case MsgKind::ReadAllReply:
      if (recovery_ && recovery_->stage == RecoveryStage::AwaitReadAll) {
        for (const auto& r : m.records) store_.at(static_cast<std::size_t>(r.item)) = r;
        become_working();
        retry_deferred_reads(ctx);
      }
      break;
    case MsgKind::PrepareStart: {
      if (mode_ == Mode::Working) {
        // The system is up: the sender should recover by ReadAll instead.
        if (tables_->working_read_quorum(ctx.view)) {
          send(ctx, m.from, make(MsgKind::Start));
          return;
        }
        enter_failed(ctx);
      }
      if (recovery_ && recovery_->stage == RecoveryStage::StartCoordinator && m.from > id_) {
        send(ctx, m.from, make(MsgKind::PrepareStart));  // make the larger one defer
        return;
      }
      if (!recovery_ || recovery_->stage != RecoveryStage::AwaitStart) {
        recovery_ = Recovery{};
        recovery_->stage = RecoveryStage::AwaitStart;
        arm(ctx, RecoveryTimer{});
      }
      recovery_->contact = m.from;
      recovery_->contact_incarnation = sender_incarnation(ctx.view, m.from, false);
      recovery_->silent_timeouts = 0;
      Message reply = make(MsgKind::PrepareStartReply);
      reply.records = store_;
      send(ctx, m.from, reply);
      break;
    }
    case MsgKind::PrepareStartReply: {
      if (!recovery_ || recovery_->stage != RecoveryStage::StartCoordinator) return;
      Recovery& rec = *recovery_;
      rec.stores[m.from] = m.records;
      if (rec.data_sent || static_cast<int>(rec.stores.size()) < site_count()) return;
      for (const auto& [s, st] : rec.stores) install(st);
      rec.data_sent = true;
      rec.data_received.insert(id_);
      Message data = make(MsgKind::StartData);
      data.records = store_;
      multicast(ctx, NodeSet::range(1, site_count()) - NodeSet::of({id_}), data);
      break;
    }
    case MsgKind::StartData:
      if (recovery_ && recovery_->stage == RecoveryStage::StartCoordinator && m.from < id_) {
        recovery_ = Recovery{};
        recovery_->stage = RecoveryStage::AwaitStart;
        recovery_->contact = m.from;
        recovery_->contact_incarnation = sender_incarnation(ctx.view, m.from, false);
        arm(ctx, RecoveryTimer{});
      }
      // A site already restarted by a smaller coordinator still acknowledges,
      // otherwise a coordinator that collected its store earlier waits forever.
      if (mode_ == Mode::Working || (recovery_ && recovery_->stage == RecoveryStage::AwaitStart)) {
        if (recovery_) recovery_->silent_timeouts = 0;
        install(m.records);
        send(ctx, m.from, make(MsgKind::DataReceived));
      }
      break;
    case MsgKind::DataReceived: {
      if (!recovery_ || recovery_->stage != RecoveryStage::StartCoordinator || !recovery_->data_sent) return;
      recovery_->data_received.insert(m.from);
      if (recovery_->data_received.size() < site_count()) return;
      multicast(ctx, NodeSet::range(1, site_count()) - NodeSet::of({id_}), make(MsgKind::Start));
      become_working();
      break;
    }
    case MsgKind::Start:
      if (recovery_ && recovery_->stage == RecoveryStage::AwaitStart) {
        become_working();
      } else if (recovery_ && recovery_->stage == RecoveryStage::StartCoordinator && mode_ != Mode::Working) {
        seek_recovery_source(ctx);  // a working site declined the restart
      }
      break;
    default: break;
  }
}

inline void Replica::become_working() {
  recovery_.reset();
  timers_.clear();
  mode_ = Mode::Working;
}

}  // namespace cqc
