#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <memory>
#include <vector>

#include "cqc/replica.hpp"

namespace cqc {
namespace {

struct AllWorking : ClusterView {
  int n;
  explicit AllWorking(int n) : n(n) {}
  int size() const override { return n; }
  bool is_up(NodeId) const override { return true; }
  bool is_working(NodeId) const override { return true; }
  std::uint64_t incarnation(NodeId) const override { return 0; }
};

// Hand-cranked network: messages wait in one queue until a test delivers them.
struct MiniNet {
  AllWorking view;
  std::vector<Replica> sites;
  std::deque<Outgoing> queue;
  std::vector<ClientReply> replies;
  std::vector<Message> log;

  MiniNet(QuorumFamily f, int items) : view(f.n()) {
    auto tables = std::make_shared<const QuorumTables>(std::move(f));
    for (NodeId s = 1; s <= view.n; ++s) sites.emplace_back(s, tables, std::vector<Value>(items, 0));
  }

  Replica& site(NodeId s) { return sites[static_cast<std::size_t>(s - 1)]; }

  void absorb(Effects fx) {
    for (auto& out : fx.sends) queue.push_back(std::move(out));
    for (auto& r : fx.replies) replies.push_back(std::move(r));
  }

  void submit(NodeId s, Transaction t) { absorb(site(s).step(ClientSubmit{std::move(t)}, view)); }

  void deliver_front() {
    Outgoing out = std::move(queue.front());
    queue.pop_front();
    log.push_back(out.msg);
    absorb(site(out.to).step(Deliver{out.msg}, view));
  }

  void drain(std::size_t limit = 100000) {
    for (std::size_t i = 0; i < limit && !queue.empty(); ++i) deliver_front();
    ASSERT_TRUE(queue.empty()) << "network did not quiesce";
  }

  std::size_t count(MsgKind kind) const {
    return static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [&](const Message& m) { return m.kind == kind; }));
  }
};

Transaction set_constant(TxnId id, ItemId item, Value v) {
  Transaction t;
  t.id = id;
  t.write_set = {item};
  t.body = {{item, Expr::make_constant(v)}};
  return t;
}

Transaction increment(TxnId id, ItemId item) {
  Transaction t;
  t.id = id;
  t.read_set = {item};
  t.write_set = {item};
  t.body = {{item, Expr::make_sum({item}, 1)}};
  return t;
}

Transaction read(TxnId id, std::set<ItemId> items) {
  Transaction t;
  t.id = id;
  t.read_set = std::move(items);
  return t;
}

TEST(Replica, SingleUpdateReachesEveryCopyOfRowa) {
  MiniNet net(make_rowa(3), 1);
  net.submit(1, set_constant(7, 0, 42));
  net.drain();
  ASSERT_EQ(net.replies.size(), 1u);
  EXPECT_EQ(net.replies[0].txn, 7u);
  EXPECT_EQ(net.replies[0].outcome, Outcome::Ok);
  ASSERT_EQ(net.replies[0].values.size(), 1u);
  EXPECT_EQ(net.replies[0].values[0], (ItemRecord{0, 42, 1}));
  for (auto& r : net.sites) {
    EXPECT_EQ(r.store()[0], (ItemRecord{0, 42, 1})) << "site " << r.id();
    EXPECT_TRUE(r.idle()) << "site " << r.id();
  }
}

TEST(Replica, QueryOnSingleSite) {
  MiniNet net(make_rowa(1), 2);
  net.submit(1, set_constant(1, 1, 5));
  net.drain();
  net.submit(1, read(2, {0, 1}));
  net.drain();
  ASSERT_EQ(net.replies.size(), 2u);
  EXPECT_EQ(net.replies[1].outcome, Outcome::Ok);
  EXPECT_EQ(net.replies[1].values, (std::vector<ItemRecord>{{0, 0, 0}, {1, 5, 1}}));
}

TEST(Replica, LaterTimestampCancelsItsReply) {
  // Site 2's update is delivered first everywhere, then site 1's earlier
  // timestamp arrives and displaces it.
  MiniNet net(make_rowa(3), 1);
  net.submit(2, increment(20, 0));
  net.submit(1, increment(10, 0));
  net.drain();
  EXPECT_GT(net.count(MsgKind::CancelReply), 0u);
  ASSERT_EQ(net.replies.size(), 2u);
  std::vector<Version> versions;
  for (const auto& r : net.replies) {
    EXPECT_EQ(r.outcome, Outcome::Ok);
    versions.push_back(r.values.at(0).version);
  }
  std::sort(versions.begin(), versions.end());
  EXPECT_EQ(versions, (std::vector<Version>{1, 2}));
  for (auto& r : net.sites) EXPECT_EQ(r.store()[0], (ItemRecord{0, 2, 2}));
}

TEST(Replica, ReplyOvertakenByItsCancelIsIgnored) {
  MiniNet net(make_rowa(3), 1);
  net.submit(2, increment(20, 0));
  net.submit(1, increment(10, 0));
  // Deliver until some site has queued both a Reply and a CancelReply for the
  // same transaction, then let the cancel overtake the reply.
  bool swapped = false;
  for (int guard = 0; guard < 10000 && !net.queue.empty(); ++guard) {
    if (!swapped) {
      for (std::size_t i = 0; i < net.queue.size() && !swapped; ++i) {
        if (net.queue[i].msg.kind != MsgKind::Reply) continue;
        for (std::size_t j = i + 1; j < net.queue.size(); ++j) {
          const auto& c = net.queue[j];
          if (c.msg.kind == MsgKind::CancelReply && c.msg.from == net.queue[i].msg.from && c.to == net.queue[i].to &&
              c.msg.ts == net.queue[i].msg.ts) {
            std::swap(net.queue[i], net.queue[j]);
            swapped = true;
            break;
          }
        }
      }
    }
    net.deliver_front();
  }
  ASSERT_TRUE(swapped) << "schedule never produced a Reply/CancelReply pair";
  ASSERT_EQ(net.replies.size(), 2u);
  for (auto& r : net.sites) EXPECT_EQ(r.store()[0], (ItemRecord{0, 2, 2}));
}

TEST(Replica, ConflictingUpdatesOnAlphaSerialize) {
  MiniNet net(QuorumFamily::alpha(CircularStructure::build({2, 2, 2}), 2), 2);
  for (NodeId s = 1; s <= 6; ++s) net.submit(s, increment(s, static_cast<ItemId>(s % 2)));
  net.drain();
  ASSERT_EQ(net.replies.size(), 6u);
  // Every item was incremented three times; the newest copy anywhere says so.
  for (ItemId item : {0, 1}) {
    ItemRecord best{item, 0, 0};
    for (auto& r : net.sites) {
      if (r.store()[static_cast<std::size_t>(item)].version > best.version) best = r.store()[static_cast<std::size_t>(item)];
    }
    EXPECT_EQ(best, (ItemRecord{item, 3, 3}));
  }
}

TEST(Replica, ElectsSmallestWorkingMember) {
  EXPECT_EQ(elect_coordinator(NodeSet::of({3, 5, 7}), NodeSet::of({5, 7})), 5);
  EXPECT_THROW(elect_coordinator(NodeSet::of({3}), NodeSet::of({5})), Error);
}

}  // namespace
}  // namespace cqc
