#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cqc/node_set.hpp"
#include "cqc/transaction.hpp"

namespace cqc {

enum class MsgKind {
  QueryRead,
  QueryReply,
  UpdateRequest,
  Reply,
  CancelReply,
  ConfirmCancelReply,
  Summit,
  CommitRequest,
  Commit,
  Committed,
  Release,
  Restart,
  Failed,
  ReadAll,
  ReadAllReply,
  PrepareStart,
  PrepareStartReply,
  StartData,
  DataReceived,
  Start,
};

inline constexpr std::string_view kMsgKindNames[] = {
    "QueryRead",   "QueryReply", "UpdateRequest", "Reply",        "CancelReply",       "ConfirmCancelReply",
    "Summit",      "CommitRequest", "Commit",     "Committed",    "Release",           "Restart",
    "Failed",      "ReadAll",    "ReadAllReply",  "PrepareStart", "PrepareStartReply", "StartData",
    "DataReceived", "Start",
};

inline std::string_view to_string(MsgKind kind) { return kMsgKindNames[static_cast<int>(kind)]; }

inline std::optional<MsgKind> parse_msg_kind(std::string_view name) {
  for (int i = 0; i < static_cast<int>(std::size(kMsgKindNames)); ++i) {
    if (kMsgKindNames[i] == name) return static_cast<MsgKind>(i);
  }
  return std::nullopt;
}

// Protocol messages share one flat layout; each kind uses a subset of the
// payload fields:
//   QueryRead          query_id, items, ts (owning update, if any), recovery
//   QueryReply         query_id, records
//   UpdateRequest      ts, txn, quorum
//   Reply, CancelReply ts, txn, quorum, round
//   ConfirmCancelReply ts, round
//   Release            ts
//   Summit             ts, txn, quorum
//   CommitRequest, Commit, Committed, Restart   ts, txn, quorum, result
//   ReadAllReply, PrepareStartReply, StartData   records
struct Message {
  MsgKind kind = MsgKind::Failed;
  NodeId from = 0;
  Clock clock = 0;

  Timestamp ts;
  Transaction txn;
  NodeSet quorum;
  std::uint64_t query_id = 0;
  std::uint64_t round = 0;  // reply round; links with no FIFO order can reorder Reply and CancelReply
  bool recovery = false;  // read issued for a recovering site; ignores update locks
  std::vector<ItemId> items;
  std::vector<ItemRecord> records;
  ExecutionResult result;

  friend bool operator==(const Message&, const Message&) = default;
};

}  // namespace cqc
