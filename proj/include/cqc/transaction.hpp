#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/node_set.hpp"

namespace cqc {

using ItemId = int;
using Value = std::int64_t;
using Version = std::uint64_t;
using Clock = std::uint64_t;
using TxnId = std::uint64_t;

// Lamport timestamp (clock, site); ordered lexicographically.
struct Timestamp {
  Clock clock = 0;
  NodeId site = 0;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;

  std::string to_string() const { return std::to_string(clock) + "." + std::to_string(site); }
};

// Receiving a message stamped `incoming` moves the local clock to
// max(incoming + 1, local).
constexpr Clock lamport_update(Clock local, Clock incoming) { return std::max(incoming + 1, local); }

struct ItemRecord {
  ItemId item = 0;
  Value value = 0;
  Version version = 0;

  friend bool operator==(const ItemRecord&, const ItemRecord&) = default;
};

// Right-hand side of a write: a constant, a copy of one item, or the sum of
// some items plus a constant.
struct Expr {
  enum class Kind { Constant, Copy, Sum };

  Kind kind = Kind::Constant;
  Value constant = 0;
  std::vector<ItemId> items;

  static Expr make_constant(Value c) { return {Kind::Constant, c, {}}; }
  static Expr make_copy(ItemId item) { return {Kind::Copy, 0, {item}}; }
  static Expr make_sum(std::vector<ItemId> items, Value c) { return {Kind::Sum, c, std::move(items)}; }

  Value eval(const std::map<ItemId, Value>& inputs) const {
    auto get = [&](ItemId item) {
      auto it = inputs.find(item);
      if (it == inputs.end()) throw Error(ErrorCode::IllegalTransition, "expression reads item outside its inputs");
      return it->second;
    };
    switch (kind) {
      case Kind::Constant: return constant;
      case Kind::Copy: return get(items.at(0));
      case Kind::Sum: {
        Value total = constant;
        for (ItemId item : items) total += get(item);
        return total;
      }
    }
    return 0;
  }

  friend bool operator==(const Expr&, const Expr&) = default;
};

struct WriteOp {
  ItemId item = 0;
  Expr expr;

  friend bool operator==(const WriteOp&, const WriteOp&) = default;
};

// A query has an empty write set and no body.
struct Transaction {
  TxnId id = 0;
  Timestamp ts;
  std::set<ItemId> read_set;
  std::set<ItemId> write_set;
  std::vector<WriteOp> body;

  bool is_query() const { return write_set.empty(); }

  // Items the transaction touches; an update's execution fetches all of them.
  std::set<ItemId> items() const {
    std::set<ItemId> all = read_set;
    all.insert(write_set.begin(), write_set.end());
    return all;
  }

  // Body writes exactly the write set and reads only the read set.
  void validate() const {
    std::set<ItemId> written;
    for (const auto& op : body) {
      written.insert(op.item);
      for (ItemId item : op.expr.items) {
        if (!read_set.count(item)) throw Error(ErrorCode::InvalidParams, "body reads item outside read set");
      }
    }
    if (written != write_set || body.size() != write_set.size()) throw Error(ErrorCode::InvalidParams, "body does not write exactly the write set");
    if (is_query() && read_set.empty()) throw Error(ErrorCode::InvalidParams, "query reads nothing");
  }

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

inline bool intersects(const std::set<ItemId>& a, const std::set<ItemId>& b) {
  return std::any_of(a.begin(), a.end(), [&](ItemId x) { return b.count(x) != 0; });
}

// Read-write, write-read, or write-write overlap.
inline bool conflicts(const Transaction& a, const Transaction& b) {
  return intersects(a.read_set, b.write_set) || intersects(b.read_set, a.write_set) ||
         intersects(a.write_set, b.write_set);
}

// Two transactions clash on one item unless both only read it.
inline bool conflicts_at(const Transaction& a, const Transaction& b, ItemId item) {
  return a.write_set.count(item) || b.write_set.count(item);
}

// Reads and writes produced by executing an update: each written item gets
// the version it was read at plus one.
struct ExecutionResult {
  std::vector<ItemRecord> reads;
  std::vector<ItemRecord> writes;

  friend bool operator==(const ExecutionResult&, const ExecutionResult&) = default;
};

// `inputs` must hold a record for every item in txn.items().
inline ExecutionResult execute(const Transaction& txn, const std::map<ItemId, ItemRecord>& inputs) {
  ExecutionResult result;
  std::map<ItemId, Value> values;
  for (ItemId item : txn.items()) {
    auto it = inputs.find(item);
    if (it == inputs.end()) throw Error(ErrorCode::IllegalTransition, "execution is missing an input item");
    values[item] = it->second.value;
    if (txn.read_set.count(item)) result.reads.push_back(it->second);
  }
  for (const auto& op : txn.body) {
    const auto& base = inputs.at(op.item);
    result.writes.push_back({op.item, op.expr.eval(values), base.version + 1});
  }
  std::sort(result.writes.begin(), result.writes.end(),
            [](const ItemRecord& a, const ItemRecord& b) { return a.item < b.item; });
  return result;
}

}  // namespace cqc
