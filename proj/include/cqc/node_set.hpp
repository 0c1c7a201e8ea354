#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

namespace cqc {

// Node ids run 1..n with n <= 64.
using NodeId = int;

inline constexpr int kMaxNodes = 64;

// Fixed-width set of node ids; bit (id - 1) marks membership.
class NodeSet {
 public:
  constexpr NodeSet() = default;
  constexpr explicit NodeSet(std::uint64_t bits) : bits_(bits) {}

  static NodeSet of(std::initializer_list<NodeId> ids) {
    NodeSet s;
    for (NodeId id : ids) s.insert(id);
    return s;
  }

  // {lo, lo + 1, ..., hi}
  static constexpr NodeSet range(NodeId lo, NodeId hi) {
    NodeSet s;
    for (NodeId id = lo; id <= hi; ++id) s.insert(id);
    return s;
  }

  constexpr void insert(NodeId id) { bits_ |= bit(id); }
  constexpr void erase(NodeId id) { bits_ &= ~bit(id); }
  constexpr bool contains(NodeId id) const { return (bits_ & bit(id)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr std::uint64_t bits() const { return bits_; }

  constexpr bool subset_of(NodeSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool intersects(NodeSet other) const { return (bits_ & other.bits_) != 0; }

  // Smallest member; 0 when empty.
  constexpr NodeId min() const { return empty() ? 0 : std::countr_zero(bits_) + 1; }

  std::vector<NodeId> members() const {
    std::vector<NodeId> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) out.push_back(std::countr_zero(b) + 1);
    return out;
  }

  // Space separated ascending ids, e.g. "1 2 3".
  std::string to_string() const {
    std::string out;
    for (NodeId id : members()) {
      if (!out.empty()) out += ' ';
      out += std::to_string(id);
    }
    return out;
  }

  friend constexpr NodeSet operator|(NodeSet a, NodeSet b) { return NodeSet(a.bits_ | b.bits_); }
  friend constexpr NodeSet operator&(NodeSet a, NodeSet b) { return NodeSet(a.bits_ & b.bits_); }
  friend constexpr NodeSet operator-(NodeSet a, NodeSet b) { return NodeSet(a.bits_ & ~b.bits_); }
  NodeSet& operator|=(NodeSet o) { bits_ |= o.bits_; return *this; }
  NodeSet& operator&=(NodeSet o) { bits_ &= o.bits_; return *this; }
  friend constexpr bool operator==(NodeSet, NodeSet) = default;
  // Orders by bit pattern; gives canonical ordering for sorted quorum lists.
  friend constexpr bool operator<(NodeSet a, NodeSet b) { return a.bits_ < b.bits_; }

 private:
  static constexpr std::uint64_t bit(NodeId id) { return std::uint64_t{1} << (id - 1); }

  std::uint64_t bits_ = 0;
};

}  // namespace cqc
