#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/node_set.hpp"
#include "cqc/structure.hpp"

namespace cqc {

// Read-dominant family: writes take t whole arcs plus one node of every other
// arc; reads take one node from each of k - t + 1 arcs, or (when
// full_arc_reads is set) one complete arc.
struct AlphaFamily {
  CircularStructure structure;
  int t = 1;
  bool full_arc_reads = true;
};

// Writes take t whole arcs with t >= ceil((k + 1) / 2); reads take one node
// from each of k - t + 1 arcs.
struct BetaFamily {
  CircularStructure structure;
  int t = 1;
};

// Weighted voting with unit weights.
struct MajorityFamily {
  int n = 1;
  int v_r = 1;
  int v_w = 1;
};

inline constexpr int kMaxEnumerationNodes = 24;

class QuorumFamily {
 public:
  using Variant = std::variant<AlphaFamily, BetaFamily, MajorityFamily>;

  static QuorumFamily alpha(CircularStructure s, int t, bool full_arc_reads = true) {
    if (t < 1 || t > s.k()) {
      throw Error(ErrorCode::InvalidParams,
                  "alpha needs 1 <= t <= k, got t = " + std::to_string(t) + ", k = " + std::to_string(s.k()));
    }
    return QuorumFamily(AlphaFamily{std::move(s), t, full_arc_reads});
  }

  static QuorumFamily beta(CircularStructure s, int t) {
    const int lo = (s.k() + 2) / 2;  // ceil((k + 1) / 2)
    if (t < lo || t > s.k()) {
      throw Error(ErrorCode::InvalidParams, "beta needs " + std::to_string(lo) + " <= t <= " +
                                                std::to_string(s.k()) + ", got t = " + std::to_string(t));
    }
    return QuorumFamily(BetaFamily{std::move(s), t});
  }

  static QuorumFamily majority(int n, int v_r, int v_w) {
    if (n < 1 || n > kMaxNodes || v_r < 1 || v_r > n || v_w < 1 || v_w > n) {
      throw Error(ErrorCode::InvalidParams, "majority votes out of range");
    }
    if (v_r + v_w <= n || 2 * v_w <= n) {
      throw Error(ErrorCode::InvalidParams, "majority needs v_r + v_w > n and 2 * v_w > n");
    }
    return QuorumFamily(MajorityFamily{n, v_r, v_w});
  }

  const Variant& variant() const { return family_; }
  const AlphaFamily* as_alpha() const { return std::get_if<AlphaFamily>(&family_); }
  const BetaFamily* as_beta() const { return std::get_if<BetaFamily>(&family_); }
  const MajorityFamily* as_majority() const { return std::get_if<MajorityFamily>(&family_); }

  // Structure for alpha/beta; nullptr for majority.
  const CircularStructure* structure() const {
    if (auto* a = as_alpha()) return &a->structure;
    if (auto* b = as_beta()) return &b->structure;
    return nullptr;
  }

  int n() const {
    if (auto* m = as_majority()) return m->n;
    return structure()->n();
  }

  NodeSet all() const { return NodeSet::range(1, n()); }

  // Arcs a cross read quorum must touch (k - t + 1); 0 for majority.
  int read_arc_count() const {
    if (auto* a = as_alpha()) return a->structure.k() - a->t + 1;
    if (auto* b = as_beta()) return b->structure.k() - b->t + 1;
    return 0;
  }

  bool is_read_quorum(NodeSet s) const {
    if (auto* a = as_alpha()) {
      const auto& c = a->structure;
      if (c.arcs_intersected(s) >= read_arc_count()) return true;
      return a->full_arc_reads && c.arcs_contained(s) >= 1;
    }
    if (auto* b = as_beta()) return b->structure.arcs_intersected(s) >= read_arc_count();
    return s.size() >= as_majority()->v_r;
  }

  bool is_write_quorum(NodeSet s) const {
    if (auto* a = as_alpha()) {
      const auto& c = a->structure;
      return c.arcs_contained(s) >= a->t && c.arcs_intersected(s) == c.k();
    }
    if (auto* b = as_beta()) return b->structure.arcs_contained(s) >= b->t;
    return s.size() >= as_majority()->v_w;
  }

  // Display name used in reports; comparison constructors set a friendlier one.
  const std::string& name() const { return name_; }
  QuorumFamily& with_name(std::string name) {
    name_ = std::move(name);
    return *this;
  }

  std::string describe() const {
    if (auto* a = as_alpha()) {
      return "alpha(" + arcs_label(a->structure) + ",t=" + std::to_string(a->t) +
             (a->full_arc_reads ? "" : ",cross-reads") + ")";
    }
    if (auto* b = as_beta()) return "beta(" + arcs_label(b->structure) + ",t=" + std::to_string(b->t) + ")";
    auto* m = as_majority();
    return "majority(" + std::to_string(m->n) + "," + std::to_string(m->v_r) + "," + std::to_string(m->v_w) + ")";
  }

 private:
  explicit QuorumFamily(Variant v) : family_(std::move(v)) { name_ = describe(); }

  // "8x2" for eight arcs of two nodes, otherwise the explicit size list.
  static std::string arcs_label(const CircularStructure& s) {
    const auto& sizes = s.arc_sizes();
    if (sizes.size() > 1 && std::all_of(sizes.begin(), sizes.end(), [&](int x) { return x == sizes.front(); })) {
      return std::to_string(sizes.size()) + "x" + std::to_string(sizes.front());
    }
    return s.describe();
  }

  Variant family_;
  std::string name_;
};

// --- comparison families ---------------------------------------------------

// Read-one-write-all: n singleton arcs, every arc writing.
inline QuorumFamily make_rowa(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidParams, "rowa needs n >= 1");
  std::vector<int> arcs(static_cast<std::size_t>(n), 1);
  return QuorumFamily::alpha(CircularStructure::build(arcs), n).with_name("rowa(" + std::to_string(n) + ")");
}

// rows x cols grid; each column is an arc, reads take one node per column.
inline QuorumFamily make_grid(int rows, int cols) {
  if (rows < 1 || cols < 1) throw Error(ErrorCode::InvalidParams, "grid needs positive dimensions");
  std::vector<int> arcs(static_cast<std::size_t>(cols), rows);
  return QuorumFamily::alpha(CircularStructure::build(arcs), 1, false)
      .with_name("grid(" + std::to_string(rows) + "x" + std::to_string(cols) + ")");
}

// Diamond rows become arcs; reads are a whole row or one node per row.
inline QuorumFamily make_diamond(const std::vector<int>& row_sizes) {
  if (row_sizes.empty()) throw Error(ErrorCode::InvalidParams, "diamond needs at least one row");
  std::string label = "diamond(";
  for (std::size_t i = 0; i < row_sizes.size(); ++i) label += (i ? "," : "") + std::to_string(row_sizes[i]);
  return QuorumFamily::alpha(CircularStructure::build(row_sizes), 1, true).with_name(label + ")");
}

// Write hyper-planes become arcs. A D-space system is the t = 1 case.
inline QuorumFamily make_generalized_grid(int plane_count, int plane_size, int t) {
  if (plane_count < 1 || plane_size < 1) throw Error(ErrorCode::InvalidParams, "generalized grid needs positive sizes");
  std::vector<int> arcs(static_cast<std::size_t>(plane_count), plane_size);
  return QuorumFamily::alpha(CircularStructure::build(arcs), t, false)
      .with_name("generalized_grid(" + std::to_string(plane_count) + "x" + std::to_string(plane_size) +
                 ",t=" + std::to_string(t) + ")");
}

inline QuorumFamily make_majority(int n, int v_r, int v_w) { return QuorumFamily::majority(n, v_r, v_w); }

// --- enumeration -------------------------------------------------------------

namespace detail {

inline void require_enumerable(const QuorumFamily& f) {
  if (f.n() > kMaxEnumerationNodes) {
    throw Error(ErrorCode::TooLargeToEnumerate,
                "n = " + std::to_string(f.n()) + " exceeds " + std::to_string(kMaxEnumerationNodes));
  }
}

// Calls fn(mask) for every `choose`-element subset of {0..count-1}.
template <typename Fn>
void for_each_subset(int count, int choose, Fn&& fn) {
  if (choose < 0 || choose > count) return;
  if (choose == 0) {
    fn(std::uint64_t{0});
    return;
  }
  std::uint64_t mask = (std::uint64_t{1} << choose) - 1;
  const std::uint64_t limit = std::uint64_t{1} << count;
  while (mask < limit) {
    fn(mask);
    // Gosper's hack: next mask with the same popcount.
    const std::uint64_t c = mask & (~mask + 1);
    const std::uint64_t r = mask + c;
    mask = (((r ^ mask) >> 2) / c) | r;
  }
}

// Calls fn(base | picks) for every way of taking one node from each listed arc.
template <typename Fn>
void for_each_pick(const CircularStructure& s, const std::vector<int>& arcs, std::size_t pos, NodeSet acc, Fn& fn) {
  if (pos == arcs.size()) {
    fn(acc);
    return;
  }
  for (NodeId id : s.arc(arcs[pos]).members()) {
    NodeSet next = acc;
    next.insert(id);
    for_each_pick(s, arcs, pos + 1, next, fn);
  }
}

inline std::vector<int> arcs_in(std::uint64_t mask, int k) {
  std::vector<int> out;
  for (int i = 0; i < k; ++i) {
    if (mask & (std::uint64_t{1} << i)) out.push_back(i);
  }
  return out;
}

// Lexicographic order on ascending member lists.
inline bool lex_less(NodeSet a, NodeSet b) {
  auto ma = a.members();
  auto mb = b.members();
  return std::lexicographical_compare(ma.begin(), ma.end(), mb.begin(), mb.end());
}

// Drops duplicates and any set that still satisfies `pred` after removing one
// member. Under a monotone predicate that leaves exactly the minimal sets.
template <typename Pred>
std::vector<NodeSet> minimal_only(std::vector<NodeSet> sets, Pred&& pred) {
  std::sort(sets.begin(), sets.end());
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  std::vector<NodeSet> out;
  out.reserve(sets.size());
  for (NodeSet s : sets) {
    bool minimal = true;
    for (NodeId id : s.members()) {
      NodeSet smaller = s;
      smaller.erase(id);
      if (pred(smaller)) {
        minimal = false;
        break;
      }
    }
    if (minimal) out.push_back(s);
  }
  std::sort(out.begin(), out.end(), lex_less);
  return out;
}

inline void cross_reads(const CircularStructure& s, int arcs_needed, std::vector<NodeSet>& out) {
  auto sink = [&](NodeSet q) { out.push_back(q); };
  for_each_subset(s.k(), arcs_needed, [&](std::uint64_t mask) {
    for_each_pick(s, arcs_in(mask, s.k()), 0, NodeSet{}, sink);
  });
}

inline void all_subsets_of_size(int n, int size, std::vector<NodeSet>& out) {
  for_each_subset(n, size, [&](std::uint64_t mask) { out.push_back(NodeSet(mask)); });
}

}  // namespace detail

// Minimal read quorums in lexicographic order of their member lists.
inline std::vector<NodeSet> minimal_read_quorums(const QuorumFamily& f) {
  detail::require_enumerable(f);
  std::vector<NodeSet> candidates;
  if (auto* a = f.as_alpha()) {
    detail::cross_reads(a->structure, f.read_arc_count(), candidates);
    if (a->full_arc_reads) {
      for (int i = 0; i < a->structure.k(); ++i) candidates.push_back(a->structure.arc(i));
    }
  } else if (auto* b = f.as_beta()) {
    detail::cross_reads(b->structure, f.read_arc_count(), candidates);
  } else {
    detail::all_subsets_of_size(f.n(), f.as_majority()->v_r, candidates);
  }
  return detail::minimal_only(std::move(candidates), [&](NodeSet s) { return f.is_read_quorum(s); });
}

// Every write quorum the construction produces (t writing arcs plus a
// representative of each other arc for alpha, t whole arcs for beta),
// deduplicated but not pruned. Some may be supersets of others; each read
// quorum lies inside at least one of them.
inline std::vector<NodeSet> write_quorum_shapes(const QuorumFamily& f) {
  detail::require_enumerable(f);
  std::vector<NodeSet> candidates;
  if (auto* a = f.as_alpha()) {
    const auto& s = a->structure;
    detail::for_each_subset(s.k(), a->t, [&](std::uint64_t mask) {
      NodeSet writing;
      std::vector<int> others;
      for (int i = 0; i < s.k(); ++i) {
        if (mask & (std::uint64_t{1} << i)) {
          writing |= s.arc(i);
        } else {
          others.push_back(i);
        }
      }
      auto sink = [&](NodeSet q) { candidates.push_back(q); };
      detail::for_each_pick(s, others, 0, writing, sink);
    });
  } else if (auto* b = f.as_beta()) {
    const auto& s = b->structure;
    detail::for_each_subset(s.k(), b->t, [&](std::uint64_t mask) {
      NodeSet writing;
      for (int i : detail::arcs_in(mask, s.k())) writing |= s.arc(i);
      candidates.push_back(writing);
    });
  } else {
    detail::all_subsets_of_size(f.n(), f.as_majority()->v_w, candidates);
  }
  std::sort(candidates.begin(), candidates.end(), detail::lex_less);
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  return candidates;
}

inline std::vector<NodeSet> minimal_write_quorums(const QuorumFamily& f) {
  return detail::minimal_only(write_quorum_shapes(f), [&](NodeSet s) { return f.is_write_quorum(s); });
}

}  // namespace cqc
