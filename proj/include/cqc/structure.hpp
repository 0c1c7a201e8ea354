#pragma once

#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/node_set.hpp"

namespace cqc {

// n nodes split into k ordered arcs. Arc i (0-based) owns a contiguous block
// of ids; arc 0 gets 1..n_0, arc 1 the next n_1 ids, and so on.
class CircularStructure {
 public:
  static CircularStructure build(std::span<const int> arc_sizes) {
    if (arc_sizes.empty()) throw Error(ErrorCode::EmptyArcList, "structure needs at least one arc");
    long total = 0;
    for (int s : arc_sizes) {
      if (s < 1) throw Error(ErrorCode::ArcSizeOutOfRange, "arc size " + std::to_string(s) + " < 1");
      total += s;
    }
    const long k = static_cast<long>(arc_sizes.size());
    for (int s : arc_sizes) {
      if (s > total - k + 1) {
        throw Error(ErrorCode::ArcSizeOutOfRange,
                    "arc size " + std::to_string(s) + " exceeds n - k + 1 = " + std::to_string(total - k + 1));
      }
    }
    if (total > kMaxNodes) {
      throw Error(ErrorCode::ArcSizeOutOfRange, "n = " + std::to_string(total) + " exceeds " +
                                                    std::to_string(kMaxNodes) + " nodes");
    }
    return CircularStructure(std::vector<int>(arc_sizes.begin(), arc_sizes.end()));
  }

  static CircularStructure build(std::initializer_list<int> arc_sizes) {
    return build(std::span<const int>(arc_sizes.begin(), arc_sizes.size()));
  }

  int n() const { return n_; }
  int k() const { return static_cast<int>(sizes_.size()); }
  const std::vector<int>& arc_sizes() const { return sizes_; }
  int arc_size(int arc) const { return sizes_[static_cast<std::size_t>(arc)]; }
  NodeSet arc(int arc) const { return arcs_[static_cast<std::size_t>(arc)]; }
  NodeSet all() const { return NodeSet::range(1, n_); }

  int arc_of(NodeId id) const {
    for (int i = 0; i < k(); ++i) {
      if (arcs_[static_cast<std::size_t>(i)].contains(id)) return i;
    }
    return -1;
  }

  // Number of arcs s touches.
  int arcs_intersected(NodeSet s) const {
    int c = 0;
    for (NodeSet a : arcs_) c += a.intersects(s) ? 1 : 0;
    return c;
  }

  // Number of arcs wholly inside s.
  int arcs_contained(NodeSet s) const {
    int c = 0;
    for (NodeSet a : arcs_) c += a.subset_of(s) ? 1 : 0;
    return c;
  }

  std::string describe() const {
    std::string out = "[";
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(sizes_[i]);
    }
    return out + "]";
  }

  friend bool operator==(const CircularStructure& a, const CircularStructure& b) { return a.sizes_ == b.sizes_; }

 private:
  explicit CircularStructure(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    NodeId next = 1;
    for (int s : sizes_) {
      arcs_.push_back(NodeSet::range(next, next + s - 1));
      next += s;
    }
    n_ = next - 1;
  }

  std::vector<int> sizes_;
  std::vector<NodeSet> arcs_;
  int n_ = 0;
};

}  // namespace cqc
