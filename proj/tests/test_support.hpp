#pragma once

// Test-only helpers: configuration generators and brute-force oracles that
// do not go through the library's enumeration code.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "cqc/family.hpp"

namespace cqc::testing {

// Every ordered composition of n into positive parts.
inline std::vector<std::vector<int>> compositions(int n) {
  std::vector<std::vector<int>> out;
  // Each of the n - 1 gaps either cuts or not.
  for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
    std::vector<int> parts;
    int run = 1;
    for (int gap = 0; gap < n - 1; ++gap) {
      if (cuts & (1u << gap)) {
        parts.push_back(run);
        run = 1;
      } else {
        ++run;
      }
    }
    parts.push_back(run);
    out.push_back(parts);
  }
  return out;
}

// Every family over a composition: alpha with both read rules for each t, and
// beta for each admissible t.
inline std::vector<QuorumFamily> families_over(const std::vector<int>& arcs) {
  std::vector<QuorumFamily> out;
  auto s = CircularStructure::build(arcs);
  const int k = s.k();
  for (int t = 1; t <= k; ++t) {
    out.push_back(QuorumFamily::alpha(s, t, true));
    out.push_back(QuorumFamily::alpha(s, t, false));
    if (2 * t >= k + 1) out.push_back(QuorumFamily::beta(s, t));
  }
  return out;
}

// Membership test written from the arc definitions, independent of
// QuorumFamily's predicates: counts touched and covered arcs by walking ids.
struct ArcCounts {
  int touched = 0;
  int covered = 0;
};

inline ArcCounts count_arcs(const std::vector<int>& arcs, NodeSet s) {
  ArcCounts c;
  int id = 1;
  for (int size : arcs) {
    int inside = 0;
    for (int j = 0; j < size; ++j, ++id) inside += s.contains(id) ? 1 : 0;
    c.touched += inside > 0 ? 1 : 0;
    c.covered += inside == size ? 1 : 0;
  }
  return c;
}

inline bool oracle_is_read(const QuorumFamily& f, NodeSet s) {
  if (auto* m = f.as_majority()) return s.size() >= m->v_r;
  const auto& arcs = f.structure()->arc_sizes();
  const int k = static_cast<int>(arcs.size());
  const auto c = count_arcs(arcs, s);
  if (auto* a = f.as_alpha()) return c.touched >= k - a->t + 1 || (a->full_arc_reads && c.covered >= 1);
  return c.touched >= k - f.as_beta()->t + 1;
}

inline bool oracle_is_write(const QuorumFamily& f, NodeSet s) {
  if (auto* m = f.as_majority()) return s.size() >= m->v_w;
  const auto& arcs = f.structure()->arc_sizes();
  const int k = static_cast<int>(arcs.size());
  const auto c = count_arcs(arcs, s);
  if (auto* a = f.as_alpha()) return c.covered >= a->t && c.touched == k;
  return c.covered >= f.as_beta()->t;
}

// Minimal accepted subsets of 1..n by exhaustive scan plus pairwise pruning.
inline std::vector<NodeSet> oracle_minimal(int n, const std::function<bool(NodeSet)>& accept) {
  std::vector<NodeSet> hits;
  for (std::uint64_t b = 1; b < (std::uint64_t{1} << n); ++b) {
    if (accept(NodeSet(b))) hits.push_back(NodeSet(b));
  }
  std::vector<NodeSet> out;
  for (NodeSet h : hits) {
    bool minimal = std::none_of(hits.begin(), hits.end(), [&](NodeSet o) { return o != h && o.subset_of(h); });
    if (minimal) out.push_back(h);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<NodeSet> sorted(std::vector<NodeSet> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace cqc::testing
