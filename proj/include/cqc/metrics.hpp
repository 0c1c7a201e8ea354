#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include "cqc/error.hpp"
#include "cqc/family.hpp"

namespace cqc {

// Probability that a single replica is working. Construction clamps nothing;
// out of range values are rejected.
class Probability {
 public:
  constexpr Probability() = default;
  explicit Probability(double p) : p_(p) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidParams, "probability outside [0, 1]");
  }
  constexpr double value() const { return p_; }
  constexpr double complement() const { return 1.0 - p_; }

 private:
  double p_ = 0.0;
};

struct MetricsReport {
  std::set<int> read_quorum_sizes;
  int min_write_quorum = 0;
  int max_write_quorum = 0;
  int fault_tolerance = 0;
  int read_capacity = 0;
  double read_availability = 0.0;
  double structural_write_availability = 0.0;
  double protocol_write_availability = 0.0;
};

// --- quorum sizes ------------------------------------------------------------

inline std::set<int> read_quorum_sizes(const QuorumFamily& f) {
  if (auto* m = f.as_majority()) return {m->v_r};
  std::set<int> sizes{f.read_arc_count()};
  if (auto* a = f.as_alpha(); a && a->full_arc_reads) {
    for (int s : a->structure.arc_sizes()) sizes.insert(s);
  }
  return sizes;
}

struct WriteQuorumSizes {
  int min = 0;
  int max = 0;
};

inline WriteQuorumSizes write_quorum_sizes(const QuorumFamily& f) {
  if (auto* m = f.as_majority()) return {m->v_w, m->v_w};
  const auto& s = *f.structure();
  const int t = f.as_alpha() ? f.as_alpha()->t : f.as_beta()->t;
  // Alpha adds one representative from each of the k - t non-writing arcs.
  const int extra = f.as_alpha() ? s.k() - t : 0;
  std::vector<int> sizes = s.arc_sizes();
  std::sort(sizes.begin(), sizes.end());
  int lo = 0;
  int hi = 0;
  for (int i = 0; i < t; ++i) {
    lo += sizes[static_cast<std::size_t>(i)];
    hi += sizes[sizes.size() - 1 - static_cast<std::size_t>(i)];
  }
  return {extra + lo, extra + hi};
}

inline int fault_tolerance(const QuorumFamily& f) { return f.n() - *read_quorum_sizes(f).begin(); }

// --- read capacity -----------------------------------------------------------

// Disjoint cross read quorums from the group recursion: arcs sorted by size
// descending, cut into consecutive groups of k - t + 1, each complete group
// worth its smallest arc. Leftover arcs count for nothing.
inline int disjoint_cross_reads(const CircularStructure& s, int group) {
  std::vector<int> sizes = s.arc_sizes();
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  int total = 0;
  for (std::size_t start = 0; start + static_cast<std::size_t>(group) <= sizes.size();
       start += static_cast<std::size_t>(group)) {
    total += sizes[start + static_cast<std::size_t>(group) - 1];
  }
  return total;
}

inline int read_capacity(const QuorumFamily& f) {
  if (auto* m = f.as_majority()) return m->n / m->v_r;
  const int disjoint = disjoint_cross_reads(*f.structure(), f.read_arc_count());
  if (auto* a = f.as_alpha(); a && a->full_arc_reads) return std::max(a->structure.k(), disjoint);
  return disjoint;
}

inline constexpr int kMaxExactCapacityNodes = 16;

namespace detail {

struct PackingSearch {
  // quorums_by_min[i] holds quorums whose smallest member is node i + 1.
  std::vector<std::vector<NodeSet>> quorums_by_min;
  int min_size = 1;
  int best = 0;

  void search(NodeSet available, int count) {
    best = std::max(best, count);
    if (count + available.size() / min_size <= best) return;
    if (available.empty()) return;
    const NodeId lowest = available.min();
    for (NodeSet q : quorums_by_min[static_cast<std::size_t>(lowest - 1)]) {
      if (q.subset_of(available)) search(available - q, count + 1);
    }
    NodeSet rest = available;
    rest.erase(lowest);
    search(rest, count);
  }
};

}  // namespace detail

// Exact maximum number of pairwise disjoint read quorums, by branch and bound
// over the minimal read quorums.
inline int exact_read_capacity(const QuorumFamily& f) {
  if (f.n() > kMaxExactCapacityNodes) {
    throw Error(ErrorCode::TooLargeToEnumerate,
                "exact read capacity limited to n <= " + std::to_string(kMaxExactCapacityNodes));
  }
  const auto reads = minimal_read_quorums(f);
  detail::PackingSearch search;
  search.quorums_by_min.resize(static_cast<std::size_t>(f.n()));
  search.min_size = f.n();
  for (NodeSet q : reads) {
    search.quorums_by_min[static_cast<std::size_t>(q.min() - 1)].push_back(q);
    search.min_size = std::min(search.min_size, q.size());
  }
  search.search(f.all(), 0);
  return search.best;
}

// --- availability ------------------------------------------------------------

namespace detail {

struct ArcStateProbs {
  double full;     // every node up
  double partial;  // some but not all up
  double down;     // no node up
};

inline ArcStateProbs arc_state(int size, double p) {
  const double full = std::pow(p, size);
  const double down = std::pow(1.0 - p, size);
  return {full, 1.0 - full - down, down};
}

// dist[f][u]: probability that exactly f arcs are fully up and exactly u arcs
// have at least one node up.
inline std::vector<std::vector<double>> arc_count_distribution(const CircularStructure& s, double p) {
  const int k = s.k();
  std::vector<std::vector<double>> dist(static_cast<std::size_t>(k + 1),
                                        std::vector<double>(static_cast<std::size_t>(k + 1), 0.0));
  dist[0][0] = 1.0;
  for (int i = 0; i < k; ++i) {
    const auto st = arc_state(s.arc_size(i), p);
    std::vector<std::vector<double>> next(dist.size(), std::vector<double>(dist.size(), 0.0));
    for (int f = 0; f <= i; ++f) {
      for (int u = f; u <= i; ++u) {
        const double cur = dist[static_cast<std::size_t>(f)][static_cast<std::size_t>(u)];
        if (cur == 0.0) continue;
        next[static_cast<std::size_t>(f + 1)][static_cast<std::size_t>(u + 1)] += cur * st.full;
        next[static_cast<std::size_t>(f)][static_cast<std::size_t>(u + 1)] += cur * st.partial;
        next[static_cast<std::size_t>(f)][static_cast<std::size_t>(u)] += cur * st.down;
      }
    }
    dist = std::move(next);
  }
  return dist;
}

template <typename Accept>
double sum_distribution(const CircularStructure& s, double p, Accept&& accept) {
  const auto dist = arc_count_distribution(s, p);
  double total = 0.0;
  for (int f = 0; f <= s.k(); ++f) {
    for (int u = f; u <= s.k(); ++u) {
      if (accept(f, u)) total += dist[static_cast<std::size_t>(f)][static_cast<std::size_t>(u)];
    }
  }
  return total;
}

inline double binomial_tail(int n, int at_least, double p) {
  double total = 0.0;
  double coeff = 1.0;  // C(n, j), built incrementally
  for (int j = 0; j <= n; ++j) {
    if (j > 0) coeff = coeff * (n - j + 1) / j;
    if (j >= at_least) total += coeff * std::pow(p, j) * std::pow(1.0 - p, n - j);
  }
  return total;
}

}  // namespace detail

// P(some read quorum is fully operational).
inline double read_availability(const QuorumFamily& f, Probability prob) {
  const double p = prob.value();
  if (auto* m = f.as_majority()) return detail::binomial_tail(m->n, m->v_r, p);
  const int g = f.read_arc_count();
  const bool full_arcs = f.as_alpha() && f.as_alpha()->full_arc_reads;
  return detail::sum_distribution(*f.structure(), p, [&](int full, int up) {
    return up >= g || (full_arcs && full >= 1);
  });
}

// P(some write quorum is fully operational).
inline double structural_write_availability(const QuorumFamily& f, Probability prob) {
  const double p = prob.value();
  if (auto* m = f.as_majority()) return detail::binomial_tail(m->n, m->v_w, p);
  const auto& s = *f.structure();
  if (auto* a = f.as_alpha()) {
    return detail::sum_distribution(s, p, [&](int full, int up) { return full >= a->t && up == s.k(); });
  }
  const int t = f.as_beta()->t;
  return detail::sum_distribution(s, p, [&](int full, int) { return full >= t; });
}

// Updates complete whenever a working read quorum exists (commit needs
// acknowledgements from a working read quorum only).
inline double protocol_write_availability(const QuorumFamily& f, Probability p) {
  return read_availability(f, p);
}

inline constexpr int kMaxSubsetSumArcs = 16;

// Read availability as an explicit sum over arc subsets. Alpha with full-arc
// reads: P(some arc fully up) + sum over m, |m| >= k - t + 1, of
// prod_{i in m} P(arc i partial) * prod_{i not in m} P(arc i down).
// Otherwise: sum over m of prod_{i in m} P(arc i has a node up) *
// prod_{i not in m} P(arc i down).
inline double read_availability_subset_sum(const QuorumFamily& f, Probability prob) {
  const double p = prob.value();
  if (auto* m = f.as_majority()) return detail::binomial_tail(m->n, m->v_r, p);
  const auto& s = *f.structure();
  if (s.k() > kMaxSubsetSumArcs) throw Error(ErrorCode::TooLargeToEnumerate, "subset sum limited to 16 arcs");
  const int k = s.k();
  const int g = f.read_arc_count();
  const bool full_arcs = f.as_alpha() && f.as_alpha()->full_arc_reads;

  double some_full = 0.0;
  if (full_arcs) {
    double none_full = 1.0;
    for (int i = 0; i < k; ++i) none_full *= 1.0 - std::pow(p, s.arc_size(i));
    some_full = 1.0 - none_full;
  }
  double spread = 0.0;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << k); ++m) {
    if (std::popcount(m) < g) continue;
    double term = 1.0;
    for (int i = 0; i < k; ++i) {
      const auto st = detail::arc_state(s.arc_size(i), p);
      if (m & (std::uint64_t{1} << i)) {
        term *= full_arcs ? st.partial : st.partial + st.full;
      } else {
        term *= st.down;
      }
    }
    spread += term;
  }
  return some_full + spread;
}

// Structural write availability as a sum over (fully up, partially up) arc
// subset pairs.
inline double structural_write_availability_subset_sum(const QuorumFamily& f, Probability prob) {
  const double p = prob.value();
  if (auto* m = f.as_majority()) return detail::binomial_tail(m->n, m->v_w, p);
  const auto& s = *f.structure();
  if (s.k() > kMaxSubsetSumArcs) throw Error(ErrorCode::TooLargeToEnumerate, "subset sum limited to 16 arcs");
  const int k = s.k();
  const bool alpha = f.as_alpha() != nullptr;
  const int t = alpha ? f.as_alpha()->t : f.as_beta()->t;
  double total = 0.0;
  for (std::uint64_t full = 0; full < (std::uint64_t{1} << k); ++full) {
    if (std::popcount(full) < t) continue;
    double term = 1.0;
    for (int i = 0; i < k; ++i) {
      const auto st = detail::arc_state(s.arc_size(i), p);
      if (full & (std::uint64_t{1} << i)) {
        term *= st.full;
      } else {
        // Alpha still needs a representative in every other arc.
        term *= alpha ? st.partial : st.partial + st.down;
      }
    }
    total += term;
  }
  return total;
}

// --- brute force oracle ------------------------------------------------------

inline constexpr int kMaxBruteForceNodes = 20;

// histogram[j] = number of up-sets of size j accepted by the predicate.
inline std::vector<std::uint64_t> accepted_by_size(const std::function<bool(NodeSet)>& predicate, int n) {
  if (n > kMaxBruteForceNodes) {
    throw Error(ErrorCode::TooLargeToEnumerate, "brute force limited to n <= " + std::to_string(kMaxBruteForceNodes));
  }
  std::vector<std::uint64_t> histogram(static_cast<std::size_t>(n + 1), 0);
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    NodeSet up(bits);
    if (predicate(up)) ++histogram[static_cast<std::size_t>(up.size())];
  }
  return histogram;
}

inline double availability_from_histogram(const std::vector<std::uint64_t>& histogram, Probability prob) {
  const double p = prob.value();
  const int n = static_cast<int>(histogram.size()) - 1;
  double total = 0.0;
  for (int j = 0; j <= n; ++j) {
    if (histogram[static_cast<std::size_t>(j)] == 0) continue;
    total += static_cast<double>(histogram[static_cast<std::size_t>(j)]) * std::pow(p, j) * std::pow(1.0 - p, n - j);
  }
  return total;
}

// Sum over all 2^n up/down assignments of P(assignment) * [predicate(up set)].
inline double brute_force_availability(const std::function<bool(NodeSet)>& predicate, int n, Probability p) {
  return availability_from_histogram(accepted_by_size(predicate, n), p);
}

// --- report ------------------------------------------------------------------

inline MetricsReport analyze(const QuorumFamily& f, Probability p) {
  MetricsReport r;
  r.read_quorum_sizes = read_quorum_sizes(f);
  const auto w = write_quorum_sizes(f);
  r.min_write_quorum = w.min;
  r.max_write_quorum = w.max;
  r.fault_tolerance = fault_tolerance(f);
  r.read_capacity = read_capacity(f);
  r.read_availability = read_availability(f, p);
  r.structural_write_availability = structural_write_availability(f, p);
  r.protocol_write_availability = protocol_write_availability(f, p);
  return r;
}

}  // namespace cqc
