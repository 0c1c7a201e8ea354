#include <gtest/gtest.h>

#include <cmath>

#include "cqc/metrics.hpp"
#include "test_support.hpp"

namespace cqc {
namespace {

QuorumFamily alpha_8x2() { return QuorumFamily::alpha(CircularStructure::build(std::vector<int>(8, 2)), 7); }
QuorumFamily beta_16x1() { return QuorumFamily::beta(CircularStructure::build(std::vector<int>(16, 1)), 15); }

TEST(Sizes, ReadQuorumSizes) {
  EXPECT_EQ(read_quorum_sizes(alpha_8x2()), (std::set<int>{2}));
  EXPECT_EQ(read_quorum_sizes(beta_16x1()), (std::set<int>{2}));
  EXPECT_EQ(read_quorum_sizes(make_rowa(6)), (std::set<int>{1}));
  auto mixed = QuorumFamily::alpha(CircularStructure::build({1, 2, 3}), 2);
  EXPECT_EQ(read_quorum_sizes(mixed), (std::set<int>{1, 2, 3}));
  EXPECT_EQ(read_quorum_sizes(make_grid(2, 8)), (std::set<int>{8}));
}

TEST(Sizes, WriteQuorumSizes) {
  auto a = write_quorum_sizes(alpha_8x2());
  EXPECT_EQ(a.min, 15);
  EXPECT_EQ(a.max, 15);
  auto b = write_quorum_sizes(beta_16x1());
  EXPECT_EQ(b.min, 15);
  EXPECT_EQ(b.max, 15);
  auto uneven = write_quorum_sizes(QuorumFamily::alpha(CircularStructure::build({1, 2, 3}), 1));
  EXPECT_EQ(uneven.min, 3);
  EXPECT_EQ(uneven.max, 5);
  auto m = write_quorum_sizes(make_majority(16, 2, 15));
  EXPECT_EQ(m.min, 15);
}

TEST(Sizes, WriteSizesBracketEnumeration) {
  for (int n = 1; n <= 7; ++n) {
    for (const auto& arcs : testing::compositions(n)) {
      for (const auto& f : testing::families_over(arcs)) {
        auto writes = minimal_write_quorums(f);
        auto sizes = write_quorum_sizes(f);
        int lo = n, hi = 0;
        for (NodeSet w : writes) {
          lo = std::min(lo, w.size());
          hi = std::max(hi, w.size());
        }
        // Pruning can drop the largest shapes, never the smallest.
        EXPECT_EQ(sizes.min, lo) << f.describe();
        EXPECT_GE(sizes.max, hi) << f.describe();
      }
    }
  }
}

TEST(FaultTolerance, Examples) {
  EXPECT_EQ(fault_tolerance(alpha_8x2()), 14);
  EXPECT_EQ(fault_tolerance(make_rowa(9)), 8);
  EXPECT_EQ(fault_tolerance(make_majority(16, 2, 15)), 14);
  EXPECT_EQ(fault_tolerance(beta_16x1()), 14);
}

TEST(ReadCapacity, Examples) {
  EXPECT_EQ(read_capacity(alpha_8x2()), 8);
  EXPECT_EQ(read_capacity(beta_16x1()), 8);
  EXPECT_EQ(read_capacity(QuorumFamily::alpha(CircularStructure::build({3, 2, 1}), 3)), 6);
  EXPECT_EQ(read_capacity(make_grid(2, 8)), 2);
  EXPECT_EQ(read_capacity(make_majority(16, 2, 15)), 8);
}

TEST(ExactReadCapacity, Examples) {
  EXPECT_EQ(exact_read_capacity(alpha_8x2()), 8);
  EXPECT_EQ(exact_read_capacity(make_rowa(4)), 4);
  EXPECT_EQ(exact_read_capacity(QuorumFamily::alpha(CircularStructure::build({2, 2}), 1, true)), 2);
  EXPECT_EQ(exact_read_capacity(beta_16x1()), 8);
  EXPECT_THROW(exact_read_capacity(make_rowa(17)), Error);
}

TEST(ExactReadCapacity, GroupingRecursionUndercountsBalancedArcs) {
  // Three arcs of three with reads over any two arcs: the pairs
  // {1,4} {2,7} {5,8} {3,6} are disjoint, one more than the grouping gives.
  auto f = QuorumFamily::beta(CircularStructure::build({3, 3, 3}), 2);
  EXPECT_EQ(read_capacity(f), 3);
  EXPECT_EQ(exact_read_capacity(f), 4);
}

TEST(Availability, TwoArcAlphaAgainstHandValues) {
  auto f = QuorumFamily::alpha(CircularStructure::build({2, 2}), 1, true);
  Probability p(0.9);
  EXPECT_NEAR(read_availability(f, p), 0.9963, 1e-12);
  EXPECT_NEAR(read_availability_subset_sum(f, p), 0.9963, 1e-12);
  EXPECT_NEAR(brute_force_availability([&](NodeSet s) { return testing::oracle_is_read(f, s); }, 4, p), 0.9963,
              1e-12);
  EXPECT_NEAR(structural_write_availability(f, p), 2 * 0.81 * 0.99 - 0.81 * 0.81, 1e-12);
}

TEST(Availability, Boundaries) {
  for (const auto& f : {alpha_8x2(), beta_16x1(), make_grid(2, 8), make_majority(16, 2, 15)}) {
    EXPECT_NEAR(read_availability(f, Probability(1.0)), 1.0, 1e-15);
    EXPECT_NEAR(read_availability(f, Probability(0.0)), 0.0, 1e-15);
    EXPECT_NEAR(structural_write_availability(f, Probability(1.0)), 1.0, 1e-15);
    EXPECT_NEAR(protocol_write_availability(f, Probability(0.0)), 0.0, 1e-15);
  }
}

TEST(Availability, RowaWriteNeedsEveryCopy) {
  EXPECT_NEAR(structural_write_availability(make_rowa(4), Probability(0.9)), 0.6561, 1e-12);
}

TEST(Availability, BetaSixteenClosedForms) {
  auto f = beta_16x1();
  for (double p : {0.1, 0.5, 0.9}) {
    const double q = 1 - p;
    EXPECT_NEAR(read_availability(f, Probability(p)), 1 - std::pow(q, 16) - 16 * p * std::pow(q, 15), 1e-12);
    EXPECT_NEAR(structural_write_availability(f, Probability(p)), std::pow(p, 16) + 16 * std::pow(p, 15) * q,
                1e-12);
    EXPECT_NEAR(read_availability(f, Probability(p)), read_availability(make_majority(16, 2, 15), Probability(p)),
                1e-12);
  }
}

TEST(Availability, ProtocolWriteEqualsRead) {
  for (double p : {0.2, 0.9}) {
    EXPECT_EQ(protocol_write_availability(alpha_8x2(), Probability(p)),
              read_availability(alpha_8x2(), Probability(p)));
  }
}

TEST(Availability, MonotoneInP) {
  for (const auto& f : {alpha_8x2(), beta_16x1(), make_grid(2, 8), make_diamond({2, 4, 6, 4}),
                        make_generalized_grid(4, 4, 3), make_majority(16, 2, 15)}) {
    double prev_r = -1, prev_w = -1;
    for (int i = 0; i <= 40; ++i) {
      Probability p(i / 40.0);
      double r = read_availability(f, p);
      double w = structural_write_availability(f, p);
      EXPECT_GE(r, prev_r - 1e-15) << f.name();
      EXPECT_GE(w, prev_w - 1e-15) << f.name();
      EXPECT_GE(r, w - 1e-15) << f.name();
      prev_r = r;
      prev_w = w;
    }
  }
}

TEST(Availability, ClosedFormsMatchOracleOnSmallFamilies) {
  for (int n = 1; n <= 7; ++n) {
    for (const auto& arcs : testing::compositions(n)) {
      for (const auto& f : testing::families_over(arcs)) {
        auto reads = accepted_by_size([&](NodeSet s) { return testing::oracle_is_read(f, s); }, n);
        auto writes = accepted_by_size([&](NodeSet s) { return testing::oracle_is_write(f, s); }, n);
        for (int i = 1; i <= 19; ++i) {
          Probability p(0.05 * i);
          const double r = availability_from_histogram(reads, p);
          const double w = availability_from_histogram(writes, p);
          ASSERT_NEAR(read_availability(f, p), r, 1e-9) << f.describe();
          ASSERT_NEAR(read_availability_subset_sum(f, p), r, 1e-9) << f.describe();
          ASSERT_NEAR(structural_write_availability(f, p), w, 1e-9) << f.describe();
          ASSERT_NEAR(structural_write_availability_subset_sum(f, p), w, 1e-9) << f.describe();
        }
      }
    }
  }
}

TEST(BruteForce, Examples) {
  EXPECT_NEAR(brute_force_availability([](NodeSet) { return true; }, 3, Probability(0.4)), 1.0, 1e-15);
  auto rowa2 = make_rowa(2);
  EXPECT_NEAR(brute_force_availability([&](NodeSet s) { return rowa2.is_write_quorum(s); }, 2, Probability(0.5)),
              0.25, 1e-15);
  EXPECT_THROW(brute_force_availability([](NodeSet) { return true; }, 21, Probability(0.5)), Error);
}

TEST(ProbabilityType, RejectsOutOfRange) {
  EXPECT_THROW(Probability(-0.1), Error);
  EXPECT_THROW(Probability(1.5), Error);
  EXPECT_THROW(Probability(std::nan("")), Error);
}

TEST(Report, SixteenSiteAlpha) {
  auto r = analyze(alpha_8x2(), Probability(0.9));
  EXPECT_EQ(r.fault_tolerance, 14);
  EXPECT_EQ(r.read_capacity, 8);
  EXPECT_EQ(r.min_write_quorum, 15);
  EXPECT_GT(r.protocol_write_availability, r.structural_write_availability);
}

}  // namespace
}  // namespace cqc
