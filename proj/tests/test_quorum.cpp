#include <gtest/gtest.h>

#include "cqc/family.hpp"
#include "test_support.hpp"

namespace cqc {
namespace {

using testing::sorted;

TEST(Structure, EightArcsOfTwo) {
  auto s = CircularStructure::build({2, 2, 2, 2, 2, 2, 2, 2});
  EXPECT_EQ(s.n(), 16);
  EXPECT_EQ(s.k(), 8);
  EXPECT_EQ(s.arc(2), NodeSet::of({5, 6}));  // third arc
}

TEST(Structure, Singleton) {
  auto s = CircularStructure::build({1});
  EXPECT_EQ(s.n(), 1);
  EXPECT_EQ(s.k(), 1);
  EXPECT_EQ(s.arc(0), NodeSet::of({1}));
}

TEST(Structure, UnevenArcsAssignedInSequence) {
  auto s = CircularStructure::build({3, 1});
  EXPECT_EQ(s.arc(0), NodeSet::of({1, 2, 3}));
  EXPECT_EQ(s.arc(1), NodeSet::of({4}));
  // n - k + 1 = 4 here, so an arc of four alongside a singleton is admissible.
  EXPECT_NO_THROW(CircularStructure::build({4, 1}));
}

TEST(Structure, Rejections) {
  try {
    CircularStructure::build(std::vector<int>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyArcList);
  }
  try {
    CircularStructure::build({2, 0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ArcSizeOutOfRange);
  }
  try {
    CircularStructure::build({40, 30});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ArcSizeOutOfRange);
  }
}

TEST(Family, ParameterValidation) {
  auto s = CircularStructure::build({1, 1, 1, 1});
  EXPECT_THROW(QuorumFamily::alpha(s, 0), Error);
  EXPECT_THROW(QuorumFamily::alpha(s, 5), Error);
  EXPECT_THROW(QuorumFamily::beta(s, 2), Error);  // needs t >= ceil(5/2) = 3
  EXPECT_NO_THROW(QuorumFamily::beta(s, 3));
  EXPECT_THROW(QuorumFamily::majority(16, 1, 15), Error);  // 1 + 15 = n
  EXPECT_THROW(QuorumFamily::majority(16, 12, 8), Error);  // 2 * 8 = n
  EXPECT_NO_THROW(QuorumFamily::majority(16, 2, 15));
}

TEST(MinimalReads, AlphaTwoArcsKeepsCrossPairsAndArcs) {
  auto f = QuorumFamily::alpha(CircularStructure::build({2, 2}), 1, true);
  auto reads = minimal_read_quorums(f);
  std::vector<NodeSet> expected{NodeSet::of({1, 2}), NodeSet::of({1, 3}), NodeSet::of({1, 4}),
                                NodeSet::of({2, 3}), NodeSet::of({2, 4}), NodeSet::of({3, 4})};
  EXPECT_EQ(sorted(reads), sorted(expected));
  EXPECT_EQ(sorted(reads), testing::oracle_minimal(4, [&](NodeSet s) { return testing::oracle_is_read(f, s); }));
}

TEST(MinimalReads, AllWritingArcsGivesSingletons) {
  for (int k = 1; k <= 6; ++k) {
    auto f = QuorumFamily::alpha(CircularStructure::build(std::vector<int>(static_cast<std::size_t>(k), 1)), k);
    auto reads = minimal_read_quorums(f);
    ASSERT_EQ(static_cast<int>(reads.size()), k);
    for (int i = 0; i < k; ++i) EXPECT_EQ(reads[static_cast<std::size_t>(i)], NodeSet::of({i + 1}));
  }
}

TEST(MinimalReads, BetaSixteenSingletonArcs) {
  auto f = QuorumFamily::beta(CircularStructure::build(std::vector<int>(16, 1)), 15);
  auto reads = minimal_read_quorums(f);
  EXPECT_EQ(reads.size(), 120u);
  for (NodeSet r : reads) EXPECT_EQ(r.size(), 2);
}

TEST(MinimalReads, LexicographicOrder) {
  auto f = QuorumFamily::beta(CircularStructure::build({1, 1, 1}), 2);
  auto reads = minimal_read_quorums(f);
  ASSERT_EQ(reads.size(), 3u);
  EXPECT_EQ(reads[0].to_string(), "1 2");
  EXPECT_EQ(reads[1].to_string(), "1 3");
  EXPECT_EQ(reads[2].to_string(), "2 3");
}

TEST(MinimalWrites, AlphaTwoArcs) {
  auto f = QuorumFamily::alpha(CircularStructure::build({2, 2}), 1);
  auto writes = minimal_write_quorums(f);
  std::vector<NodeSet> expected{NodeSet::of({1, 2, 3}), NodeSet::of({1, 2, 4}), NodeSet::of({1, 3, 4}),
                                NodeSet::of({2, 3, 4})};
  EXPECT_EQ(sorted(writes), sorted(expected));
}

TEST(MinimalWrites, AllArcsWritingIsEverything) {
  auto s = CircularStructure::build({3, 1, 2});
  auto writes = minimal_write_quorums(QuorumFamily::alpha(s, 3));
  ASSERT_EQ(writes.size(), 1u);
  EXPECT_EQ(writes[0], s.all());
}

TEST(MinimalWrites, BetaSixteenSingletonArcs) {
  auto f = QuorumFamily::beta(CircularStructure::build(std::vector<int>(16, 1)), 15);
  auto writes = minimal_write_quorums(f);
  EXPECT_EQ(writes.size(), 16u);
  for (NodeSet w : writes) EXPECT_EQ(w.size(), 15);
}

TEST(MinimalWrites, DominatedWritesPruned) {
  // Writing arc {2,3} with {1} as representative contains writing arc {1}
  // with representative 2, so only the latter survives.
  auto f = QuorumFamily::alpha(CircularStructure::build({1, 2}), 1);
  EXPECT_EQ(sorted(minimal_write_quorums(f)), sorted({NodeSet::of({1, 2}), NodeSet::of({1, 3})}));
}

TEST(Predicates, Examples) {
  auto a8 = QuorumFamily::alpha(CircularStructure::build(std::vector<int>(8, 2)), 7);
  EXPECT_TRUE(a8.is_read_quorum(NodeSet::of({1, 3})));
  EXPECT_FALSE(a8.is_read_quorum(NodeSet::of({1})));
  auto b16 = QuorumFamily::beta(CircularStructure::build(std::vector<int>(16, 1)), 15);
  EXPECT_FALSE(b16.is_read_quorum(NodeSet::of({5})));
  auto a2 = QuorumFamily::alpha(CircularStructure::build({2, 2}), 1);
  EXPECT_TRUE(a2.is_write_quorum(NodeSet::of({1, 2, 3})));
  EXPECT_FALSE(a2.is_write_quorum(NodeSet::of({1, 2})));
}

TEST(Comparison, Constructors) {
  auto grid = make_grid(2, 8);
  ASSERT_NE(grid.as_alpha(), nullptr);
  EXPECT_EQ(grid.as_alpha()->structure.arc_sizes(), std::vector<int>(8, 2));
  EXPECT_EQ(grid.as_alpha()->t, 1);
  EXPECT_FALSE(grid.as_alpha()->full_arc_reads);

  auto gg = make_generalized_grid(4, 4, 3);
  EXPECT_EQ(gg.as_alpha()->structure.arc_sizes(), std::vector<int>(4, 4));
  EXPECT_EQ(gg.as_alpha()->t, 3);
  EXPECT_FALSE(gg.as_alpha()->full_arc_reads);

  auto rowa = make_rowa(5);
  EXPECT_EQ(rowa.as_alpha()->t, 5);
  auto writes = minimal_write_quorums(rowa);
  ASSERT_EQ(writes.size(), 1u);
  EXPECT_EQ(writes[0], NodeSet::range(1, 5));

  auto diamond = make_diamond({2, 4, 6, 4, 2});
  EXPECT_TRUE(diamond.as_alpha()->full_arc_reads);
  EXPECT_EQ(diamond.as_alpha()->t, 1);
  EXPECT_EQ(diamond.name(), "diamond(2,4,6,4,2)");

  EXPECT_THROW(make_majority(16, 1, 8), Error);
}

TEST(Enumeration, GuardAboveTwentyFourNodes) {
  auto f = make_rowa(25);
  try {
    minimal_read_quorums(f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooLargeToEnumerate);
  }
  EXPECT_THROW(minimal_write_quorums(f), Error);
}

// Properties over every structure with n <= 8 (the acceptance suite widens
// the intersection check to n <= 10).
class AllSmallFamilies : public ::testing::Test {
 protected:
  template <typename Fn>
  void for_each_family(int max_n, Fn&& fn) {
    for (int n = 1; n <= max_n; ++n) {
      for (const auto& arcs : testing::compositions(n)) {
        for (const auto& f : testing::families_over(arcs)) fn(f);
      }
    }
  }
};

TEST_F(AllSmallFamilies, EnumerationMatchesExhaustiveOracle) {
  for_each_family(7, [](const QuorumFamily& f) {
    const int n = f.n();
    EXPECT_EQ(sorted(minimal_read_quorums(f)),
              testing::oracle_minimal(n, [&](NodeSet s) { return testing::oracle_is_read(f, s); }))
        << f.describe();
    EXPECT_EQ(sorted(minimal_write_quorums(f)),
              testing::oracle_minimal(n, [&](NodeSet s) { return testing::oracle_is_write(f, s); }))
        << f.describe();
  });
}

TEST_F(AllSmallFamilies, PredicateAgreesWithEnumeration) {
  for_each_family(8, [](const QuorumFamily& f) {
    const auto reads = minimal_read_quorums(f);
    const auto writes = minimal_write_quorums(f);
    for (std::uint64_t b = 0; b < (std::uint64_t{1} << f.n()); ++b) {
      NodeSet s(b);
      bool has_read = std::any_of(reads.begin(), reads.end(), [&](NodeSet q) { return q.subset_of(s); });
      bool has_write = std::any_of(writes.begin(), writes.end(), [&](NodeSet q) { return q.subset_of(s); });
      ASSERT_EQ(f.is_read_quorum(s), has_read) << f.describe() << " " << s.to_string();
      ASSERT_EQ(f.is_write_quorum(s), has_write) << f.describe() << " " << s.to_string();
    }
  });
}

TEST_F(AllSmallFamilies, ReadsContainedInSomeConstructedWrite) {
  for_each_family(8, [](const QuorumFamily& f) {
    const auto writes = write_quorum_shapes(f);
    for (NodeSet r : minimal_read_quorums(f)) {
      bool contained = std::any_of(writes.begin(), writes.end(), [&](NodeSet w) { return r.subset_of(w); });
      EXPECT_TRUE(contained) << f.describe() << " read " << r.to_string();
    }
  });
}

TEST_F(AllSmallFamilies, PredicatesMonotone) {
  for_each_family(6, [](const QuorumFamily& f) {
    const int n = f.n();
    for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b) {
      NodeSet s(b);
      for (NodeId id = 1; id <= n; ++id) {
        NodeSet bigger = s;
        bigger.insert(id);
        if (f.is_read_quorum(s)) {
          ASSERT_TRUE(f.is_read_quorum(bigger));
        }
        if (f.is_write_quorum(s)) {
          ASSERT_TRUE(f.is_write_quorum(bigger));
        }
      }
    }
  });
}

TEST_F(AllSmallFamilies, IntersectionProperties) {
  for_each_family(8, [](const QuorumFamily& f) {
    const auto reads = minimal_read_quorums(f);
    const auto writes = minimal_write_quorums(f);
    for (NodeSet w : writes) {
      for (NodeSet r : reads) ASSERT_TRUE(r.intersects(w)) << f.describe();
      for (NodeSet w2 : writes) ASSERT_TRUE(w.intersects(w2)) << f.describe();
    }
  });
}

TEST(WriteShapes, MinimalWritesCanMissAReadQuorum) {
  // The whole arc {2,3} is a read quorum, but every write built on it also
  // holds node 1 and is dominated by a write built on arc {1}.
  auto f = QuorumFamily::alpha(CircularStructure::build({1, 2}), 1);
  const NodeSet arc = NodeSet::of({2, 3});
  auto minimal = minimal_write_quorums(f);
  EXPECT_TRUE(std::none_of(minimal.begin(), minimal.end(), [&](NodeSet w) { return arc.subset_of(w); }));
  auto shapes = write_quorum_shapes(f);
  EXPECT_TRUE(std::any_of(shapes.begin(), shapes.end(), [&](NodeSet w) { return arc.subset_of(w); }));
}

TEST(Majority, EnumeratesVoteSubsets) {
  auto f = make_majority(5, 2, 4);
  EXPECT_EQ(minimal_read_quorums(f).size(), 10u);
  EXPECT_EQ(minimal_write_quorums(f).size(), 5u);
}

}  // namespace
}  // namespace cqc
