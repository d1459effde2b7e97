#include "specmap/design_space.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace specmap;

namespace {

Platform make(std::vector<std::uint32_t> counts, std::uint32_t m) {
  std::vector<ProcessingUnit> units;
  for (std::size_t i = 0; i < counts.size(); ++i)
    units.push_back({"u" + std::to_string(i), UnitKind::other, counts[i]});
  return Platform{units, m};
}

Platform edge_soc() { return Platform{{{"cpu", UnitKind::cpu, 6}, {"gpu", UnitKind::gpu, 1}}, 2}; }

} // namespace

TEST(DesignSpace, Counts) {
  EXPECT_EQ(variant_count(edge_soc()), 6u);
  EXPECT_EQ(search_space_size(edge_soc()), 24u);
  EXPECT_EQ(variant_count(make({1}, 1)), 1u);
  EXPECT_EQ(search_space_size(make({1}, 1)), 1u);
  EXPECT_EQ(variant_count(make({4, 2, 2}, 3)), 16u);
  EXPECT_EQ(search_space_size(make({4, 2, 2}, 3)), 432u);
}

TEST(DesignSpace, OverflowIsReported) {
  const auto huge = make({0xFFFFFFFFu, 0xFFFFFFFFu, 0xFFFFFFFFu}, 1);
  EXPECT_THROW(variant_count(huge), InputError);
  const auto wide = make({2, 2}, 64);
  EXPECT_THROW(search_space_size(wide), InputError);
}

TEST(DesignSpace, EnumerationRefusesHugeSpaces) {
  EXPECT_THROW(enumerate_variants(make({1u << 13, 1u << 13}, 1)), InputError);
}

TEST(DesignSpace, VariantsLexicographic) {
  const auto two = enumerate_variants(make({2, 1}, 2));
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].allocation, (std::vector<std::uint32_t>{1, 1}));
  EXPECT_EQ(two[1].allocation, (std::vector<std::uint32_t>{2, 1}));

  const auto six = enumerate_variants(edge_soc());
  ASSERT_EQ(six.size(), 6u);
  for (std::uint32_t k = 0; k < 6; ++k)
    EXPECT_EQ(six[k].allocation, (std::vector<std::uint32_t>{k + 1, 1}));

  const auto one = enumerate_variants(make({1}, 1));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].allocation, (std::vector<std::uint32_t>{1}));
}

TEST(DesignSpace, MappingsLexicographic) {
  const auto m = enumerate_mappings(make({1, 1}, 2));
  ASSERT_EQ(m.size(), 4u);
  const std::vector<std::vector<std::size_t>> want{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_EQ(m[i].assignment, want[i]);
  EXPECT_EQ(enumerate_mappings(make({3}, 2)).size(), 1u);
  EXPECT_EQ(enumerate_mappings(make({1, 1, 1}, 1)).size(), 3u);
}

TEST(DesignSpace, EnumerationsAreSortedUniqueAndValid) {
  for (const auto &p : {edge_soc(), make({4, 2, 2}, 3), make({3, 1, 2}, 2)}) {
    const auto vs = enumerate_variants(p);
    EXPECT_EQ(vs.size(), variant_count(p));
    EXPECT_TRUE(std::is_sorted(vs.begin(), vs.end()));
    EXPECT_EQ(std::set<DesignVariant>(vs.begin(), vs.end()).size(), vs.size());
    for (const auto &v : vs)
      EXPECT_TRUE(is_valid(v, p));

    const auto ms = enumerate_mappings(p);
    EXPECT_EQ(ms.size() * vs.size(), search_space_size(p));
    EXPECT_TRUE(std::is_sorted(ms.begin(), ms.end()));
    EXPECT_EQ(std::set<Mapping>(ms.begin(), ms.end()).size(), ms.size());
    for (const auto &m : ms)
      EXPECT_TRUE(is_valid(m, p));
  }
}

TEST(DesignSpace, MappingRoles) {
  const Mapping hetero{{1, 0}};
  EXPECT_EQ(hetero.drafter_unit(), 1u);
  EXPECT_EQ(hetero.target_unit(), 0u);
  EXPECT_TRUE(hetero.heterogeneous());
  EXPECT_FALSE((Mapping{{0, 0}}).heterogeneous());
  EXPECT_FALSE((Mapping{{2}}).heterogeneous());
}

TEST(DesignSpace, Validity) {
  const auto p = edge_soc();
  EXPECT_FALSE(is_valid(DesignVariant{{7, 1}}, p));
  EXPECT_FALSE(is_valid(DesignVariant{{0, 1}}, p));
  EXPECT_FALSE(is_valid(DesignVariant{{1}}, p));
  EXPECT_FALSE(is_valid(Mapping{{0, 2}}, p));
  EXPECT_FALSE(is_valid(Mapping{{0}}, p));
}

TEST(DesignSpace, PlatformRejectsBadInput) {
  EXPECT_THROW(Platform({}, 2), InputError);
  EXPECT_THROW(make({1}, 0), InputError);
  EXPECT_THROW(make({0}, 1), InputError);
  EXPECT_THROW(Platform({{"a", UnitKind::cpu, 1}, {"a", UnitKind::gpu, 1}}, 1), InputError);
  EXPECT_THROW(Platform({{"", UnitKind::cpu, 1}}, 1), InputError);
}

TEST(DesignSpace, UnitLookupAndKinds) {
  const auto p = edge_soc();
  EXPECT_EQ(p.index_of("gpu"), 1u);
  EXPECT_THROW(p.index_of("npu"), InputError);
  EXPECT_EQ(parse_unit_kind("npu"), UnitKind::npu);
  EXPECT_EQ(to_string(UnitKind::gpu), "gpu");
  EXPECT_THROW(parse_unit_kind("tpu"), InputError);
}
