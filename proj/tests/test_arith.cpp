#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "freebeacon/arith.hpp"

using namespace freebeacon;

TEST(ModPos, Examples) {
  EXPECT_EQ(mod_pos(7, 5), 2);
  EXPECT_EQ(mod_pos(-1, 5), 4);
  EXPECT_EQ(mod_pos(-5, 5), 0);
  EXPECT_EQ(mod_pos(0, 1), 0);
  EXPECT_EQ(mod_pos(-51, 51), 0);
  EXPECT_EQ(mod_pos(-52, 51), 50);
}

TEST(ModPos, RangeAndDivisionIdentity) {
  for (std::int64_t m = 1; m <= 40; ++m)
    for (std::int64_t a = -200; a <= 200; ++a) {
      const auto r = mod_pos(a, m);
      ASSERT_GE(r, 0);
      ASSERT_LT(r, m);
      ASSERT_EQ((a - r) % m, 0) << a << " mod " << m;
    }
}

TEST(SmallestCoprime, Examples) {
  EXPECT_EQ(smallest_coprime_ge2(51), 2);
  EXPECT_EQ(smallest_coprime_ge2(30), 7);
  EXPECT_EQ(smallest_coprime_ge2(6), 5);
  EXPECT_EQ(smallest_coprime_ge2(2), 3);
  EXPECT_EQ(smallest_coprime_ge2(1), 2);
}

TEST(SmallestCoprime, IsSmallest) {
  for (std::int64_t t = 1; t <= 1000; ++t) {
    const auto c = smallest_coprime_ge2(t);
    ASSERT_EQ(std::gcd(c, t), 1);
    for (std::int64_t k = 2; k < c; ++k) ASSERT_NE(std::gcd(k, t), 1) << t;
  }
}

TEST(CycleConfig, Validation) {
  EXPECT_NO_THROW(CycleConfig::make(51, 2, 30));
  EXPECT_THROW(CycleConfig::make(30, 6, 2), ConfigError);
  EXPECT_THROW(CycleConfig::make(30, 1, 2), ConfigError);
  EXPECT_THROW(CycleConfig::make(5, 2, 6), ConfigError);
  EXPECT_THROW(CycleConfig::make(5, 2, 2, 0.0), ConfigError);
  const auto why = CycleConfig{30, 6, 2, 1.0}.violation();
  EXPECT_NE(why.find("gcd"), std::string::npos) << why;
}

TEST(WeylOrbit, SmallExample) {
  EXPECT_EQ(weyl_orbit(2, 5), (std::vector<Residue>{2, 4, 1, 3, 0}));
}

TEST(WeylOrbit, PermutationIffCoprime) {
  for (std::int64_t m = 1; m <= 64; ++m)
    for (std::int64_t k = 1; k <= 2 * m + 1; ++k) {
      if (std::gcd(k, m) != 1) {
        EXPECT_THROW(weyl_orbit(k, m), ConfigError);
        continue;
      }
      auto orbit = weyl_orbit(k, m);
      ASSERT_EQ(orbit.size(), static_cast<std::size_t>(m));
      std::sort(orbit.begin(), orbit.end());
      for (std::int64_t i = 0; i < m; ++i) ASSERT_EQ(orbit[static_cast<std::size_t>(i)], i) << k << "," << m;
    }
}

TEST(WeylOrbit, NonCoprimeCoversOnlyMultiplesOfGcd) {
  // Independent check of the failure mode the co-prime rule guards against.
  for (std::int64_t m = 2; m <= 40; ++m)
    for (std::int64_t k = 2; k <= m; ++k) {
      const auto g = std::gcd(k, m);
      if (g == 1) continue;
      std::set<std::int64_t> seen;
      for (std::int64_t n = 1; n <= m; ++n) seen.insert(n * k % m);
      EXPECT_EQ(static_cast<std::int64_t>(seen.size()), m / g);
    }
}
