#include <gtest/gtest.h>

#include <random>

#include "hycount/geometry.hpp"
#include "oracles.hpp"

using hycount::BBox;
using hycount::iou;

TEST(Iou, WorkedExamples) {
  EXPECT_NEAR(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {0, 0, 2, 2}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {2, 2, 3, 3}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {1, 0, 2, 1}), 0.0);  // shared edge
  EXPECT_NEAR(iou({0, 0, 4, 4}, {1, 1, 3, 3}), 0.25, 1e-12);
  EXPECT_DOUBLE_EQ(iou({1, 1, 1, 1}, {1, 1, 1, 1}), 0.0);  // degenerate union
}

TEST(Iou, MatchesRasterOracle) {
  std::mt19937_64 rng(7);
  // Coordinates snap to a 0.05 lattice so the 0.01 raster resolves edges exactly.
  std::uniform_int_distribution<int> coord(0, 80);
  std::uniform_int_distribution<int> side(10, 40);
  for (int n = 0; n < 1000; ++n) {
    auto box = [&] {
      const double x = coord(rng) * 0.05, y = coord(rng) * 0.05;
      return BBox{x, y, x + side(rng) * 0.05, y + side(rng) * 0.05};
    };
    const BBox a = box(), b = box();
    ASSERT_NEAR(iou(a, b), oracle::raster_iou(a, b, 0.01), 1e-3) << a << " " << b;
  }
}

TEST(Iou, Properties) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::uniform_real_distribution<double> s(0.1, 40.0);
  for (int n = 0; n < 2000; ++n) {
    const double ax = u(rng), ay = u(rng), bx = u(rng), by = u(rng);
    const BBox a{ax, ay, ax + s(rng), ay + s(rng)};
    const BBox b{bx, by, bx + s(rng), by + s(rng)};
    const double v = iou(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_DOUBLE_EQ(v, iou(b, a));
    EXPECT_NEAR(iou(a, a), 1.0, 1e-12);
    const double dx = u(rng) - 50.0, dy = u(rng) - 50.0;
    EXPECT_NEAR(v, iou(hycount::translate(a, dx, dy), hycount::translate(b, dx, dy)), 1e-9);
  }
}

TEST(Clip, ExamplesAndContainment) {
  const BBox win{0, 0, 10, 10};
  EXPECT_EQ(*hycount::clip({-5, -5, 5, 5}, win), (BBox{0, 0, 5, 5}));
  EXPECT_EQ(*hycount::clip({2, 3, 4, 5}, win), (BBox{2, 3, 4, 5}));
  EXPECT_FALSE(hycount::clip({11, 0, 12, 1}, win).has_value());
  const auto touch = hycount::clip({10, 0, 12, 1}, win);
  ASSERT_TRUE(touch.has_value());
  EXPECT_DOUBLE_EQ(touch->area(), 0.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20.0, 30.0);
  for (int n = 0; n < 1000; ++n) {
    const double x = u(rng), y = u(rng);
    const BBox b{x, y, x + 8.0, y + 6.0};
    if (auto c = hycount::clip(b, win)) {
      EXPECT_TRUE(win.contains(*c));
      EXPECT_TRUE(b.contains(*c));
    }
  }
}

TEST(Translate, ComposesAndInverts) {
  const BBox b{1.5, 2.5, 4, 8};
  EXPECT_EQ(hycount::translate(b, 3, -2), (BBox{4.5, 0.5, 7, 6}));
  EXPECT_EQ(hycount::translate(hycount::translate(b, 1.25, 7.5), -1.25, -7.5), b);
  EXPECT_EQ(hycount::translate(hycount::translate(b, 1, 2), 3, 4), hycount::translate(b, 4, 6));
}
