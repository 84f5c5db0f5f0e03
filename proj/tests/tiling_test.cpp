#include <gtest/gtest.h>

#include <random>

#include "hycount/tiling.hpp"
#include "test_backends.hpp"

using hycount::BBox;
using hycount::Detection;
using namespace hycount::tiling;

namespace {

std::vector<double> origins_x(const TilePlan& p) {
  std::vector<double> xs;
  for (std::size_t c = 0; c < p.columns; ++c) xs.push_back(p.tiles[c].x_min);
  return xs;
}

bool covered(const TilePlan& p, const BBox& b) {
  for (const auto& t : p.tiles)
    if (t.contains(b)) return true;
  return false;
}

}  // namespace

TEST(PlanTiles, Examples) {
  const auto one = plan_tiles(256, 256, 256, 0.2);
  ASSERT_EQ(one.tiles.size(), 1u);
  EXPECT_EQ(one.tiles[0], (BBox{0, 0, 256, 256}));

  const auto p = plan_tiles(640, 640, 256, 0.2);
  EXPECT_EQ(p.stride, 205u);
  EXPECT_EQ(p.tiles.size(), 9u);
  EXPECT_EQ(origins_x(p), (std::vector<double>{0, 205, 384}));
  EXPECT_EQ(p.tiles[3], (BBox{0, 205, 256, 461}));  // row-major

  const auto small = plan_tiles(100, 300, 256, 0.2);
  ASSERT_EQ(small.columns, 1u);
  EXPECT_EQ(small.tiles[0], (BBox{0, 0, 100, 256}));
  EXPECT_EQ(small.tiles.back(), (BBox{0, 44, 100, 300}));

  EXPECT_EQ(stride_for(10, 0.95), 1u);
  EXPECT_EQ(stride_for(32, 0.2), 26u);
}

TEST(PlanTiles, RejectsBadArguments) {
  EXPECT_THROW(plan_tiles(640, 640, 0, 0.2), hycount::Error);
  EXPECT_THROW(plan_tiles(640, 640, 256, 1.0), hycount::Error);
  EXPECT_THROW(plan_tiles(640, 640, 256, -0.1), hycount::Error);
}

TEST(PlanTiles, TilesInsideImageAndCoverIt) {
  for (std::size_t w : {1u, 50u, 255u, 256u, 257u, 640u, 1000u})
    for (std::size_t win : {1u, 32u, 256u})
      for (double r : {0.0, 0.2, 0.5}) {
        const auto p = plan_tiles(w, 300, win, r);
        const BBox img{0, 0, double(w), 300};
        for (const auto& t : p.tiles) ASSERT_TRUE(img.contains(t));
        EXPECT_EQ(p.tiles.back().x_max, double(w));
        EXPECT_EQ(p.tiles.back().y_max, 300.0);
      }
}

TEST(PlanTiles, SmallSquaresAreSeenWhole) {
  // Squares with side <= window * overlap on the integer grid fit in some tile.
  for (auto [w, win, r] : {std::tuple{200u, 64u, 0.25}, std::tuple{150u, 40u, 0.5}, std::tuple{97u, 32u, 0.2}}) {
    const auto p = plan_tiles(w, w, win, r);
    const auto side = static_cast<std::size_t>(std::floor(win * r + 0.5));
    for (std::size_t y = 0; y + side <= w; ++y)
      for (std::size_t x = 0; x + side <= w; ++x)
        ASSERT_TRUE(covered(p, {double(x), double(y), double(x + side), double(y + side)})) << x << "," << y;
  }
}

TEST(Remap, Examples) {
  const auto g = remap_to_global({{{0, 0, 2, 2}, 0.7}}, {205, 0, 461, 256});
  EXPECT_EQ(g[0].box, (BBox{205, 0, 207, 2}));
  EXPECT_EQ(g[0].score, 0.7);
  const std::vector<Detection> in{{{1, 2, 3, 4}, 0.5}};
  EXPECT_EQ(remap_to_global(in, {0, 0, 10, 10})[0].box, in[0].box);
  const auto back = hycount::translate(remap_to_global(in, {17, 33, 50, 60})[0].box, -17, -33);
  EXPECT_EQ(back, in[0].box);
}

TEST(ClipGroundTruth, Examples) {
  const BBox tile{0, 0, 256, 256};
  auto in = clip_ground_truth({{10, 10, 20, 20}}, tile);
  ASSERT_EQ(in.size(), 1u);
  EXPECT_DOUBLE_EQ(in[0].visibility, 1.0);
  EXPECT_TRUE(clip_ground_truth({{300, 300, 310, 310}}, tile).empty());
  auto part = clip_ground_truth({{250, 250, 262, 262}}, tile);
  ASSERT_EQ(part.size(), 1u);
  EXPECT_EQ(part[0].box, (BBox{250, 250, 256, 256}));
  EXPECT_DOUBLE_EQ(part[0].visibility, 0.25);
  // Tile-local coordinates.
  auto local = clip_ground_truth({{210, 10, 220, 20}}, {205, 0, 461, 256});
  EXPECT_EQ(local[0].box, (BBox{5, 10, 15, 20}));
  EXPECT_TRUE(clip_ground_truth({{256, 0, 260, 10}}, tile).empty());
}

TEST(SplitMerge, SingleTilePassesThrough) {
  const std::vector<Detection> dets{{{10, 10, 20, 20}, 0.9}, {{100, 100, 110, 110}, 0.8}};
  fakes::FixedDetector det({{"a", dets}});
  const auto out = split_merge_detect({"a", 256, 256, {}}, det, plan_tiles(256, 256, 256, 0.2), {0.3, 0.001});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].box, dets[0].box);
  EXPECT_EQ(out[1].box, dets[1].box);
}

namespace {

// Reports the same object from every tile that sees it, with a per-tile score.
class EchoDetector : public hycount::DetectorBackend {
 public:
  hycount::Capabilities capabilities() const override { return {}; }
  std::vector<Detection> detect(const hycount::ImageRef&, const std::optional<BBox>& crop) const override {
    const BBox obj{220, 10, 230, 20};
    if (!crop || !crop->contains(obj)) return {};
    return {{hycount::translate(obj, -crop->x_min, -crop->y_min), crop->x_min == 0 ? 0.9 : 0.85}};
  }
};

class FailingDetector : public hycount::DetectorBackend {
 public:
  hycount::Capabilities capabilities() const override { return {}; }
  std::vector<Detection> detect(const hycount::ImageRef&, const std::optional<BBox>& crop) const override {
    if (crop && crop->x_min > 0) hycount::fail(hycount::ErrorKind::backend, "model crashed");
    return {};
  }
};

}  // namespace

TEST(SplitMerge, DuplicateAcrossTilesCollapses) {
  EchoDetector det;
  const auto plan = plan_tiles(461, 256, 256, 0.2);
  ASSERT_EQ(plan.tiles.size(), 2u);
  const auto out = split_merge_detect({"a", 461, 256, {}}, det, plan, {0.3, 0.001});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[0].box, (BBox{220, 10, 230, 20}));

  const auto both = split_merge_detect({"a", 461, 256, {}}, det, plan, {0.3, 0.001}, {MergeMode::concatenate, 1});
  EXPECT_EQ(both.size(), 2u);
}

TEST(SplitMerge, TileFailureNamesTile) {
  FailingDetector det;
  try {
    split_merge_detect({"img_7", 640, 640, {}}, det, plan_tiles(640, 640, 256, 0.2), {});
    FAIL() << "expected an error";
  } catch (const hycount::Error& e) {
    EXPECT_EQ(e.kind(), hycount::ErrorKind::backend);
    EXPECT_NE(std::string(e.what()).find("img_7"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("tile 1"), std::string::npos);
  }
}

TEST(SplitMerge, JobsDoNotChangeOutput) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0, 600), sc(0.05, 1.0);
  std::vector<Detection> dets;
  for (int i = 0; i < 150; ++i) {
    const double x = pos(rng), y = pos(rng);
    dets.push_back({{x, y, x + 12, y + 12}, sc(rng)});
  }
  fakes::FixedDetector det({{"a", dets}});
  const auto plan = plan_tiles(640, 640, 128, 0.3);
  const auto one = split_merge_detect({"a", 640, 640, {}}, det, plan, {}, {MergeMode::global_nms, 1});
  const auto many = split_merge_detect({"a", 640, 640, {}}, det, plan, {}, {MergeMode::global_nms, 6});
  ASSERT_EQ(one.size(), many.size());
  const BBox img{0, 0, 640, 640};
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].box, many[i].box);
    EXPECT_EQ(one[i].score, many[i].score);
    EXPECT_TRUE(img.contains(one[i].box));
  }
}

TEST(SplitMerge, WholeImageBackendCalledOnce) {
  fakes::FixedDetector det({{"a", {{{1, 1, 5, 5}, 0.5}}}}, false);
  const auto out = split_merge_detect({"a", 640, 640, {}}, det, plan_tiles(640, 640, 256, 0.2), {});
  EXPECT_EQ(det.calls.load(), 1);
  EXPECT_EQ(out.size(), 1u);
}
