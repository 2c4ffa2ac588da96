#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "cystseg/denoise.hpp"
#include "cystseg/error.hpp"
#include "cystseg/eval.hpp"
#include "cystseg/layers.hpp"
#include "cystseg/mser.hpp"
#include "cystseg/phantom.hpp"
#include "mser_oracle.hpp"
#include "support.hpp"

using namespace cystseg;

namespace {

Image8 random_levels(int w, int h, Rng& rng, std::initializer_list<std::uint8_t> levels) {
  const std::vector<std::uint8_t> lv(levels);
  Image8 img(w, h);
  for (auto& v : img.pixels()) v = lv[rng.below(lv.size())];
  return img;
}

BinaryMask full_roi(int w, int h) {
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i);
  return m;
}

MserParams permissive() {
  MserParams p;
  p.delta = 1;
  p.min_area = 10;
  p.max_area = 20000;
  p.max_variation = 1e9;
  p.min_diversity = 0.0;
  return p;
}

}  // namespace

TEST_CASE("constant image is a single root") {
  const ComponentTree t = ComponentTree::build(Image8(9, 7, 120));
  REQUIRE(t.nodes().size() == 1);
  CHECK(t.node(t.root()).area == 63);
  CHECK(t.node(t.root()).level == 120);
  CHECK(detect_mser(Image8(9, 7, 120), full_roi(9, 7), MserParams{}).empty());
}

TEST_CASE("two dark pixels merge only at the background level") {
  Image8 img(8, 8, 200);
  img(1, 1) = 0;
  img(6, 5) = 0;
  const ComponentTree t = ComponentTree::build(img);
  REQUIRE(t.nodes().size() == 3);
  const int a = t.node_of_pixel(1 * 8 + 1);
  const int b = t.node_of_pixel(5 * 8 + 6);
  CHECK(a != b);
  CHECK(t.node(a).area == 1);
  CHECK(t.node(b).area == 1);
  CHECK(t.node(a).parent == t.root());
  CHECK(t.node(b).parent == t.root());
  CHECK(t.node(t.root()).level == 200);
  CHECK(t.pixels(a) == testing::flood_component(img, 9, 0));
}

TEST_CASE("nested squares form a chain") {
  Image8 img(11, 11, 200);
  for (int y = 2; y < 9; ++y)
    for (int x = 2; x < 9; ++x) img(x, y) = 100;
  for (int y = 4; y < 7; ++y)
    for (int x = 4; x < 7; ++x) img(x, y) = 0;
  const ComponentTree t = ComponentTree::build(img);
  const int inner = t.node_of_pixel(5 * 11 + 5);
  const int mid = t.node(inner).parent;
  REQUIRE(mid >= 0);
  CHECK(t.node(inner).area == 9);
  CHECK(t.node(mid).area == 49);
  CHECK(t.node(mid).parent == t.root());
  CHECK(t.node(t.root()).area == 121);

  const auto var = node_variations(t, 100);
  CHECK(var[static_cast<std::size_t>(inner)] == doctest::Approx((49.0 - 9.0) / 9.0));
  CHECK(var[static_cast<std::size_t>(mid)] == doctest::Approx((121.0 - 49.0) / 49.0));
}

TEST_CASE("every tree node is a flood-fill component and vice versa") {
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    const Image8 img = random_levels(8, 8, rng, {10, 60, 110, 160});
    const ComponentTree t = ComponentTree::build(img);
    std::set<std::vector<int>> nodes;
    for (std::size_t i = 0; i < t.nodes().size(); ++i) {
      const auto px = t.pixels(static_cast<int>(i));
      CHECK(testing::flood_component(img, px.front(), t.node(static_cast<int>(i)).level) == px);
      CHECK(static_cast<int>(px.size()) == t.node(static_cast<int>(i)).area);
      nodes.insert(px);
    }
    for (int level : {10, 60, 110, 160}) {
      for (int p = 0; p < 64; ++p) {
        const auto c = testing::flood_component(img, p, level);
        if (!c.empty()) CHECK(nodes.count(c) == 1);
      }
    }
  }
}

TEST_CASE("detected regions are level-set components, nested, within area bounds") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Image8 img = random_levels(8, 8, rng, {0, 80, 160, 240});
    MserParams p = permissive();
    p.delta = 80;
    p.max_area = 50;
    const auto regions = detect_mser(img, full_roi(8, 8), p);
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const auto& r = regions[i];
      CHECK(testing::is_level_set_component(img, r.pixels));
      CHECK(r.area == static_cast<int>(r.pixels.size()));
      CHECK(r.area >= p.min_area);
      CHECK(r.area <= p.max_area);
      for (std::size_t j = i + 1; j < regions.size(); ++j) CHECK(testing::disjoint_or_nested(r.pixels, regions[j].pixels));
    }
  }
}

TEST_CASE("bounding boxes are tight") {
  const auto r = make_region({3 * 10 + 2, 3 * 10 + 3, 4 * 10 + 3, 5 * 10 + 3}, 10);
  CHECK(r.bbox == BoundingBox{2, 3, 3, 5});
  CHECK(r.area == 4);
  CHECK(r.bbox.width() == 2);
  CHECK(r.bbox.height() == 3);
}

TEST_CASE("candidate set grows with max_variation") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const Image8 img = random_levels(16, 16, rng, {0, 40, 80, 120, 160, 200});
    const ComponentTree t = ComponentTree::build(img);
    MserParams p = permissive();
    p.delta = 40;
    std::vector<int> prev;
    for (double v : {0.1, 0.5, 1.0, 3.0, 1e9}) {
      p.max_variation = v;
      const auto cur = stable_extremal_nodes(t, p);
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;
    }
  }
}

TEST_CASE("roi containment rule") {
  Image8 img(20, 20, 220);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 15; ++x) img(x, y) = 20;
  MserParams p;
  p.min_area = 10;
  BinaryMask roi(20, 20);
  // 3 of 10 columns of the square inside
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 8; ++x) roi.set(x, y);
  CHECK(detect_mser(img, roi, p).empty());
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 11; ++x) roi.set(x, y);
  const auto kept = detect_mser(img, roi, p);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].area == 100);
  CHECK(kept[0].level == 20);
}

TEST_CASE("saliency score is the mean over pixels and orders the output") {
  Image8 img(30, 12, 220);
  for (int y = 2; y < 8; ++y)
    for (int x = 2; x < 8; ++x) img(x, y) = 10;
  for (int y = 2; y < 8; ++y)
    for (int x = 20; x < 26; ++x) img(x, y) = 10;
  Slice sal(30, 12, 0.0f);
  for (int y = 0; y < 12; ++y)
    for (int x = 15; x < 30; ++x) sal(x, y) = 0.5f;
  MserParams p;
  p.min_area = 10;
  const auto regions = detect_mser(img, full_roi(30, 12), p, &sal);
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].saliency_score == doctest::Approx(0.5));
  CHECK(regions[0].bbox.x_min == 20);
  CHECK(regions[1].saliency_score == 0.0);
}

TEST_CASE("parameter validation") {
  MserParams p;
  p.min_area = 5;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.max_area = 30000;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.delta = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.min_diversity = 1.0;
  CHECK_THROWS_AS(p.validate(), Error);
  CHECK_THROWS_AS(detect_mser(Image8(8, 8), full_roi(9, 8), MserParams{}), Error);
}

TEST_CASE("planted phantom cysts of three sizes are found") {
  int matched = 0;
  for (int area : {150, 800, 3000}) {
    PhantomSpec spec;
    spec.n_slices = 1;
    spec.speckle_sigma = 0.2;
    spec.cysts_per_slice = {1, 1};
    spec.cyst_area = {area, area};
    spec.seed = 1000 + static_cast<std::uint64_t>(area);
    const Phantom ph = generate_phantom(spec);
    const Slice den = tv_denoise(ph.volume.slices[0]);
    const BinaryMask roi = roi_mask(segment_layers(den), spec.width, spec.height);
    const auto cands = detect_mser(den, roi, MserParams{});
    const auto table = size_stratified_detection({cands}, {ph.truth.masks[0]}, Stage::PostMser);
    const auto cls = static_cast<std::size_t>(size_class(static_cast<int>(ph.truth.masks[0].count())));
    matched += table[cls].n_detected;
  }
  CHECK(matched >= 2);
}
