#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cystseg/error.hpp"
#include "cystseg/eval.hpp"
#include "cystseg/phantom.hpp"

using namespace cystseg;
namespace lv = cystseg::phantom_levels;

namespace {

double mean_of(const Slice& s) {
  double sum = 0.0;
  for (float v : s.pixels()) sum += v;
  return sum / static_cast<double>(s.size());
}

}  // namespace

TEST_CASE("noise-free single cyst has the requested area") {
  PhantomSpec spec;
  spec.n_slices = 6;
  spec.speckle_sigma = 0.0;
  spec.cysts_per_slice = {1, 1};
  spec.cyst_area = {500, 500};
  const Phantom ph = generate_phantom(spec);
  REQUIRE(ph.truth.masks.size() == 6);
  for (const auto& m : ph.truth.masks) {
    const auto n = static_cast<double>(m.count());
    CHECK(n >= 475.0);
    CHECK(n <= 525.0);
  }
}

TEST_CASE("noise-free slices are the quantized clean scene") {
  PhantomSpec spec;
  spec.n_slices = 3;
  spec.speckle_sigma = 0.0;
  const Phantom ph = generate_phantom(spec);
  for (int s = 0; s < 3; ++s) {
    const Slice clean = phantom_clean_slice(spec, s, ph.truth);
    for (std::size_t i = 0; i < clean.size(); ++i) {
      CHECK(ph.volume.slices[s][i] == static_cast<float>(std::lround(clean[i] * 255.0)) / 255.0f);
    }
  }
}

TEST_CASE("boundary rows follow the last-row-above-transition convention") {
  PhantomSpec spec;
  spec.n_slices = 2;
  spec.speckle_sigma = 0.0;
  spec.cysts_per_slice = {0, 0};
  const Phantom ph = generate_phantom(spec);
  const Slice clean = phantom_clean_slice(spec, 1, ph.truth);
  const auto& b = ph.truth.boundaries[1];
  for (int x = 0; x < spec.width; x += 17) {
    CHECK(clean(x, b.ilm_row[x]) == lv::kVitreous);
    CHECK(clean(x, b.ilm_row[x] + 1) == lv::kRetina);
    CHECK(clean(x, b.rpe_row[x]) == lv::kPhotoreceptor);
    CHECK(clean(x, b.rpe_row[x] + 1) == lv::kRpe);
    CHECK(b.rpe_row[x] - b.ilm_row[x] >= 40);
  }
  CHECK(b.valid(spec.width, spec.height, 1));
}

TEST_CASE("same seed gives identical phantoms, different seeds differ") {
  PhantomSpec spec;
  spec.n_slices = 3;
  spec.seed = 42;
  const Phantom a = generate_phantom(spec);
  const Phantom b = generate_phantom(spec);
  for (int s = 0; s < 3; ++s) {
    CHECK(a.volume.slices[s] == b.volume.slices[s]);
    CHECK(a.truth.masks[s].same_pixels(b.truth.masks[s]));
  }
  spec.seed = 43;
  const Phantom c = generate_phantom(spec);
  CHECK(!(a.volume.slices[0] == c.volume.slices[0]));
}

TEST_CASE("cysts lie inside the retina and never touch") {
  PhantomSpec spec;
  spec.n_slices = 10;
  spec.cysts_per_slice = {2, 4};
  spec.seed = 5;
  const Phantom ph = generate_phantom(spec);
  std::size_t recorded_area = 0;
  for (const auto& c : ph.truth.cysts) recorded_area += static_cast<std::size_t>(c.area);
  std::size_t mask_area = 0;
  for (int s = 0; s < spec.n_slices; ++s) {
    const auto& m = ph.truth.masks[s];
    const auto& b = ph.truth.boundaries[s];
    mask_area += m.count();
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (!m(x, y)) continue;
        CHECK(y > b.ilm_row[x]);
        CHECK(y <= b.rpe_row[x] - lv::kPhotoreceptorRows);
      }
    }
    int planted = 0;
    for (const auto& c : ph.truth.cysts) planted += c.slice == s;
    CHECK(connected_regions(m).size() == static_cast<std::size_t>(planted));
    CHECK(planted >= 2);
    CHECK(planted <= 4);
  }
  CHECK(mask_area == recorded_area);
}

TEST_CASE("small area range yields only small regions") {
  PhantomSpec spec;
  spec.n_slices = 5;
  spec.cyst_area = {50, 150};
  const Phantom ph = generate_phantom(spec);
  for (const auto& m : ph.truth.masks) {
    for (const auto& r : connected_regions(m)) CHECK(size_class(static_cast<int>(r.size())) == SizeClass::Small);
  }
}

TEST_CASE("speckle keeps slice means within 3 percent of the clean means") {
  PhantomSpec spec;
  spec.n_slices = 10;
  spec.speckle_sigma = 0.3;
  spec.seed = 11;
  const Phantom ph = generate_phantom(spec);
  for (int s = 0; s < spec.n_slices; ++s) {
    const double clean = mean_of(phantom_clean_slice(spec, s, ph.truth));
    const double noisy = mean_of(ph.volume.slices[s]);
    CHECK(std::abs(noisy - clean) <= 0.03 * clean);
  }
}

TEST_CASE("speckle strength grows with sigma") {
  PhantomSpec spec;
  spec.n_slices = 1;
  spec.cysts_per_slice = {0, 0};
  double prev = -1.0;
  for (double sigma : {0.0, 0.1, 0.2, 0.3}) {
    spec.speckle_sigma = sigma;
    const Phantom ph = generate_phantom(spec);
    const Slice clean = phantom_clean_slice(spec, 0, ph.truth);
    double sq = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const double d = ph.volume.slices[0][i] - clean[i];
      sq += d * d;
    }
    CHECK(sq > prev);
    prev = sq;
  }
}

TEST_CASE("rayleigh inverse CDF") {
  // F(r) = 1 - exp(-r^2 / (2 sigma^2)), so F(sigma) = 1 - exp(-1/2)
  CHECK(rayleigh_sample(0.7, 1.0 - std::exp(-0.5)) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(rayleigh_sample(2.0, 0.0) == 0.0);
}

TEST_CASE("normalized rayleigh field has unit mean and the scale-free variance") {
  const Slice f = rayleigh_field(256, 256, 0.3, 99);
  double mean = 0.0, sq = 0.0;
  for (float v : f.pixels()) mean += v;
  mean /= static_cast<double>(f.size());
  for (float v : f.pixels()) sq += (v - mean) * (v - mean);
  const double var = sq / static_cast<double>(f.size());
  CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
  CHECK(var == doctest::Approx((4.0 - std::numbers::pi) / std::numbers::pi).epsilon(0.03));
  const Slice ones = rayleigh_field(8, 8, 0.0, 1);
  for (float v : ones.pixels()) CHECK(v == 1.0f);
}

TEST_CASE("invalid and infeasible specs") {
  PhantomSpec bad_area;
  bad_area.cyst_area = {5, 100};
  CHECK_THROWS_AS(generate_phantom(bad_area), Error);

  PhantomSpec steep;
  steep.layers.amplitude = 100.0;
  CHECK_THROWS_AS(steep.validate(), Error);

  PhantomSpec narrow;
  narrow.layers.rpe_base = narrow.layers.ilm_base + 30.0;
  CHECK_THROWS_AS(narrow.validate(), Error);

  PhantomSpec crowded;
  crowded.n_slices = 1;
  crowded.cysts_per_slice = {3, 3};
  crowded.cyst_area = {20000, 20000};
  try {
    generate_phantom(crowded);
    FAIL("expected InfeasibleSpec");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InfeasibleSpec);
  }
}
