#include "cystseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cystseg/error.hpp"
#include "cystseg/random.hpp"

namespace cystseg {
namespace {

namespace lv = phantom_levels;

// Rows kept free between a cyst and the layer boundaries, and between cysts.
constexpr int kCystMargin = 4;
constexpr int kCystSpacing = 3;
constexpr int kMaxPlacementAttempts = 1000;
constexpr double kRpeAmplitudeRatio = 0.6;
constexpr double kRpePhaseShift = 0.7;

double volume_phase(std::uint64_t seed) {
  return 2.0 * std::numbers::pi * Rng::stream(seed, 0xFA5E).uniform();
}

LayerBoundaries slice_boundaries(const PhantomSpec& spec, int slice_index) {
  const auto& lp = spec.layers;
  const double phase = volume_phase(spec.seed) + 0.5 * std::numbers::pi * slice_index / std::max(spec.n_slices, 1);
  LayerBoundaries b;
  b.ilm_row.resize(static_cast<std::size_t>(spec.width));
  b.rpe_row.resize(static_cast<std::size_t>(spec.width));
  for (int x = 0; x < spec.width; ++x) {
    const double t = 2.0 * std::numbers::pi * x / lp.period + phase;
    b.ilm_row[x] = static_cast<int>(std::lround(lp.ilm_base + lp.amplitude * std::sin(t)));
    b.rpe_row[x] = static_cast<int>(
        std::lround(lp.rpe_base + kRpeAmplitudeRatio * lp.amplitude * std::sin(t + kRpePhaseShift)));
  }
  return b;
}

struct PlacedCyst {
  CystRecord record;
  std::vector<int> pixels;
};

// Rasterizes an ellipse; returns false if any pixel leaves the allowed band or
// comes within kCystSpacing of an occupied pixel.
bool rasterize(const PhantomSpec& spec, const LayerBoundaries& b, const Image8& blocked, double cx, double cy,
               double ax, double ay, std::vector<int>& pixels) {
  pixels.clear();
  const int x0 = static_cast<int>(std::floor(cx - ax));
  const int x1 = static_cast<int>(std::ceil(cx + ax));
  const int y0 = static_cast<int>(std::floor(cy - ay));
  const int y1 = static_cast<int>(std::ceil(cy + ay));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = (x - cx) / ax;
      const double dy = (y - cy) / ay;
      if (dx * dx + dy * dy > 1.0) continue;
      if (x < kCystMargin || x >= spec.width - kCystMargin) return false;
      if (y <= b.ilm_row[x] + kCystMargin - 1) return false;
      if (y > b.rpe_row[x] - lv::kPhotoreceptorRows - kCystMargin) return false;
      if (blocked(x, y)) return false;
      pixels.push_back(y * spec.width + x);
    }
  }
  return !pixels.empty();
}

void block_around(const PhantomSpec& spec, const std::vector<int>& pixels, Image8& blocked) {
  for (int p : pixels) {
    const int px = p % spec.width;
    const int py = p / spec.width;
    for (int y = py - kCystSpacing; y <= py + kCystSpacing; ++y) {
      for (int x = px - kCystSpacing; x <= px + kCystSpacing; ++x) {
        if (blocked.contains(x, y)) blocked(x, y) = 1;
      }
    }
  }
}

std::vector<PlacedCyst> place_cysts(const PhantomSpec& spec, int slice_index, const LayerBoundaries& b) {
  Rng rng = Rng::stream(spec.seed ^ 0xC1575EEDULL, static_cast<std::uint64_t>(slice_index));
  const int count = static_cast<int>(rng.between(spec.cysts_per_slice.min, spec.cysts_per_slice.max));
  const double log_min = std::log(static_cast<double>(spec.cyst_area.min));
  const double log_max = std::log(static_cast<double>(spec.cyst_area.max));

  const int top = *std::min_element(b.ilm_row.begin(), b.ilm_row.end()) + kCystMargin;
  const int bottom = *std::max_element(b.rpe_row.begin(), b.rpe_row.end()) - lv::kPhotoreceptorRows - kCystMargin;

  Image8 blocked(spec.width, spec.height, 0);
  std::vector<PlacedCyst> placed;
  std::vector<int> pixels;
  for (int c = 0; c < count; ++c) {
    const double area = std::exp(rng.uniform(log_min, log_max));
    const double aspect = rng.uniform(1.0, 2.0);
    const double ay = std::sqrt(area / (std::numbers::pi * aspect));
    const double ax = aspect * ay;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !ok; ++attempt) {
      const double cx = rng.uniform(kCystMargin + ax, spec.width - kCystMargin - 1 - ax);
      const double cy = rng.uniform(top + ay, std::max(top + ay, bottom - ay));
      ok = rasterize(spec, b, blocked, cx, cy, ax, ay, pixels);
      if (ok) {
        PlacedCyst pc;
        pc.record = {slice_index, cx, cy, ax, ay, static_cast<int>(pixels.size())};
        pc.pixels = pixels;
        block_around(spec, pixels, blocked);
        placed.push_back(std::move(pc));
      }
    }
    if (!ok) {
      throw Error(ErrorCode::InfeasibleSpec, "could not place cyst " + std::to_string(c) + " of area " +
                                                 std::to_string(static_cast<int>(area)) + " in slice " +
                                                 std::to_string(slice_index));
    }
  }
  return placed;
}

float layer_intensity(const LayerBoundaries& b, int x, int y) {
  const int ilm = b.ilm_row[x];
  const int rpe = b.rpe_row[x];
  if (y <= ilm) return lv::kVitreous;
  if (y <= rpe - lv::kPhotoreceptorRows) return lv::kRetina;
  if (y <= rpe) return lv::kPhotoreceptor;
  if (y <= rpe + lv::kRpeRows) return lv::kRpe;
  return lv::kChoroid;
}

}  // namespace

void PhantomSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "phantom spec: " + what); };
  if (n_slices < 1) fail("n_slices must be >= 1");
  if (width < 16 || height < 16) fail("grid too small");
  if (cysts_per_slice.min < 0 || cysts_per_slice.max < cysts_per_slice.min) fail("bad cysts_per_slice range");
  if (cyst_area.min < 10 || cyst_area.max > 20000 || cyst_area.max < cyst_area.min) {
    fail("cyst_area_range must lie within [10, 20000]");
  }
  if (!(speckle_sigma >= 0.0) || !std::isfinite(speckle_sigma)) fail("speckle_sigma must be >= 0");
  if (!(layers.period > 0.0) || layers.amplitude < 0.0) fail("bad layer profile");
  // Boundaries must be traceable with one-row steps per column.
  if (2.0 * std::numbers::pi * layers.amplitude / layers.period > 1.0) fail("layer slope exceeds one row per column");
  const double min_gap = (layers.rpe_base - layers.ilm_base) - (1.0 + kRpeAmplitudeRatio) * layers.amplitude;
  if (min_gap < 40.0 + 1.0) fail("ILM-RPE gap must stay >= 40 rows");
  if (layers.ilm_base - layers.amplitude < 1.0 ||
      layers.rpe_base + kRpeAmplitudeRatio * layers.amplitude + lv::kRpeRows + 2 > height) {
    fail("layers leave the grid");
  }
}

double rayleigh_sample(double sigma, double u) noexcept {
  return sigma * std::sqrt(-2.0 * std::log1p(-u));
}

Slice rayleigh_field(int width, int height, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  Slice out(width, height, 1.0f);
  if (sigma == 0.0) return out;
  Rng rng(seed);
  const double mean = sigma * std::sqrt(std::numbers::pi / 2.0);
  for (auto& px : out.pixels()) px = static_cast<float>(rayleigh_sample(sigma, rng.uniform()) / mean);
  return out;
}

Slice phantom_clean_slice(const PhantomSpec& spec, int slice_index, const PhantomTruth& truth) {
  const auto& b = truth.boundaries.at(static_cast<std::size_t>(slice_index));
  const auto& mask = truth.masks.at(static_cast<std::size_t>(slice_index));
  Slice clean(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      clean(x, y) = mask(x, y) ? lv::kCyst : layer_intensity(b, x, y);
    }
  }
  return clean;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  Phantom ph;
  ph.volume.volume_id = "phantom-" + std::to_string(spec.seed);
  ph.volume.scanner = Scanner::Synthetic;
  ph.volume.scale = IntensityScale::Unit;

  const double rayleigh_mean = spec.speckle_sigma * std::sqrt(std::numbers::pi / 2.0);
  for (int s = 0; s < spec.n_slices; ++s) {
    LayerBoundaries b = slice_boundaries(spec, s);
    BinaryMask mask(spec.width, spec.height, MaskSource::Union);
    for (auto& cyst : place_cysts(spec, s, b)) {
      for (int p : cyst.pixels) mask.set(static_cast<std::size_t>(p));
      ph.truth.cysts.push_back(cyst.record);
    }
    ph.truth.boundaries.push_back(std::move(b));
    ph.truth.masks.push_back(std::move(mask));

    Slice img = phantom_clean_slice(spec, s, ph.truth);
    // Unit-mean multiplicative speckle: a Rayleigh(sigma) draw re-centred on 1.
    Rng rng = Rng::stream(spec.seed ^ 0x5BEC1E00ULL, static_cast<std::uint64_t>(s));
    for (auto& px : img.pixels()) {
      double v = px;
      if (spec.speckle_sigma > 0.0) {
        const double m = std::max(0.0, 1.0 + rayleigh_sample(spec.speckle_sigma, rng.uniform()) - rayleigh_mean);
        v *= m;
      }
      v = std::clamp(v, 0.0, 1.0);
      px = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
    }
    ph.volume.slices.push_back(std::move(img));
  }
  return ph;
}

}  // namespace cystseg
