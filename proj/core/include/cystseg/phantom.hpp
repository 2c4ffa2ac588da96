#pragma once

#include <cstdint>
#include <vector>

#include "cystseg/image.hpp"
#include "cystseg/layers.hpp"
#include "cystseg/volume.hpp"

namespace cystseg {

/// Clean-image intensities of the synthetic scene, on the 0..1 scale.
namespace phantom_levels {
inline constexpr float kVitreous = 0.10f;
inline constexpr float kRetina = 0.70f;
inline constexpr float kCyst = 0.15f;
/// Hyporeflective photoreceptor band directly above the RPE.
inline constexpr float kPhotoreceptor = 0.30f;
inline constexpr float kRpe = 0.95f;
inline constexpr float kChoroid = 0.40f;
inline constexpr int kPhotoreceptorRows = 5;
inline constexpr int kRpeRows = 5;
}  // namespace phantom_levels

struct CountRange {
  int min = 1;
  int max = 3;
};

struct AreaRange {
  int min = 50;
  int max = 3000;
};

/// Sinusoidal ILM and RPE curves. RPE amplitude is 60% of the ILM's and
/// phase-shifted so the band thickness varies.
struct LayerProfile {
  double ilm_base = 70.0;
  double rpe_base = 190.0;
  double amplitude = 10.0;
  double period = 512.0;
};

struct PhantomSpec {
  int n_slices = 8;
  int width = kNormalizedWidth;
  int height = kNormalizedHeight;
  CountRange cysts_per_slice;
  /// Cyst areas are drawn log-uniformly from this range.
  AreaRange cyst_area;
  /// Rayleigh scale of the multiplicative speckle; 0 disables noise.
  double speckle_sigma = 0.2;
  LayerProfile layers;
  std::uint64_t seed = 1;

  /// Throws InvalidArgument when an invariant is violated.
  void validate() const;
};

struct CystRecord {
  int slice = 0;
  double center_x = 0.0;
  double center_y = 0.0;
  double semi_axis_x = 0.0;
  double semi_axis_y = 0.0;
  int area = 0;
};

struct PhantomTruth {
  std::vector<LayerBoundaries> boundaries;
  std::vector<BinaryMask> masks;
  std::vector<CystRecord> cysts;
};

struct Phantom {
  OctVolume volume;
  PhantomTruth truth;
};

/// Deterministic in spec.seed. Slices are 8-bit quantized Unit-scale values.
/// Throws InfeasibleSpec if cysts cannot be placed without touching.
Phantom generate_phantom(const PhantomSpec& spec);

/// The clean (noise-free, unquantized) scene for one slice of `spec`.
Slice phantom_clean_slice(const PhantomSpec& spec, int slice_index, const PhantomTruth& truth);

/// Rayleigh(sigma) draw via inverse CDF: sigma * sqrt(-2 ln(1 - u)).
double rayleigh_sample(double sigma, double u) noexcept;

/// I.i.d. Rayleigh(sigma) samples divided by their mean sigma*sqrt(pi/2), so
/// the field has unit mean. sigma = 0 gives the all-ones field.
Slice rayleigh_field(int width, int height, double sigma, std::uint64_t seed);

}  // namespace cystseg
