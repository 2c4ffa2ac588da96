#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cystseg/denoise.hpp"
#include "cystseg/features.hpp"
#include "cystseg/forest.hpp"
#include "cystseg/keyvalue.hpp"
#include "cystseg/layers.hpp"
#include "cystseg/mser.hpp"
#include "cystseg/saliency.hpp"
#include "cystseg/volume.hpp"

namespace cystseg {

/// Every tunable of the pipeline. Keys in config files and effective-config
/// dumps are the long CLI flag names without the leading dashes.
struct PipelineConfig {
  TvParams tv;
  SaliencyParams saliency;
  LayerParams layers;
  MserParams mser;
  ForestParams forest;
  double threshold = 0.5;
  std::uint64_t seed = 1;
  /// Slice-level parallelism. Results never depend on it, so it is left out
  /// of the effective-config dump.
  int jobs = 1;

  /// Throws InvalidArgument for an unknown key or a malformed value.
  void apply(std::string_view key, std::string_view value);
  void apply(const KeyValueFile& file);
  void validate() const;
  KeyValueFile to_key_values() const;
};

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};
const std::vector<ConfigKey>& config_keys();

std::string format_scales(const SaliencyParams& p);
SaliencyParams parse_scales(std::string_view text);

/// Everything computed for one normalized slice before classification.
struct SliceAnalysis {
  Slice denoised;
  Slice saliency;
  std::optional<LayerBoundaries> layers;
  BinaryMask roi;
  std::vector<CandidateRegion> candidates;
  std::vector<FeatureVector> features;
  std::vector<std::string> warnings;
};

/// Denoise, saliency, layers + ROI, MSER candidates, features. `unit_slice`
/// must already be 512x256 on the 0..1 scale.
SliceAnalysis analyze_slice(const Slice& unit_slice, const PipelineConfig& config);

struct VolumeAnalysis {
  std::string volume_id;
  Scanner scanner = Scanner::Synthetic;
  std::vector<SliceAnalysis> slices;
  /// Union ground truth resized to the normalized grid, when available.
  std::optional<std::vector<BinaryMask>> ground_truth;
};

/// Normalizes the volume and analyzes its slices in parallel (config.jobs).
VolumeAnalysis analyze_volume(const OctVolume& volume, const PipelineConfig& config,
                              std::optional<std::vector<BinaryMask>> ground_truth = std::nullopt);

/// Resizes native-resolution masks onto the normalized grid.
std::vector<BinaryMask> normalize_masks(const std::vector<BinaryMask>& masks);

enum class CandidateLabel { Cyst, NonCyst, Ambiguous };

/// Margin used for the non-cyst rule.
inline constexpr int kLabelDilation = 2;

/// Cyst when at least half the candidate lies on ground truth; non-cyst when
/// it does not touch the ground truth dilated by two pixels.
CandidateLabel label_candidate(const CandidateRegion& r, const BinaryMask& gt, const BinaryMask& gt_dilated);

/// Square (Chebyshev) dilation.
BinaryMask dilate(const BinaryMask& m, int radius);

/// Labelled feature rows from every slice of an analysed volume with truth.
TrainingSet build_training_set(const VolumeAnalysis& v);

/// Scores every candidate with the model and returns, per slice, the union
/// of candidates whose probability reaches `threshold`.
std::vector<BinaryMask> classify_and_segment(VolumeAnalysis& v, const ForestModel& model, double threshold,
                                             int jobs = 1);

}  // namespace cystseg
