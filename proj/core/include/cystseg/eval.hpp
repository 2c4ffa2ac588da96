#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cystseg/image.hpp"
#include "cystseg/mser.hpp"
#include "cystseg/pipeline.hpp"
#include "cystseg/volume.hpp"

namespace cystseg {

/// 2|A and B| / (|A| + |B|). Two empty masks score 1, one empty mask 0.
double dice(const BinaryMask& pred, const BinaryMask& gt);

struct Stats {
  double mean = 0.0;
  double max = 0.0;
  /// Population standard deviation.
  double std = 0.0;
  std::size_t count = 0;
};

/// Mean, max and population std. With exclude_zero, exact zeros are dropped
/// first; nullopt means nothing was left. Throws InvalidArgument on an empty
/// input.
std::optional<Stats> volume_stats(const std::vector<double>& dices, bool exclude_zero);

enum class SizeClass { Small = 0, Medium = 1, Large = 2 };
inline constexpr int kSizeClassCount = 3;
inline constexpr int kSmallBelow = 200;
inline constexpr int kLargeAbove = 2000;

/// Small < 200 <= Medium <= 2000 < Large.
SizeClass size_class(int area) noexcept;
std::string_view to_string(SizeClass c) noexcept;

/// 4-connected components of a mask, each as sorted pixel indices.
std::vector<std::vector<int>> connected_regions(const BinaryMask& m);

enum class Stage { PostMser, PostForest };
std::string_view to_string(Stage s) noexcept;

/// A truth region counts as detected when some candidate covers at least
/// this fraction of it.
inline constexpr double kDetectionOverlap = 0.5;

struct DetectionRow {
  int n_present = 0;
  int n_detected = 0;
  double percent() const noexcept { return n_present > 0 ? 100.0 * n_detected / n_present : 0.0; }
};

using DetectionTable = std::array<DetectionRow, kSizeClassCount>;

/// Per size class detection counts. At PostForest only candidates with
/// cyst_prob >= threshold take part.
DetectionTable size_stratified_detection(const std::vector<std::vector<CandidateRegion>>& candidates_per_slice,
                                         const std::vector<BinaryMask>& gt_per_slice, Stage stage,
                                         double threshold = 0.5);
void accumulate(DetectionTable& into, const DetectionTable& add);

struct VolumeReport {
  std::string volume_id;
  Scanner scanner = Scanner::Synthetic;
  std::vector<double> slice_dice;
  /// Slices with empty truth and empty prediction (scored 1 by convention).
  int true_negative_slices = 0;
  int zero_dice_slices = 0;
  Stats all;
  std::optional<Stats> nonzero;
  DetectionTable post_mser{};
  DetectionTable post_forest{};
};

struct ScannerRollup {
  /// Unweighted means of per-volume statistics.
  double mean = 0.0;
  double max = 0.0;
  double std = 0.0;
  std::optional<double> nonzero_mean;
  std::optional<double> nonzero_max;
  std::optional<double> nonzero_std;
  int volumes = 0;
};

struct EvalReport {
  std::string mode;
  bool exclude_zero = false;
  std::vector<VolumeReport> volumes;
  std::map<std::string, ScannerRollup> scanners;
  DetectionTable post_mser{};
  DetectionTable post_forest{};
  /// Mean Dice over slices whose truth is non-empty.
  double mean_dice_cyst_slices = 0.0;
  int cyst_slices = 0;

  std::string to_key_values() const;
  std::string to_text() const;
};

/// Dice and detection statistics for one analysed volume whose candidates
/// already carry cyst_prob, given its predicted masks.
VolumeReport evaluate_volume(const VolumeAnalysis& v, const std::vector<BinaryMask>& predicted, double threshold);

/// Fills per-scanner rollups and pooled figures from report.volumes.
void finalize_report(EvalReport& report);

/// Leave-one-out: each volume is segmented by a forest trained on all others.
/// Volumes must carry ground truth. Deterministic in config.seed.
EvalReport loocv(std::vector<VolumeAnalysis>& volumes, const PipelineConfig& config, bool exclude_zero);

/// Evaluation of every volume with a fixed model.
EvalReport evaluate_with_model(std::vector<VolumeAnalysis>& volumes, const ForestModel& model,
                               const PipelineConfig& config, bool exclude_zero);

}  // namespace cystseg
