#include "cystseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "cystseg/error.hpp"
#include "cystseg/keyvalue.hpp"

namespace cystseg {

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw Error(ErrorCode::DimensionMismatch, "dice of differently sized masks");
  }
  std::size_t inter = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i];
    const bool g = gt[i];
    a += p;
    b += g;
    inter += p && g;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

std::optional<Stats> volume_stats(const std::vector<double>& dices, bool exclude_zero) {
  if (dices.empty()) throw Error(ErrorCode::InvalidArgument, "no Dice values");
  std::vector<double> kept;
  kept.reserve(dices.size());
  for (double d : dices) {
    if (!exclude_zero || d != 0.0) kept.push_back(d);
  }
  if (kept.empty()) return std::nullopt;
  Stats s;
  s.count = kept.size();
  double sum = 0.0;
  s.max = kept.front();
  for (double d : kept) {
    sum += d;
    s.max = std::max(s.max, d);
  }
  s.mean = sum / static_cast<double>(kept.size());
  double sq = 0.0;
  for (double d : kept) sq += (d - s.mean) * (d - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(kept.size()));
  return s;
}

SizeClass size_class(int area) noexcept {
  if (area < kSmallBelow) return SizeClass::Small;
  if (area <= kLargeAbove) return SizeClass::Medium;
  return SizeClass::Large;
}

std::string_view to_string(SizeClass c) noexcept {
  switch (c) {
    case SizeClass::Small: return "small";
    case SizeClass::Medium: return "medium";
    case SizeClass::Large: return "large";
  }
  return "small";
}

std::string_view to_string(Stage s) noexcept { return s == Stage::PostMser ? "post_mser" : "post_forest"; }

std::vector<std::vector<int>> connected_regions(const BinaryMask& m) {
  const int w = m.width();
  const int h = m.height();
  std::vector<std::uint8_t> seen(m.size(), 0);
  std::vector<std::vector<int>> regions;
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(m.size()); ++start) {
    if (!m[static_cast<std::size_t>(start)] || seen[static_cast<std::size_t>(start)]) continue;
    std::vector<int> region;
    stack.push_back(start);
    seen[static_cast<std::size_t>(start)] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      region.push_back(p);
      const int x = p % w;
      const int y = p / w;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const auto qi = static_cast<std::size_t>(q[1]) * w + q[0];
        if (m[qi] && !seen[qi]) {
          seen[qi] = 1;
          stack.push_back(static_cast<int>(qi));
        }
      }
    }
    std::sort(region.begin(), region.end());
    regions.push_back(std::move(region));
  }
  return regions;
}

DetectionTable size_stratified_detection(const std::vector<std::vector<CandidateRegion>>& candidates_per_slice,
                                         const std::vector<BinaryMask>& gt_per_slice, Stage stage,
                                         double threshold) {
  if (candidates_per_slice.size() != gt_per_slice.size()) {
    throw Error(ErrorCode::DimensionMismatch, "candidate and ground-truth slice counts differ");
  }
  DetectionTable table{};
  for (std::size_t s = 0; s < gt_per_slice.size(); ++s) {
    const auto& gt = gt_per_slice[s];
    const auto regions = connected_regions(gt);
    if (regions.empty()) continue;
    std::vector<int> label(gt.size(), -1);
    for (std::size_t r = 0; r < regions.size(); ++r) {
      for (int p : regions[r]) label[static_cast<std::size_t>(p)] = static_cast<int>(r);
    }
    std::vector<std::uint8_t> detected(regions.size(), 0);
    std::unordered_map<int, int> hits;
    for (const auto& cand : candidates_per_slice[s]) {
      if (stage == Stage::PostForest && !(cand.cyst_prob && *cand.cyst_prob >= threshold)) continue;
      hits.clear();
      for (int p : cand.pixels) {
        const int l = label[static_cast<std::size_t>(p)];
        if (l >= 0) ++hits[l];
      }
      for (const auto& [r, count] : hits) {
        if (count >= kDetectionOverlap * static_cast<double>(regions[static_cast<std::size_t>(r)].size())) {
          detected[static_cast<std::size_t>(r)] = 1;
        }
      }
    }
    for (std::size_t r = 0; r < regions.size(); ++r) {
      auto& row = table[static_cast<std::size_t>(size_class(static_cast<int>(regions[r].size())))];
      ++row.n_present;
      row.n_detected += detected[r];
    }
  }
  return table;
}

void accumulate(DetectionTable& into, const DetectionTable& add) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    into[i].n_present += add[i].n_present;
    into[i].n_detected += add[i].n_detected;
  }
}

VolumeReport evaluate_volume(const VolumeAnalysis& v, const std::vector<BinaryMask>& predicted, double threshold) {
  if (!v.ground_truth) throw Error(ErrorCode::MissingGroundTruth, v.volume_id + ": ground truth required");
  const auto& gt = *v.ground_truth;
  if (predicted.size() != gt.size()) throw Error(ErrorCode::DimensionMismatch, "prediction count differs");
  VolumeReport r;
  r.volume_id = v.volume_id;
  r.scanner = v.scanner;
  for (std::size_t s = 0; s < gt.size(); ++s) {
    const double d = dice(predicted[s], gt[s]);
    r.slice_dice.push_back(d);
    if (gt[s].count() == 0 && predicted[s].count() == 0) ++r.true_negative_slices;
    if (d == 0.0) ++r.zero_dice_slices;
  }
  r.all = *volume_stats(r.slice_dice, false);
  r.nonzero = volume_stats(r.slice_dice, true);
  std::vector<std::vector<CandidateRegion>> cands;
  cands.reserve(v.slices.size());
  for (const auto& a : v.slices) cands.push_back(a.candidates);
  r.post_mser = size_stratified_detection(cands, gt, Stage::PostMser, threshold);
  r.post_forest = size_stratified_detection(cands, gt, Stage::PostForest, threshold);
  return r;
}

void finalize_report(EvalReport& report) {
  std::sort(report.volumes.begin(), report.volumes.end(),
            [](const VolumeReport& a, const VolumeReport& b) { return a.volume_id < b.volume_id; });
  report.scanners.clear();
  report.post_mser = {};
  report.post_forest = {};

  struct Acc {
    double mean = 0, max = 0, std = 0, nz_mean = 0, nz_max = 0, nz_std = 0;
    int n = 0, nz = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& v : report.volumes) {
    auto& a = acc[std::string(to_string(v.scanner))];
    a.mean += v.all.mean;
    a.max += v.all.max;
    a.std += v.all.std;
    ++a.n;
    if (v.nonzero) {
      a.nz_mean += v.nonzero->mean;
      a.nz_max += v.nonzero->max;
      a.nz_std += v.nonzero->std;
      ++a.nz;
    }
    accumulate(report.post_mser, v.post_mser);
    accumulate(report.post_forest, v.post_forest);
  }
  for (const auto& [name, a] : acc) {
    ScannerRollup r;
    r.volumes = a.n;
    r.mean = a.mean / a.n;
    r.max = a.max / a.n;
    r.std = a.std / a.n;
    if (a.nz > 0) {
      r.nonzero_mean = a.nz_mean / a.nz;
      r.nonzero_max = a.nz_max / a.nz;
      r.nonzero_std = a.nz_std / a.nz;
    }
    report.scanners[name] = r;
  }
}

namespace {

std::string stat_or_absent(const std::optional<double>& v) { return v ? format_fixed(*v, 6) : "absent"; }

void require_truth(const std::vector<VolumeAnalysis>& volumes) {
  for (const auto& v : volumes) {
    if (!v.ground_truth) throw Error(ErrorCode::MissingGroundTruth, v.volume_id + ": ground truth required");
  }
}

}  // namespace

std::string EvalReport::to_key_values() const {
  KeyValueFile kv;
  kv.set("mode", mode);
  kv.set("exclude_zero", exclude_zero ? "1" : "0");
  kv.set("size_classes", "small<200 medium=200..2000 large>2000 (per-slice 4-connected components)");
  kv.set("detection_overlap", format_double(kDetectionOverlap));
  kv.set("overall.cyst_slices", std::to_string(cyst_slices));
  kv.set("overall.mean_dice_cyst_slices", format_fixed(mean_dice_cyst_slices, 6));
  for (const auto& v : volumes) {
    const std::string p = "volume." + v.volume_id + ".";
    kv.set(p + "scanner", std::string(to_string(v.scanner)));
    kv.set(p + "slices", std::to_string(v.slice_dice.size()));
    kv.set(p + "true_negative_slices", std::to_string(v.true_negative_slices));
    kv.set(p + "zero_dice_slices", std::to_string(v.zero_dice_slices));
    kv.set(p + "all.mean", format_fixed(v.all.mean, 6));
    kv.set(p + "all.max", format_fixed(v.all.max, 6));
    kv.set(p + "all.std", format_fixed(v.all.std, 6));
    if (exclude_zero) {
      kv.set(p + "nonzero.mean", stat_or_absent(v.nonzero ? std::optional(v.nonzero->mean) : std::nullopt));
      kv.set(p + "nonzero.max", stat_or_absent(v.nonzero ? std::optional(v.nonzero->max) : std::nullopt));
      kv.set(p + "nonzero.std", stat_or_absent(v.nonzero ? std::optional(v.nonzero->std) : std::nullopt));
    }
    std::string list;
    for (std::size_t i = 0; i < v.slice_dice.size(); ++i) list += (i ? "," : "") + format_fixed(v.slice_dice[i], 6);
    kv.set(p + "dice", list);
  }
  for (const auto& [name, r] : scanners) {
    const std::string p = "scanner." + name + ".";
    kv.set(p + "volumes", std::to_string(r.volumes));
    kv.set(p + "all.mean", format_fixed(r.mean, 6));
    kv.set(p + "all.max", format_fixed(r.max, 6));
    kv.set(p + "all.std", format_fixed(r.std, 6));
    if (exclude_zero) {
      kv.set(p + "nonzero.mean", stat_or_absent(r.nonzero_mean));
      kv.set(p + "nonzero.max", stat_or_absent(r.nonzero_max));
      kv.set(p + "nonzero.std", stat_or_absent(r.nonzero_std));
    }
  }
  for (Stage stage : {Stage::PostMser, Stage::PostForest}) {
    const auto& table = stage == Stage::PostMser ? post_mser : post_forest;
    for (int c = 0; c < kSizeClassCount; ++c) {
      const std::string p = "detection." + std::string(to_string(stage)) + "." +
                            std::string(to_string(static_cast<SizeClass>(c))) + ".";
      kv.set(p + "present", std::to_string(table[c].n_present));
      kv.set(p + "detected", std::to_string(table[c].n_detected));
      kv.set(p + "percent", format_fixed(table[c].percent(), 2));
    }
  }
  return kv.str();
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  auto pad = [](std::string s, std::size_t n) {
    if (s.size() < n) s.append(n - s.size(), ' ');
    return s;
  };
  out << "Evaluation (" << mode << ")\n";
  out << "Ground truth: union of graders. Cyst counts are per-slice 4-connected regions.\n\n";
  out << pad("volume", 20) << pad("scanner", 12) << pad("mean", 10) << pad("max", 10) << pad("std", 10);
  if (exclude_zero) out << pad("nz.mean", 10) << pad("nz.max", 10) << pad("nz.std", 10);
  out << "zero-DC\n";
  for (const auto& v : volumes) {
    out << pad(v.volume_id, 20) << pad(std::string(to_string(v.scanner)), 12) << pad(format_fixed(v.all.mean, 4), 10)
        << pad(format_fixed(v.all.max, 4), 10) << pad(format_fixed(v.all.std, 4), 10);
    if (exclude_zero) {
      out << pad(v.nonzero ? format_fixed(v.nonzero->mean, 4) : "-", 10)
          << pad(v.nonzero ? format_fixed(v.nonzero->max, 4) : "-", 10)
          << pad(v.nonzero ? format_fixed(v.nonzero->std, 4) : "-", 10);
    }
    out << v.zero_dice_slices << "/" << v.slice_dice.size() << "\n";
  }
  out << "\nPer scanner (unweighted mean of volume statistics)\n";
  for (const auto& [name, r] : scanners) {
    out << pad(name, 20) << "mean " << format_fixed(r.mean, 4) << "  max " << format_fixed(r.max, 4) << "  std "
        << format_fixed(r.std, 4);
    if (exclude_zero) {
      out << "  | excluding zero-DC: mean " << stat_or_absent(r.nonzero_mean) << "  max "
          << stat_or_absent(r.nonzero_max) << "  std " << stat_or_absent(r.nonzero_std);
    }
    out << "\n";
  }
  out << "\nMean Dice over " << cyst_slices << " slices containing cysts: " << format_fixed(mean_dice_cyst_slices, 4)
      << "\n\nDetection by size      present   post-MSER %   post-forest %\n";
  for (int c = 0; c < kSizeClassCount; ++c) {
    out << pad(std::string(to_string(static_cast<SizeClass>(c))), 23) << pad(std::to_string(post_mser[c].n_present), 10)
        << pad(format_fixed(post_mser[c].percent(), 2), 14) << format_fixed(post_forest[c].percent(), 2) << "\n";
  }
  return out.str();
}

namespace {

void add_cyst_slice_dice(EvalReport& report, const VolumeAnalysis& v, const VolumeReport& r, double& sum) {
  for (std::size_t s = 0; s < r.slice_dice.size(); ++s) {
    if ((*v.ground_truth)[s].count() == 0) continue;
    sum += r.slice_dice[s];
    ++report.cyst_slices;
  }
}

}  // namespace

EvalReport loocv(std::vector<VolumeAnalysis>& volumes, const PipelineConfig& config, bool exclude_zero) {
  if (volumes.size() < 2) {
    throw Error(ErrorCode::InsufficientVolumes, "leave-one-out needs at least two volumes with ground truth");
  }
  require_truth(volumes);
  std::vector<TrainingSet> per_volume;
  per_volume.reserve(volumes.size());
  for (const auto& v : volumes) per_volume.push_back(build_training_set(v));

  EvalReport report;
  report.mode = "loocv";
  report.exclude_zero = exclude_zero;
  double sum = 0.0;
  ForestParams fp = config.forest;
  fp.jobs = config.jobs;
  for (std::size_t held = 0; held < volumes.size(); ++held) {
    TrainingSet train;
    train.n_features = kFeatureCount;
    for (std::size_t i = 0; i < volumes.size(); ++i) {
      if (i != held) train.append(per_volume[i]);
    }
    const ForestModel model = train_forest(train, config.seed, fp);
    const auto masks = classify_and_segment(volumes[held], model, config.threshold, config.jobs);
    VolumeReport r = evaluate_volume(volumes[held], masks, config.threshold);
    add_cyst_slice_dice(report, volumes[held], r, sum);
    report.volumes.push_back(std::move(r));
  }
  report.mean_dice_cyst_slices = report.cyst_slices ? sum / report.cyst_slices : 0.0;
  finalize_report(report);
  return report;
}

EvalReport evaluate_with_model(std::vector<VolumeAnalysis>& volumes, const ForestModel& model,
                               const PipelineConfig& config, bool exclude_zero) {
  require_truth(volumes);
  EvalReport report;
  report.mode = "fixed-model";
  report.exclude_zero = exclude_zero;
  double sum = 0.0;
  for (auto& v : volumes) {
    const auto masks = classify_and_segment(v, model, config.threshold, config.jobs);
    VolumeReport r = evaluate_volume(v, masks, config.threshold);
    add_cyst_slice_dice(report, v, r, sum);
    report.volumes.push_back(std::move(r));
  }
  report.mean_dice_cyst_slices = report.cyst_slices ? sum / report.cyst_slices : 0.0;
  finalize_report(report);
  return report;
}

}  // namespace cystseg
