#include "cystseg/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "cystseg/error.hpp"
#include "cystseg/parallel.hpp"

namespace cystseg {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"tv-lambda", "TV data-fidelity weight"},
      {"tv-tol", "TV relative dual-change stopping threshold"},
      {"tv-max-iter", "TV iteration cap"},
      {"tv-log", "denoise in the log domain (0/1, extension, off by default)"},
      {"saliency-scales", "centre levels and surround offsets, 'c1,c2:d1,d2'"},
      {"rpe-offset", "rows below the ILM where the RPE search starts"},
      {"max-jump", "largest accepted column-to-column boundary step"},
      {"mser-delta", "MSER intensity step (0-255 scale)"},
      {"mser-min-area", "smallest candidate area in pixels"},
      {"mser-max-area", "largest candidate area in pixels"},
      {"mser-max-variation", "largest accepted area variation"},
      {"mser-min-diversity", "duplicate suppression threshold in [0, 1)"},
      {"forest-max-depth", "maximum tree depth"},
      {"forest-min-samples", "nodes with fewer samples become leaves"},
      {"forest-features", "features drawn per split (0 = floor(sqrt(n)))"},
      {"threshold", "cyst probability needed to keep a candidate"},
      {"seed", "global seed for every stochastic component"},
      {"jobs", "worker threads for slice-level parallelism"},
  };
  return keys;
}

std::string format_scales(const SaliencyParams& p) {
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  return join(p.centers) + ":" + join(p.deltas);
}

SaliencyParams parse_scales(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) throw Error(ErrorCode::InvalidArgument, "saliency scales must look like 'c1,c2:d1,d2'");
  auto ints = [](const std::string& s) {
    std::vector<int> out;
    for (const auto& item : split(s, ',')) out.push_back(static_cast<int>(parse_int(item, "saliency scale")));
    return out;
  };
  SaliencyParams p;
  p.centers = ints(parts[0]);
  p.deltas = ints(parts[1]);
  return p;
}

void PipelineConfig::apply(std::string_view key, std::string_view value) {
  auto as_int = [&] { return static_cast<int>(parse_int(value, key)); };
  auto as_double = [&] { return parse_double(value, key); };
  if (key == "tv-lambda") tv.lambda = as_double();
  else if (key == "tv-tol") tv.tol = as_double();
  else if (key == "tv-max-iter") tv.max_iter = as_int();
  else if (key == "tv-log") tv.log_domain = as_int() != 0;
  else if (key == "saliency-scales") saliency = parse_scales(value);
  else if (key == "rpe-offset") layers.rpe_offset = as_int();
  else if (key == "max-jump") layers.max_jump = as_int();
  else if (key == "mser-delta") mser.delta = as_int();
  else if (key == "mser-min-area") mser.min_area = as_int();
  else if (key == "mser-max-area") mser.max_area = as_int();
  else if (key == "mser-max-variation") mser.max_variation = as_double();
  else if (key == "mser-min-diversity") mser.min_diversity = as_double();
  else if (key == "forest-max-depth") forest.max_depth = as_int();
  else if (key == "forest-min-samples") forest.min_samples_split = as_int();
  else if (key == "forest-features") forest.feature_subset_size = as_int();
  else if (key == "threshold") threshold = as_double();
  else if (key == "seed") {
    const long long s = parse_int(value, key);
    if (s < 0) throw Error(ErrorCode::InvalidArgument, "seed must be non-negative");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "jobs") jobs = as_int();
  else throw Error(ErrorCode::InvalidArgument, "unknown configuration key '" + std::string(key) + "'");
}

void PipelineConfig::apply(const KeyValueFile& file) {
  for (const auto& [k, v] : file.entries()) apply(k, v);
}

void PipelineConfig::validate() const {
  tv.validate();
  mser.validate();
  if (layers.rpe_offset < 1 || layers.max_jump < 1) {
    throw Error(ErrorCode::InvalidArgument, "rpe-offset and max-jump must be >= 1");
  }
  if (forest.max_depth < 1 || forest.min_samples_split < 2 || forest.feature_subset_size < 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid forest hyperparameters");
  }
  if (!std::isfinite(threshold)) throw Error(ErrorCode::InvalidArgument, "threshold must be finite");
  if (jobs < 1) throw Error(ErrorCode::InvalidArgument, "jobs must be >= 1");
  if (saliency.centers.empty() || saliency.deltas.empty()) {
    throw Error(ErrorCode::InvalidArgument, "saliency scales must not be empty");
  }
}

KeyValueFile PipelineConfig::to_key_values() const {
  KeyValueFile kv;
  kv.set("tv-lambda", format_double(tv.lambda));
  kv.set("tv-tol", format_double(tv.tol));
  kv.set("tv-max-iter", std::to_string(tv.max_iter));
  kv.set("tv-log", tv.log_domain ? "1" : "0");
  kv.set("saliency-scales", format_scales(saliency));
  kv.set("rpe-offset", std::to_string(layers.rpe_offset));
  kv.set("max-jump", std::to_string(layers.max_jump));
  kv.set("mser-delta", std::to_string(mser.delta));
  kv.set("mser-min-area", std::to_string(mser.min_area));
  kv.set("mser-max-area", std::to_string(mser.max_area));
  kv.set("mser-max-variation", format_double(mser.max_variation));
  kv.set("mser-min-diversity", format_double(mser.min_diversity));
  kv.set("forest-max-depth", std::to_string(forest.max_depth));
  kv.set("forest-min-samples", std::to_string(forest.min_samples_split));
  kv.set("forest-features", std::to_string(forest.feature_subset_size));
  kv.set("threshold", format_double(threshold));
  kv.set("seed", std::to_string(seed));
  return kv;
}

SliceAnalysis analyze_slice(const Slice& unit_slice, const PipelineConfig& config) {
  SliceAnalysis a;
  a.denoised = tv_denoise(unit_slice, config.tv);
  a.saliency = center_surround_dark(a.denoised, config.saliency);
  const int w = a.denoised.width();
  const int h = a.denoised.height();
  try {
    a.layers = segment_layers(a.denoised, config.layers);
    a.roi = roi_mask(*a.layers, w, h);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LayersCrossed) throw;
    a.warnings.push_back(std::string(e.what()) + "; using the full slice as ROI");
    a.layers.reset();
    a.roi = BinaryMask(Image8(w, h, 1), MaskSource::Prediction);
  }
  a.candidates = detect_mser(a.denoised, a.roi, config.mser, &a.saliency);
  a.features.reserve(a.candidates.size());
  for (const auto& r : a.candidates) {
    a.features.push_back(extract_features(a.denoised, a.saliency, r, a.layers ? &*a.layers : nullptr));
  }
  return a;
}

std::vector<BinaryMask> normalize_masks(const std::vector<BinaryMask>& masks) {
  std::vector<BinaryMask> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(resize_mask(m, kNormalizedWidth, kNormalizedHeight));
  return out;
}

VolumeAnalysis analyze_volume(const OctVolume& volume, const PipelineConfig& config,
                              std::optional<std::vector<BinaryMask>> ground_truth) {
  if (volume.slices.empty()) throw Error(ErrorCode::InvalidArgument, "volume has no slices");
  const OctVolume unit = to_unit_scale(normalize_size(volume));
  VolumeAnalysis v;
  v.volume_id = volume.volume_id;
  v.scanner = volume.scanner;
  v.slices.resize(unit.slices.size());
  parallel_for(unit.slices.size(), config.jobs,
               [&](std::size_t i) { v.slices[i] = analyze_slice(unit.slices[i], config); });
  if (ground_truth) {
    if (ground_truth->size() != volume.slices.size()) {
      throw Error(ErrorCode::DimensionMismatch, "ground truth slice count differs from the volume");
    }
    v.ground_truth = normalize_masks(*ground_truth);
  }
  return v;
}

BinaryMask dilate(const BinaryMask& m, int radius) {
  const int w = m.width();
  const int h = m.height();
  // Separable max filter: rows, then columns.
  BinaryMask rows(w, h, m.source());
  for (int y = 0; y < h; ++y) {
    int last = -1 - radius;
    for (int x = 0; x < w + radius; ++x) {
      if (x < w && m(x, y)) last = x;
      const int target = x - radius;
      if (target >= 0 && target < w && x - last <= 2 * radius) rows.set(target, y);
    }
  }
  BinaryMask out(w, h, m.source());
  for (int x = 0; x < w; ++x) {
    int last = -1 - radius;
    for (int y = 0; y < h + radius; ++y) {
      if (y < h && rows(x, y)) last = y;
      const int target = y - radius;
      if (target >= 0 && target < h && y - last <= 2 * radius) out.set(x, target);
    }
  }
  return out;
}

CandidateLabel label_candidate(const CandidateRegion& r, const BinaryMask& gt, const BinaryMask& gt_dilated) {
  std::size_t overlap = 0;
  bool touches = false;
  for (int p : r.pixels) {
    const auto i = static_cast<std::size_t>(p);
    overlap += gt[i] ? 1 : 0;
    touches = touches || gt_dilated[i];
  }
  if (2 * overlap >= r.pixels.size()) return CandidateLabel::Cyst;
  if (!touches) return CandidateLabel::NonCyst;
  return CandidateLabel::Ambiguous;
}

TrainingSet build_training_set(const VolumeAnalysis& v) {
  if (!v.ground_truth) throw Error(ErrorCode::MissingGroundTruth, v.volume_id + ": ground truth required");
  TrainingSet t;
  t.n_features = kFeatureCount;
  t.provenance.push_back(v.volume_id);
  for (std::size_t s = 0; s < v.slices.size(); ++s) {
    const auto& gt = (*v.ground_truth)[s];
    const BinaryMask grown = dilate(gt, kLabelDilation);
    const auto& a = v.slices[s];
    for (std::size_t c = 0; c < a.candidates.size(); ++c) {
      const CandidateLabel label = label_candidate(a.candidates[c], gt, grown);
      if (label == CandidateLabel::Ambiguous) continue;
      t.add(a.features[c].values, label == CandidateLabel::Cyst);
    }
  }
  return t;
}

std::vector<BinaryMask> classify_and_segment(VolumeAnalysis& v, const ForestModel& model, double threshold,
                                             int jobs) {
  std::vector<BinaryMask> masks(v.slices.size());
  parallel_for(v.slices.size(), jobs, [&](std::size_t s) {
    auto& a = v.slices[s];
    BinaryMask mask(a.denoised.width(), a.denoised.height(), MaskSource::Prediction);
    for (std::size_t c = 0; c < a.candidates.size(); ++c) {
      const double p = predict(model, a.features[c].values);
      a.candidates[c].cyst_prob = p;
      if (p >= threshold) {
        for (int px : a.candidates[c].pixels) mask.set(static_cast<std::size_t>(px));
      }
    }
    masks[s] = std::move(mask);
  });
  return masks;
}

}  // namespace cystseg
