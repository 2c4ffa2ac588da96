#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "cystseg/error.hpp"
#include "cystseg/eval.hpp"
#include "cystseg/keyvalue.hpp"
#include "cystseg/pgm.hpp"
#include "cystseg/phantom.hpp"
#include "cystseg/pipeline.hpp"
#include "cystseg/random.hpp"
#include "cystseg/volume.hpp"

namespace fs = std::filesystem;

namespace cystseg::cli {
namespace {

std::string numbered(std::string_view stem, std::size_t i, std::string_view ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return std::string(stem) + "_" + buf + std::string(ext);
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::Io, "cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile:
    case ErrorCode::MalformedManifest:
    case ErrorCode::UnsupportedImageFormat:
    case ErrorCode::Io:
      return kIoError;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InfeasibleSpec:
    case ErrorCode::TooManyLevels:
    case ErrorCode::InvalidScalePair:
    case ErrorCode::MissingGroundTruth:
      return kUsageError;
    default:
      return kDataError;
  }
}

// Config handling shared by the pipeline subcommands. Flags override the
// config file, which overrides the built-in defaults.
struct ConfigOptions {
  std::string config_file;
  std::vector<std::optional<std::string>> values;

  void add_to(CLI::App* app) {
    const auto& keys = config_keys();
    values.assign(keys.size(), std::nullopt);
    app->add_option("--config", config_file, "key = value file with pipeline settings");
    for (std::size_t i = 0; i < keys.size(); ++i) {
      app->add_option("--" + std::string(keys[i].name), values[i], std::string(keys[i].help));
    }
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    if (!config_file.empty()) {
      if (!fs::exists(config_file)) throw Error(ErrorCode::MissingFile, "config file " + config_file);
      cfg.apply(KeyValueFile::read(config_file));
    }
    const auto& keys = config_keys();
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (values[i]) cfg.apply(keys[i].name, *values[i]);
    }
    cfg.validate();
    return cfg;
  }
};

struct DumpOptions {
  bool layers = false;
  bool saliency = false;
  bool candidates = false;

  void add_to(CLI::App* app) {
    app->add_flag("--dump-layers", layers, "write the denoised slice with ILM and RPE drawn in white");
    app->add_flag("--dump-saliency", saliency, "write the saliency map");
    app->add_flag("--dump-candidates", candidates, "write the union of MSER candidates as a mask");
  }
};

void write_dumps(const SliceAnalysis& a, std::size_t i, const fs::path& out, const DumpOptions& d) {
  if (d.layers) {
    Image8 img = quantize(a.denoised, true);
    if (a.layers) {
      for (int x = 0; x < img.width(); ++x) {
        img(x, a.layers->ilm_row[x]) = 255;
        img(x, a.layers->rpe_row[x]) = 255;
      }
    }
    write_pgm(img, out / numbered("layers", i, ".pgm"));
  }
  if (d.saliency) write_pgm(quantize(a.saliency, true), out / numbered("saliency", i, ".pgm"));
  if (d.candidates) {
    BinaryMask m(a.denoised.width(), a.denoised.height());
    for (const auto& c : a.candidates) {
      for (int p : c.pixels) m.set(p % m.width(), p / m.width(), true);
    }
    write_mask(m, out / numbered("candidates", i, ".pgm"));
  }
}

void report_warnings(const Warnings& w, std::ostream& err) {
  for (const auto& s : w) err << "warning: " << s << "\n";
}

void report_slice_warnings(const VolumeAnalysis& v, std::ostream& err) {
  for (std::size_t i = 0; i < v.slices.size(); ++i) {
    for (const auto& w : v.slices[i].warnings) err << "warning: " << v.volume_id << " slice " << i << ": " << w << "\n";
  }
}

std::vector<fs::path> read_manifest_list(const fs::path& list) {
  if (!fs::exists(list)) throw Error(ErrorCode::MissingFile, "manifest list " + list.string());
  std::ifstream f(list);
  std::vector<fs::path> out;
  std::string line;
  while (std::getline(f, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    fs::path p(t);
    out.push_back(p.is_relative() ? list.parent_path() / p : p);
  }
  return out;
}

struct Inputs {
  std::vector<std::string> manifests;
  std::string manifest_list;

  void add_to(CLI::App* app) {
    app->add_option("--manifest", manifests, "volume manifest (repeatable)");
    app->add_option("--manifest-list", manifest_list, "file listing one manifest path per line");
  }

  std::vector<fs::path> paths() const {
    std::vector<fs::path> out(manifests.begin(), manifests.end());
    if (!manifest_list.empty()) {
      auto more = read_manifest_list(manifest_list);
      out.insert(out.end(), more.begin(), more.end());
    }
    if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no manifests given (--manifest or --manifest-list)");
    return out;
  }
};

std::vector<VolumeAnalysis> analyze_with_truth(const std::vector<fs::path>& manifests, const PipelineConfig& cfg,
                                               std::ostream& err) {
  std::vector<VolumeManifest> parsed;
  for (const auto& path : manifests) {
    Warnings w;
    parsed.push_back(read_manifest(path, &w));
    report_warnings(w, err);
    if (!parsed.back().has_ground_truth()) {
      throw Error(ErrorCode::MissingGroundTruth, "ground truth required: " + path.string() + " lists no grader masks");
    }
  }
  std::vector<VolumeAnalysis> out;
  for (const auto& m : parsed) {
    Warnings w;
    auto gt = load_union_ground_truth(m, &w);
    report_warnings(w, err);
    out.push_back(analyze_volume(load_volume(m), cfg, std::move(gt)));
    report_slice_warnings(out.back(), err);
  }
  return out;
}

// phantom-gen

struct PhantomGenArgs {
  std::string out;
  int volumes = 5;
  int slices = 8;
  double sigma = 0.2;
  int cysts_min = 1, cysts_max = 3;
  int area_min = 50, area_max = 3000;
  double amplitude = 10.0;
  double period = 512.0;
  std::uint64_t seed = 1;
};

int cmd_phantom_gen(const PhantomGenArgs& a, std::ostream& out) {
  if (a.volumes < 1) throw Error(ErrorCode::InvalidArgument, "--volumes must be at least 1");
  const fs::path root(a.out);
  make_dirs(root);
  std::string list;
  for (int v = 0; v < a.volumes; ++v) {
    PhantomSpec spec;
    spec.n_slices = a.slices;
    spec.speckle_sigma = a.sigma;
    spec.cysts_per_slice = {a.cysts_min, a.cysts_max};
    spec.cyst_area = {a.area_min, a.area_max};
    spec.layers.amplitude = a.amplitude;
    spec.layers.period = a.period;
    spec.seed = splitmix64(a.seed ^ splitmix64(static_cast<std::uint64_t>(v)));
    Phantom ph = generate_phantom(spec);

    char id[32];
    std::snprintf(id, sizeof id, "phantom-%02d", v);
    const fs::path dir = root / id;
    make_dirs(dir);
    VolumeManifest m;
    m.volume_id = id;
    m.scanner = Scanner::Synthetic;
    m.gt_files_g1.emplace();
    m.gt_files_g2.emplace();
    std::string truth;
    for (std::size_t i = 0; i < ph.volume.slices.size(); ++i) {
      const fs::path slice = dir / numbered("slice", i, ".pgm");
      const fs::path g1 = dir / numbered("gt_grader1", i, ".pgm");
      const fs::path g2 = dir / numbered("gt_grader2", i, ".pgm");
      write_pgm(quantize(ph.volume.slices[i], true), slice);
      write_mask(ph.truth.masks[i], g1);
      write_mask(ph.truth.masks[i], g2);
      m.slice_files.push_back(slice);
      m.gt_files_g1->push_back(g1);
      m.gt_files_g2->push_back(g2);
      std::string ilm, rpe;
      for (int x = 0; x < spec.width; ++x) {
        ilm += (x ? "," : "") + std::to_string(ph.truth.boundaries[i].ilm_row[x]);
        rpe += (x ? "," : "") + std::to_string(ph.truth.boundaries[i].rpe_row[x]);
      }
      truth += numbered("ilm", i, "") + " = " + ilm + "\n" + numbered("rpe", i, "") + " = " + rpe + "\n";
    }
    for (std::size_t c = 0; c < ph.truth.cysts.size(); ++c) {
      const auto& r = ph.truth.cysts[c];
      truth += "cyst_" + std::to_string(c) + " = slice " + std::to_string(r.slice) + " center " +
               format_double(r.center_x) + " " + format_double(r.center_y) + " axes " + format_double(r.semi_axis_x) +
               " " + format_double(r.semi_axis_y) + " area " + std::to_string(r.area) + "\n";
    }
    write_manifest(m, dir / "manifest.txt");
    write_text(dir / "truth.txt", truth);
    list += std::string(id) + "/manifest.txt\n";
  }
  write_text(root / "manifests.txt", list);

  KeyValueFile params;
  params.set("volumes", std::to_string(a.volumes));
  params.set("slices", std::to_string(a.slices));
  params.set("speckle-sigma", format_double(a.sigma));
  params.set("cysts-min", std::to_string(a.cysts_min));
  params.set("cysts-max", std::to_string(a.cysts_max));
  params.set("area-min", std::to_string(a.area_min));
  params.set("area-max", std::to_string(a.area_max));
  params.set("amplitude", format_double(a.amplitude));
  params.set("period", format_double(a.period));
  params.set("seed", std::to_string(a.seed));
  params.write(root / "phantom_config.txt");
  out << "wrote " << a.volumes << " volumes to " << root.string() << "\n";
  return kOk;
}

// preprocess / segment

struct SliceCommandArgs {
  std::string manifest;
  std::string out;
  std::string model;
  bool overlay = false;
};

Image<Rgb8> overlay_image(const Slice& unit_slice, const BinaryMask& pred, const BinaryMask* gt) {
  Image<Rgb8> img(unit_slice.width(), unit_slice.height());
  const Image8 gray = quantize(unit_slice, true);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const std::uint8_t g = gray(x, y);
      Rgb8 c{g, g, g};
      const bool p = pred(x, y);
      const bool t = gt && (*gt)(x, y);
      if (p && t) c = {255, 255, 0};
      else if (p) c = {255, static_cast<std::uint8_t>(g / 2), static_cast<std::uint8_t>(g / 2)};
      else if (t) c = {static_cast<std::uint8_t>(g / 2), 255, static_cast<std::uint8_t>(g / 2)};
      img(x, y) = c;
    }
  }
  return img;
}

int cmd_preprocess(const SliceCommandArgs& a, const PipelineConfig& cfg, const DumpOptions& dumps,
                   std::ostream& out, std::ostream& err) {
  Warnings w;
  const OctVolume vol = load_volume(a.manifest, &w);
  report_warnings(w, err);
  const fs::path dir(a.out);
  make_dirs(dir);
  const VolumeAnalysis v = analyze_volume(vol, cfg);
  report_slice_warnings(v, err);
  for (std::size_t i = 0; i < v.slices.size(); ++i) {
    write_pgm(quantize(v.slices[i].denoised, true), dir / numbered("denoised", i, ".pgm"));
    write_dumps(v.slices[i], i, dir, dumps);
  }
  cfg.to_key_values().write(dir / "effective_config.txt");
  out << "preprocessed " << v.slices.size() << " slices of " << v.volume_id << "\n";
  return kOk;
}

int cmd_segment(const SliceCommandArgs& a, const PipelineConfig& cfg, const DumpOptions& dumps, std::ostream& out,
                std::ostream& err) {
  Warnings w;
  const VolumeManifest m = read_manifest(a.manifest, &w);
  report_warnings(w, err);
  const ForestModel model = load_model(a.model);
  const OctVolume vol = load_volume(m);
  std::optional<std::vector<BinaryMask>> gt;
  if (a.overlay && m.has_ground_truth()) gt = load_union_ground_truth(m, &w);
  const fs::path dir(a.out);
  make_dirs(dir);
  VolumeAnalysis v = analyze_volume(vol, cfg, gt);
  report_slice_warnings(v, err);
  const auto masks = classify_and_segment(v, model, cfg.threshold, cfg.jobs);
  const OctVolume unit = to_unit_scale(normalize_size(vol));
  for (std::size_t i = 0; i < masks.size(); ++i) {
    write_mask(masks[i], dir / numbered("mask", i, ".pgm"));
    write_dumps(v.slices[i], i, dir, dumps);
    if (a.overlay) {
      const BinaryMask* t = v.ground_truth ? &(*v.ground_truth)[i] : nullptr;
      write_ppm(overlay_image(unit.slices[i], masks[i], t), dir / numbered("overlay", i, ".ppm"));
    }
  }
  KeyValueFile dump = cfg.to_key_values();
  dump.set("model", a.model);
  dump.write(dir / "effective_config.txt");
  out << "segmented " << masks.size() << " slices of " << v.volume_id << "\n";
  return kOk;
}

// train

struct TrainArgs {
  Inputs inputs;
  std::string model;
  std::string summary;
};

int cmd_train(const TrainArgs& a, const PipelineConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto volumes = analyze_with_truth(a.inputs.paths(), cfg, err);
  TrainingSet t;
  t.n_features = kFeatureCount;
  for (const auto& v : volumes) t.append(build_training_set(v));
  ForestParams fp = cfg.forest;
  fp.jobs = cfg.jobs;
  const ForestModel model = train_forest(t, cfg.seed, fp);
  save_model(model, a.model);

  std::size_t positives = 0;
  for (auto l : t.labels) positives += l;
  KeyValueFile summary;
  summary.set("volumes", std::to_string(volumes.size()));
  summary.set("rows", std::to_string(t.rows()));
  summary.set("rows_cyst", std::to_string(positives));
  summary.set("rows_noncyst", std::to_string(t.rows() - positives));
  summary.set("trees", std::to_string(model.trees.size()));
  summary.set("features", std::to_string(model.n_features));
  summary.set("oob_accuracy", format_fixed(model.oob_accuracy, 6));
  const KeyValueFile effective = cfg.to_key_values();
  for (const auto& [k, v] : effective.entries()) summary.set("config." + k, v);
  const fs::path summary_path = a.summary.empty() ? fs::path(a.model + ".summary.txt") : fs::path(a.summary);
  summary.write(summary_path);
  out << "trained " << model.trees.size() << " trees on " << t.rows() << " rows (" << positives
      << " cyst), OOB accuracy " << format_fixed(model.oob_accuracy, 4) << "\n";
  return kOk;
}

// eval

struct EvalArgs {
  Inputs inputs;
  std::string model;
  std::string report_out;
  bool exclude_zero = false;
};

int cmd_eval(const EvalArgs& a, const PipelineConfig& cfg, std::ostream& out, std::ostream& err) {
  std::optional<ForestModel> model;
  if (!a.model.empty()) model = load_model(a.model);
  auto volumes = analyze_with_truth(a.inputs.paths(), cfg, err);
  const EvalReport report =
      model ? evaluate_with_model(volumes, *model, cfg, a.exclude_zero) : loocv(volumes, cfg, a.exclude_zero);
  const std::string text = report.to_text();
  out << text;
  if (!a.report_out.empty()) {
    std::string kv = report.to_key_values();
    const KeyValueFile effective = cfg.to_key_values();
    for (const auto& [k, v] : effective.entries()) kv += "config." + k + " = " + v + "\n";
    if (model) kv += "config.model = " + a.model + "\n";
    const fs::path path(a.report_out);
    if (path.has_parent_path()) make_dirs(path.parent_path());
    write_text(path, kv);
    write_text(fs::path(a.report_out + ".txt"), text);
  }
  return kOk;
}

// overlay

struct OverlayArgs {
  std::string manifest;
  std::string masks;
  std::string out;
};

int cmd_overlay(const OverlayArgs& a, std::ostream& out, std::ostream& err) {
  Warnings w;
  const VolumeManifest m = read_manifest(a.manifest, &w);
  const OctVolume unit = to_unit_scale(normalize_size(load_volume(m)));
  std::optional<std::vector<BinaryMask>> gt;
  if (m.has_ground_truth()) {
    gt = load_union_ground_truth(m, &w);
    *gt = normalize_masks(*gt);
  }
  report_warnings(w, err);
  const fs::path dir(a.out);
  make_dirs(dir);
  for (std::size_t i = 0; i < unit.slices.size(); ++i) {
    BinaryMask pred = read_mask(fs::path(a.masks) / numbered("mask", i, ".pgm"), MaskSource::Prediction);
    if (pred.width() != kNormalizedWidth || pred.height() != kNormalizedHeight) {
      pred = resize_mask(pred, kNormalizedWidth, kNormalizedHeight);
    }
    write_ppm(overlay_image(unit.slices[i], pred, gt ? &(*gt)[i] : nullptr), dir / numbered("overlay", i, ".ppm"));
  }
  out << "wrote " << unit.slices.size() << " overlays to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retinal cyst segmentation for SD-OCT volumes", "cystseg"};
  app.require_subcommand(1);

  PhantomGenArgs pg;
  auto* phantom = app.add_subcommand("phantom-gen", "write synthetic volumes with known layers and cysts");
  phantom->add_option("--out", pg.out, "output directory")->required();
  phantom->add_option("--volumes", pg.volumes, "number of volumes")->capture_default_str();
  phantom->add_option("--slices", pg.slices, "slices per volume")->capture_default_str();
  phantom->add_option("--speckle-sigma", pg.sigma, "Rayleigh speckle scale (0 = clean)")->capture_default_str();
  phantom->add_option("--cysts-min", pg.cysts_min, "fewest cysts per slice")->capture_default_str();
  phantom->add_option("--cysts-max", pg.cysts_max, "most cysts per slice")->capture_default_str();
  phantom->add_option("--area-min", pg.area_min, "smallest cyst area in pixels")->capture_default_str();
  phantom->add_option("--area-max", pg.area_max, "largest cyst area in pixels")->capture_default_str();
  phantom->add_option("--amplitude", pg.amplitude, "ILM sinusoid amplitude in rows")->capture_default_str();
  phantom->add_option("--period", pg.period, "layer sinusoid period in columns")->capture_default_str();
  phantom->add_option("--seed", pg.seed, "generator seed")->capture_default_str();

  SliceCommandArgs pre_args;
  ConfigOptions pre_cfg;
  DumpOptions pre_dumps;
  auto* preprocess = app.add_subcommand("preprocess", "resize and denoise a volume, with optional debug dumps");
  preprocess->add_option("--manifest", pre_args.manifest, "volume manifest")->required();
  preprocess->add_option("--out", pre_args.out, "output directory")->required();
  pre_cfg.add_to(preprocess);
  pre_dumps.add_to(preprocess);

  SliceCommandArgs seg_args;
  ConfigOptions seg_cfg;
  DumpOptions seg_dumps;
  auto* segment = app.add_subcommand("segment", "segment cysts in a volume with a trained model");
  segment->add_option("--manifest", seg_args.manifest, "volume manifest")->required();
  segment->add_option("--model", seg_args.model, "model file written by train")->required();
  segment->add_option("--out", seg_args.out, "output directory")->required();
  segment->add_flag("--overlay", seg_args.overlay, "also write colour overlays");
  seg_cfg.add_to(segment);
  seg_dumps.add_to(segment);

  TrainArgs train_args;
  ConfigOptions train_cfg;
  auto* train = app.add_subcommand("train", "train the candidate classifier on volumes with ground truth");
  train_args.inputs.add_to(train);
  train->add_option("--model", train_args.model, "output model file")->required();
  train->add_option("--summary", train_args.summary, "training summary path (default: <model>.summary.txt)");
  train_cfg.add_to(train);

  EvalArgs eval_args;
  ConfigOptions eval_cfg;
  auto* eval = app.add_subcommand("eval", "leave-one-out or fixed-model evaluation");
  eval_args.inputs.add_to(eval);
  eval->add_option("--model", eval_args.model, "evaluate this model instead of leave-one-out");
  eval->add_option("--report-out", eval_args.report_out, "key-value report path; the table goes to <path>.txt");
  eval->add_flag("--exclude-zero", eval_args.exclude_zero, "add statistics over slices with nonzero Dice");
  eval_cfg.add_to(eval);

  OverlayArgs ov;
  auto* overlay = app.add_subcommand("overlay", "draw predicted masks (red) and ground truth (green) on slices");
  overlay->add_option("--manifest", ov.manifest, "volume manifest")->required();
  overlay->add_option("--masks", ov.masks, "directory with mask_NNN.pgm files")->required();
  overlay->add_option("--out", ov.out, "output directory")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*phantom) return cmd_phantom_gen(pg, out);
    if (*preprocess) return cmd_preprocess(pre_args, pre_cfg.resolve(), pre_dumps, out, err);
    if (*segment) return cmd_segment(seg_args, seg_cfg.resolve(), seg_dumps, out, err);
    if (*train) return cmd_train(train_args, train_cfg.resolve(), out, err);
    if (*eval) return cmd_eval(eval_args, eval_cfg.resolve(), out, err);
    if (*overlay) return cmd_overlay(ov, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kUsageError;
}

}  // namespace cystseg::cli
