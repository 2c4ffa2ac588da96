#include <doctest.h>

#include <sstream>

#include "commands.hpp"
#include "cystseg/image.hpp"
#include "cystseg/keyvalue.hpp"
#include "cystseg/pgm.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cystseg");
  std::ostringstream out, err;
  const int code = cystseg::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + testing::read_file(f);
  return all;
}

std::string config_value(const fs::path& file, const std::string& key) {
  const auto kv = cystseg::KeyValueFile::read(file);
  const std::string* v = kv.find(key);
  return v ? *v : "";
}

// Three small phantom volumes shared by the cases below.
struct Fixture {
  testing::TempDir dir{"cli"};
  fs::path data = dir / "data";
  fs::path model = dir / "model.ocsf";

  Fixture() {
    REQUIRE(cli({"phantom-gen", "--out", data.string(), "--volumes", "3", "--slices", "3", "--seed", "4"}).code == 0);
  }
  std::string manifest(int v) const { return (data / ("phantom-0" + std::to_string(v)) / "manifest.txt").string(); }
  std::string list() const { return (data / "manifests.txt").string(); }
};

}  // namespace

TEST_CASE("phantom-gen writes volumes and is reproducible") {
  testing::TempDir dir("cli_pg");
  const auto a = dir / "a";
  const auto b = dir / "b";
  REQUIRE(cli({"phantom-gen", "--out", a.string(), "--volumes", "3", "--slices", "2"}).code == 0);
  REQUIRE(cli({"phantom-gen", "--out", b.string(), "--volumes", "3", "--slices", "2"}).code == 0);
  for (int v = 0; v < 3; ++v) {
    const fs::path m = a / ("phantom-0" + std::to_string(v)) / "manifest.txt";
    CHECK(fs::exists(m));
    CHECK(config_value(m, "volume_id") == "phantom-0" + std::to_string(v));
  }
  CHECK(slurp_dir(a) == slurp_dir(b));
  CHECK(fs::exists(a / "phantom_config.txt"));

  testing::write_file(dir / "blocker", "x");
  CHECK(cli({"phantom-gen", "--out", (dir / "blocker" / "sub").string()}).code == 1);
  CHECK(cli({"phantom-gen"}).code == 2);
  CHECK(cli({"phantom-gen", "--out", (dir / "c").string(), "--volumes", "zero"}).code == 2);
  CHECK(cli({"phantom-gen", "--out", (dir / "c").string(), "--area-min", "5"}).code == 2);
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"segment", "--manifest", "m", "--model", "x", "--out", "o", "--no-such-flag"}).code == 2);
}

TEST_CASE("train, segment, eval round trip") {
  Fixture f;
  const Result t = cli({"train", "--manifest-list", f.list(), "--model", f.model.string()});
  REQUIRE(t.code == 0);
  CHECK(fs::exists(f.model));
  const fs::path summary = f.model.string() + ".summary.txt";
  REQUIRE(fs::exists(summary));
  CHECK(!config_value(summary, "oob_accuracy").empty());
  CHECK(config_value(summary, "trees") == "50");
  CHECK(config_value(summary, "volumes") == "3");

  SUBCASE("segment writes one mask per slice and is deterministic in jobs") {
    const auto one = f.dir / "seg1";
    const auto eight = f.dir / "seg8";
    REQUIRE(cli({"segment", "--manifest", f.manifest(1), "--model", f.model.string(), "--out", one.string()}).code == 0);
    REQUIRE(cli({"segment", "--manifest", f.manifest(1), "--model", f.model.string(), "--out", eight.string(),
                 "--jobs", "8"})
                .code == 0);
    for (int s = 0; s < 3; ++s) {
      const auto mask = cystseg::read_pgm(one / ("mask_00" + std::to_string(s) + ".pgm"));
      CHECK(mask.width() == 512);
      CHECK(mask.height() == 256);
    }
    CHECK(slurp_dir(one) == slurp_dir(eight));
  }

  SUBCASE("threshold above one keeps nothing") {
    const auto out = f.dir / "none";
    REQUIRE(cli({"segment", "--manifest", f.manifest(0), "--model", f.model.string(), "--out", out.string(),
                 "--threshold", "1.01"})
                .code == 0);
    for (int s = 0; s < 3; ++s) {
      const auto mask = cystseg::read_pgm(out / ("mask_00" + std::to_string(s) + ".pgm"));
      for (auto v : mask.pixels()) CHECK(v == 0);
    }
  }

  SUBCASE("flags override the config file") {
    testing::write_file(f.dir / "cfg.txt", "threshold = 0.9\nmser-delta = 6\n");
    const auto a = f.dir / "cfg_a";
    const auto b = f.dir / "cfg_b";
    REQUIRE(cli({"segment", "--manifest", f.manifest(0), "--model", f.model.string(), "--out", a.string(),
                 "--config", (f.dir / "cfg.txt").string()})
                .code == 0);
    REQUIRE(cli({"segment", "--manifest", f.manifest(0), "--model", f.model.string(), "--out", b.string(),
                 "--config", (f.dir / "cfg.txt").string(), "--threshold", "0.7"})
                .code == 0);
    CHECK(config_value(a / "effective_config.txt", "threshold") == "0.9");
    CHECK(config_value(b / "effective_config.txt", "threshold") == "0.7");
    CHECK(config_value(b / "effective_config.txt", "mser-delta") == "6");
    CHECK(config_value(b / "effective_config.txt", "tv-max-iter") == "200");
    testing::write_file(f.dir / "bad.txt", "no-such = 1\n");
    CHECK(cli({"segment", "--manifest", f.manifest(0), "--model", f.model.string(), "--out", b.string(),
               "--config", (f.dir / "bad.txt").string()})
              .code == 2);
  }

  SUBCASE("fixed-model eval with the zero-excluded block") {
    const auto report = f.dir / "report.txt";
    const Result e = cli({"eval", "--manifest-list", f.list(), "--model", f.model.string(), "--exclude-zero",
                          "--report-out", report.string()});
    REQUIRE(e.code == 0);
    CHECK(e.out.find("nz.mean") != std::string::npos);
    CHECK(config_value(report, "mode") == "fixed-model");
    CHECK(!config_value(report, "volume.phantom-00.all.mean").empty());
    CHECK(!config_value(report, "volume.phantom-00.nonzero.mean").empty());
    CHECK(fs::exists(report.string() + ".txt"));
  }

  SUBCASE("leave-one-out eval is reproducible") {
    const auto r1 = f.dir / "loo1.txt";
    const auto r2 = f.dir / "loo2.txt";
    REQUIRE(cli({"eval", "--manifest-list", f.list(), "--report-out", r1.string()}).code == 0);
    REQUIRE(cli({"eval", "--manifest-list", f.list(), "--report-out", r2.string(), "--jobs", "4"}).code == 0);
    CHECK(config_value(r1, "mode") == "loocv");
    CHECK(config_value(r1, "volume.phantom-00.nonzero.mean").empty());
    CHECK(testing::read_file(r1) == testing::read_file(r2));
  }

  SUBCASE("missing model file") {
    CHECK(cli({"segment", "--manifest", f.manifest(0), "--model", (f.dir / "nope").string(), "--out",
               (f.dir / "x").string()})
              .code == 1);
  }
}

TEST_CASE("ground truth and class problems") {
  Fixture f;
  const fs::path vol = f.data / "phantom-00";

  testing::write_file(vol / "no_gt.txt",
                      "volume_id = bare\nscanner = Synthetic\nslices = slice_000.pgm,slice_001.pgm,slice_002.pgm\n");
  const Result e = cli({"eval", "--manifest", (vol / "no_gt.txt").string(), "--manifest", f.manifest(1)});
  CHECK(e.code == 2);
  CHECK(e.err.find("ground truth required") != std::string::npos);
  CHECK(cli({"train", "--manifest", (vol / "no_gt.txt").string(), "--model", f.model.string()}).code == 2);

  for (int s = 0; s < 3; ++s) cystseg::write_pgm(cystseg::Image8(512, 256, 0), vol / ("empty_" + std::to_string(s) + ".pgm"));
  testing::write_file(vol / "empty_gt.txt",
                      "volume_id = empty\nscanner = Synthetic\nslices = slice_000.pgm,slice_001.pgm,slice_002.pgm\n"
                      "gt_grader1 = empty_0.pgm,empty_1.pgm,empty_2.pgm\n");
  const Result t = cli({"train", "--manifest", (vol / "empty_gt.txt").string(), "--model", f.model.string()});
  CHECK(t.code == 3);
  CHECK(!fs::exists(f.model));

  CHECK(cli({"eval", "--manifest", f.manifest(0)}).code == 3);
  CHECK(cli({"segment", "--manifest", (vol / "missing.txt").string(), "--model", "m", "--out", "o"}).code == 1);
}
