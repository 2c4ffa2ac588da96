#include <doctest.h>

#include <cmath>

#include "cystseg/error.hpp"
#include "cystseg/keyvalue.hpp"
#include "cystseg/pgm.hpp"
#include "cystseg/volume.hpp"
#include "support.hpp"

using namespace cystseg;

namespace {

void require_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    FAIL("expected " << to_string(code));
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

Image8 ramp(int w, int h) {
  Image8 img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(x, y) = static_cast<std::uint8_t>((x * 7 + y * 13) % 256);
  return img;
}

}  // namespace

TEST_CASE("bilinear upsampling of a 2x2 slice matches hand interpolation") {
  Slice s(2, 2, std::vector<float>{0.f, 1.f, 2.f, 3.f});
  const Slice r = resize_bilinear(s, 4, 4);
  // pixel centres of the 4-wide grid land at -0.25, 0.25, 0.75, 1.25 in the
  // 2-wide grid, clamped to the border
  const double c[4] = {0.0, 0.25, 0.75, 1.0};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(r(x, y) == doctest::Approx(c[x] + 2.0 * c[y]).epsilon(1e-7));
}

TEST_CASE("resizing to the same size returns the input unchanged") {
  Slice s(5, 3);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(i) * 0.37f;
  CHECK(resize_bilinear(s, 5, 3) == s);
}

TEST_CASE("bilinear resampling keeps a constant slice constant and stays in range") {
  Slice s(37, 19, 0.42f);
  const Slice r = resize_bilinear(s, kNormalizedWidth, kNormalizedHeight);
  for (float v : r.pixels()) CHECK(v == doctest::Approx(0.42f));

  Rng rng(3);
  const Slice n = testing::random_slice(33, 21, rng);
  const Slice big = resize_bilinear(n, 512, 256);
  float lo = 1.f, hi = 0.f;
  for (float v : n.pixels()) lo = std::min(lo, v), hi = std::max(hi, v);
  for (float v : big.pixels()) {
    CHECK(v >= lo - 1e-6f);
    CHECK(v <= hi + 1e-6f);
  }
}

TEST_CASE("nearest-neighbour mask upsampling maps one pixel to a 2x2 block") {
  BinaryMask m(256, 128, MaskSource::Grader1);
  m.set(2, 2);
  const BinaryMask r = resize_mask(m, 512, 256);
  CHECK(r.count() == 4);
  CHECK(r(4, 4));
  CHECK(r(5, 4));
  CHECK(r(4, 5));
  CHECK(r(5, 5));
}

TEST_CASE("resized masks stay binary") {
  Rng rng(9);
  const BinaryMask m = testing::random_mask(100, 77, 0.3, rng);
  const BinaryMask r = resize_mask(m, 512, 256);
  for (auto b : r.bits().pixels()) CHECK((b == 0 || b == 1));
}

TEST_CASE("normalize_size yields 512x256 integer slices for byte volumes") {
  OctVolume v;
  v.volume_id = "v";
  v.scale = IntensityScale::Byte;
  v.slices.push_back(to_slice(ramp(300, 200), false));
  v.slices.push_back(to_slice(ramp(300, 200), false));
  const OctVolume n = normalize_size(v);
  REQUIRE(n.slices.size() == 2);
  for (const auto& s : n.slices) {
    CHECK(s.width() == kNormalizedWidth);
    CHECK(s.height() == kNormalizedHeight);
    for (float p : s.pixels()) {
      CHECK(p == std::round(p));
      CHECK(p >= 0.f);
      CHECK(p <= 255.f);
    }
  }
  const OctVolume u = to_unit_scale(n);
  CHECK(u.scale == IntensityScale::Unit);
  CHECK(u.slices[0](10, 10) == n.slices[0](10, 10) / 255.0f);
}

TEST_CASE("a 1x1 slice cannot be resampled") {
  require_code(ErrorCode::DegenerateSlice, [] { resize_bilinear(Slice(1, 1), 512, 256); });
  require_code(ErrorCode::DegenerateTarget, [] { resize_bilinear(Slice(4, 4), 0, 256); });
}

TEST_CASE("union of graders is a pixelwise or") {
  BinaryMask a(4, 4, MaskSource::Grader1), b(4, 4, MaskSource::Grader2);
  a.set(0, 0);
  a.set(1, 1);
  b.set(1, 1);
  b.set(3, 2);
  const BinaryMask u = union_graders(a, b);
  CHECK(u.source() == MaskSource::Union);
  CHECK(u.count() == 3);
  CHECK(u(0, 0));
  CHECK(u(3, 2));
  require_code(ErrorCode::DimensionMismatch, [&] { union_graders(a, BinaryMask(5, 4)); });
}

TEST_CASE("PGM round trip is exact") {
  testing::TempDir dir("pgm");
  const Image8 img = ramp(31, 17);
  write_pgm(img, dir / "a.pgm");
  CHECK(read_pgm(dir / "a.pgm") == img);
}

TEST_CASE("unsupported and missing images are reported") {
  testing::TempDir dir("pgm_bad");
  testing::write_file(dir / "ascii.pgm", "P2\n2 2\n255\n0 1 2 3\n");
  testing::write_file(dir / "deep.pgm", "P5\n2 2\n65535\n" + std::string(8, '\0'));
  testing::write_file(dir / "short.pgm", "P5\n4 4\n255\n" + std::string(5, '\0'));
  require_code(ErrorCode::UnsupportedImageFormat, [&] { read_pgm(dir / "ascii.pgm"); });
  require_code(ErrorCode::UnsupportedImageFormat, [&] { read_pgm(dir / "deep.pgm"); });
  require_code(ErrorCode::UnsupportedImageFormat, [&] { read_pgm(dir / "short.pgm"); });
  require_code(ErrorCode::MissingFile, [&] { read_pgm(dir / "none.pgm"); });
}

TEST_CASE("manifest parsing resolves paths and loads slices in order") {
  testing::TempDir dir("manifest");
  std::filesystem::create_directories(dir / "v1");
  write_pgm(ramp(20, 10), dir / "v1/a.pgm");
  Image8 second = ramp(20, 10);
  second(0, 0) = 200;
  write_pgm(second, dir / "v1/b.pgm");
  BinaryMask g(20, 10);
  g.set(3, 3);
  write_mask(g, dir / "v1/g_a.pgm");
  write_mask(BinaryMask(20, 10), dir / "v1/g_b.pgm");
  testing::write_file(dir / "v1/manifest.txt",
                      "# test volume\nvolume_id = vol1\nscanner = cirrus\nslices = a.pgm, b.pgm\n"
                      "gt_grader1 = g_a.pgm,g_b.pgm\ncolour = blue\n");

  Warnings w;
  const VolumeManifest m = read_manifest(dir / "v1/manifest.txt", &w);
  CHECK(m.volume_id == "vol1");
  CHECK(m.scanner == Scanner::Cirrus);
  REQUIRE(m.slice_files.size() == 2);
  CHECK(m.slice_files[1] == dir / "v1/b.pgm");
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("colour") != std::string::npos);

  const OctVolume v = load_volume(m);
  REQUIRE(v.slices.size() == 2);
  CHECK(v.scale == IntensityScale::Byte);
  CHECK(v.slices[1](0, 0) == 200.f);

  Warnings gw;
  const auto gt = load_union_ground_truth(m, &gw);
  REQUIRE(gt);
  CHECK((*gt)[0].count() == 1);
  CHECK(gw.size() == 1);
}

TEST_CASE("manifest errors") {
  testing::TempDir dir("manifest_bad");
  testing::write_file(dir / "noslices.txt", "volume_id = x\n");
  testing::write_file(dir / "garbage.txt", "this line has no separator\n");
  testing::write_file(dir / "scanner.txt", "scanner = polaroid\nslices = a.pgm\n");
  testing::write_file(dir / "gtcount.txt", "slices = a.pgm,b.pgm\ngt_grader2 = g.pgm\n");
  testing::write_file(dir / "missing.txt", "slices = nothere.pgm\n");
  require_code(ErrorCode::MalformedManifest, [&] { read_manifest(dir / "noslices.txt"); });
  require_code(ErrorCode::MalformedManifest, [&] { read_manifest(dir / "garbage.txt"); });
  require_code(ErrorCode::MalformedManifest, [&] { read_manifest(dir / "scanner.txt"); });
  require_code(ErrorCode::DimensionMismatch, [&] { read_manifest(dir / "gtcount.txt"); });
  require_code(ErrorCode::MissingFile, [&] { read_manifest(dir / "absent.txt"); });
  require_code(ErrorCode::MissingFile, [&] { load_volume(dir / "missing.txt"); });
}

TEST_CASE("write_manifest round trip") {
  testing::TempDir dir("manifest_rt");
  VolumeManifest m;
  m.volume_id = "rt";
  m.scanner = Scanner::Topcon;
  m.slice_files = {dir / "s0.pgm", dir / "s1.pgm"};
  m.gt_files_g2 = std::vector<std::filesystem::path>{dir / "g0.pgm", dir / "g1.pgm"};
  write_manifest(m, dir / "manifest.txt");
  const VolumeManifest r = read_manifest(dir / "manifest.txt");
  CHECK(r.volume_id == "rt");
  CHECK(r.scanner == Scanner::Topcon);
  CHECK(r.slice_files == m.slice_files);
  CHECK(!r.gt_files_g1);
  CHECK(*r.gt_files_g2 == *m.gt_files_g2);
  CHECK(testing::read_file(dir / "manifest.txt").find(dir.path().string()) == std::string::npos);
}

TEST_CASE("key-value helpers") {
  const KeyValueFile kv = KeyValueFile::parse("a = 1\n\n# c\n b=two words \na = 3\n");
  REQUIRE(kv.find("a"));
  CHECK(*kv.find("a") == "3");
  CHECK(*kv.find("b") == "two words");
  CHECK(!kv.find("c"));
  CHECK(format_double(0.1) == "0.1");
  CHECK(parse_double(format_double(1.0 / 3.0), "x") == 1.0 / 3.0);
  CHECK(format_fixed(0.5, 3) == "0.500");
  require_code(ErrorCode::InvalidArgument, [] { parse_int("12x", "n"); });
}
