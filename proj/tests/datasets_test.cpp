// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "hcae/datasets.hpp"
#include "hcae/errors.hpp"
#include "hcae/hash.hpp"
#include "hcae/image_io.hpp"

using namespace hcae;
namespace fs = std::filesystem;

namespace {

// Independent label oracle: scan center-window pixels for blob chroma. The
// thresholds sit halfway inside the margin the palette guarantees.
bool blob_pixel(const ImagePatch& p, int y, int x) {
  if (p.channels == 3) {
    const float r = p.at(y, x, 0), g = p.at(y, x, 1), b = p.at(y, x, 2);
    return (r - g) > 0.45f && (b - g) > 0.30f;
  }
  return p.at(y, x, 0) < 0.2f;
}

int label_by_center_scan(const ImagePatch& p) {
  const WindowBox wb = center_window(p.height, p.width);
  for (int y = wb.y0; y < wb.y0 + wb.h; ++y)
    for (int x = wb.x0; x < wb.x0 + wb.w; ++x)
      if (blob_pixel(p, y, x)) return 1;
  return 0;
}

bool any_blob_pixel(const ImagePatch& p) {
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x)
      if (blob_pixel(p, y, x)) return true;
  return false;
}

uint64_t patch_digest(const ImagePatch& p) {
  return fnv1a64(p.pixels.data(), p.pixels.size() * sizeof(float));
}

}  // namespace

TEST_CASE("center window arithmetic") {
  CHECK(center_window_size(96) == 32);
  const WindowBox wb = center_window(96, 96);
  CHECK(wb.y0 == 32);
  CHECK(wb.x0 == 32);
  CHECK(wb.h == 32);
  // Parity nudge keeps the window concentric on awkward sides.
  CHECK((8 - center_window_size(8)) % 2 == 0);
  CHECK((10 - center_window_size(10)) % 2 == 0);
}

TEST_CASE("synthetic generation honors counts and center semantics") {
  SUBCASE("fraction forces the positive count") {
    const auto ds = generate_synthetic_dataset(4, 0, 0.5);
    CHECK(ds.count_label(1) == 2);
    CHECK(ds.count_label(0) == 2);
  }

  SUBCASE("stored labels equal the independent center-scan oracle") {
    const auto ds = generate_synthetic_dataset(200, 17, 0.45);
    size_t outer_blob_negatives = 0;
    for (const auto& s : ds.samples) {
      CHECK(label_by_center_scan(s.patch) == s.label);
      if (s.label == 0 && any_blob_pixel(s.patch)) ++outer_blob_negatives;
    }
    // Outer-ring blobs must actually occur among negatives.
    CHECK(outer_blob_negatives > 10);
  }

  SUBCASE("single channel variant") {
    PatchGeometry g;
    g.channels = 1;
    g.height = g.width = 32;
    const auto ds = generate_synthetic_dataset(60, 3, 0.5, g);
    for (const auto& s : ds.samples) CHECK(label_by_center_scan(s.patch) == s.label);
  }

  SUBCASE("bit-identical for identical arguments") {
    const auto a = generate_synthetic_dataset(20, 5, 0.3);
    const auto b = generate_synthetic_dataset(20, 5, 0.3);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a.samples[i].label == b.samples[i].label);
      CHECK(a.samples[i].patch.pixels == b.samples[i].patch.pixels);
    }
    const auto c = generate_synthetic_dataset(20, 6, 0.3);
    bool different = false;
    for (size_t i = 0; i < a.size() && !different; ++i)
      different = a.samples[i].patch.pixels != c.samples[i].patch.pixels;
    CHECK(different);
  }

  SUBCASE("pixels stay in range and geometry is uniform") {
    const auto ds = generate_synthetic_dataset(12, 9, 0.5);
    ds.validate_uniform_geometry();
    for (const auto& s : ds.samples) s.patch.validate();
  }

  SUBCASE("invalid arguments are rejected") {
    CHECK_THROWS_AS(generate_synthetic_dataset(0, 1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic_dataset(4, 1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic_dataset(4, 1, 1.0), std::invalid_argument);
    PatchGeometry tiny;
    tiny.height = tiny.width = 4;  // center window would leave no outer region
    CHECK_THROWS_AS(generate_synthetic_dataset(4, 1, 0.5, tiny), std::invalid_argument);
    PatchGeometry twoch;
    twoch.channels = 2;
    CHECK_THROWS_AS(generate_synthetic_dataset(4, 1, 0.5, twoch), std::invalid_argument);
  }
}

TEST_CASE("split arithmetic, determinism and disjointness") {
  const auto ds = generate_synthetic_dataset(10, 1, 0.5);

  SUBCASE("20 percent of ten") {
    const auto [train, val] = split(ds, 0.2, 7);
    CHECK(train.size() == 8);
    CHECK(val.size() == 2);

    // Disjoint cover: the digest multiset is preserved.
    std::multiset<uint64_t> before, after;
    for (const auto& s : ds.samples) before.insert(patch_digest(s.patch));
    for (const auto& s : train.samples) after.insert(patch_digest(s.patch));
    for (const auto& s : val.samples) after.insert(patch_digest(s.patch));
    CHECK(before == after);
  }

  SUBCASE("same seed twice gives identical partitions") {
    const auto [t1, v1] = split(ds, 0.2, 7);
    const auto [t2, v2] = split(ds, 0.2, 7);
    for (size_t i = 0; i < v1.size(); ++i)
      CHECK(v1.samples[i].patch.pixels == v2.samples[i].patch.pixels);
    for (size_t i = 0; i < t1.size(); ++i)
      CHECK(t1.samples[i].patch.pixels == t2.samples[i].patch.pixels);
  }

  SUBCASE("different seeds give different membership") {
    const auto big = generate_synthetic_dataset(100, 2, 0.5);
    const auto [t1, v1] = split(big, 0.2, 1);
    const auto [t2, v2] = split(big, 0.2, 2);
    std::set<uint64_t> m1, m2;
    for (const auto& s : v1.samples) m1.insert(patch_digest(s.patch));
    for (const auto& s : v2.samples) m2.insert(patch_digest(s.patch));
    CHECK(m1 != m2);
  }

  SUBCASE("empty partitions are rejected") {
    const auto small = generate_synthetic_dataset(2, 3, 0.5);
    CHECK_THROWS_AS(split(small, 0.1, 1), std::invalid_argument);   // val would be empty
    CHECK_THROWS_AS(split(small, 0.9, 1), std::invalid_argument);   // train would be empty
    CHECK_THROWS_AS(split(small, 0.0, 1), std::invalid_argument);
  }
}

TEST_CASE("dihedral transforms") {
  SUBCASE("identity leaves pixels and label unchanged") {
    const auto ds = generate_synthetic_dataset(2, 4, 0.5);
    const auto& s = ds.samples[0];
    const ImagePatch t = apply_dihedral(s.patch, 0);
    CHECK(t.pixels == s.patch.pixels);
  }

  SUBCASE("horizontal flip is an involution") {
    const auto ds = generate_synthetic_dataset(1, 8, 0.5);
    const ImagePatch& p = ds.samples[0].patch;
    const ImagePatch back = apply_dihedral(apply_dihedral(p, 4), 4);
    CHECK(back.pixels == p.pixels);
  }

  SUBCASE("90 degree rotation moves a marked corner where index arithmetic says") {
    ImagePatch p(4, 4, 1);
    p.at(0, 0, 0) = 1.0f;  // marker in the top-left corner
    const ImagePatch r = apply_dihedral(p, 1);  // one clockwise rotation
    CHECK(r.at(0, 3, 0) == 1.0f);  // lands in the top-right
    CHECK(r.at(0, 0, 0) == 0.0f);
    const ImagePatch r2 = apply_dihedral(p, 2);
    CHECK(r2.at(3, 3, 0) == 1.0f);  // two rotations: bottom-right
  }

  SUBCASE("every transform preserves the center label") {
    const auto ds = generate_synthetic_dataset(40, 11, 0.5);
    for (const auto& s : ds.samples)
      for (int t = 0; t < 8; ++t) {
        const ImagePatch moved = apply_dihedral(s.patch, t);
        CHECK(label_by_center_scan(moved) == s.label);
      }
  }

  SUBCASE("augment draws uniformly and preserves labels") {
    const auto ds = generate_synthetic_dataset(10, 13, 0.5);
    Rng rng(99);
    for (const auto& s : ds.samples) {
      const LabeledSample out = augment(s, rng);
      CHECK(out.label == s.label);
      CHECK(out.patch.same_geometry(s.patch));
    }
  }

  SUBCASE("rotation of non-square patches is rejected") {
    ImagePatch rect(4, 6, 1);
    CHECK_THROWS_AS(apply_dihedral(rect, 1), std::invalid_argument);
    CHECK_NOTHROW(apply_dihedral(rect, 4));  // pure flip is fine
    LabeledSample s{rect, 0};
    Rng rng(1);
    CHECK_THROWS_AS(augment(s, rng), std::invalid_argument);
  }
}

TEST_CASE("dataset disk round trip and manifest validation") {
  const fs::path dir = fs::temp_directory_path() / "hcae_ds_test";
  fs::remove_all(dir);

  SUBCASE("save then load preserves order, labels and 8-bit pixels") {
    PatchGeometry g;
    g.height = g.width = 16;
    const auto ds = generate_synthetic_dataset(5, 21, 0.4, g);
    save_dataset(ds, dir);
    const auto back = load_dataset(dir);
    REQUIRE(back.size() == ds.size());
    for (size_t i = 0; i < ds.size(); ++i) {
      CHECK(back.samples[i].label == ds.samples[i].label);
      for (size_t j = 0; j < ds.samples[i].patch.pixels.size(); ++j) {
        const float orig = ds.samples[i].patch.pixels[j];
        const float got = back.samples[i].patch.pixels[j];
        CHECK(std::abs(got - orig) <= 0.5f / 255.0f + 1e-6f);
      }
    }
  }

  SUBCASE("8-bit values normalize by 255") {
    fs::create_directories(dir);
    // 1x2 grayscale with raw bytes 255 and 51.
    std::ofstream img(dir / "t.pgm", std::ios::binary);
    img << "P5\n2 1\n255\n";
    const unsigned char raw[2] = {255, 51};
    img.write(reinterpret_cast<const char*>(raw), 2);
    img.close();
    std::ofstream man(dir / "manifest.tsv");
    man << "t.pgm\t1\n";
    man.close();
    const auto ds = load_dataset(dir);
    REQUIRE(ds.size() == 1);
    CHECK(ds.samples[0].patch.pixels[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(ds.samples[0].patch.pixels[1] == doctest::Approx(51.0 / 255.0).epsilon(1e-6));
    CHECK(ds.samples[0].patch.pixels[1] == doctest::Approx(0.2).epsilon(1e-6));
  }

  SUBCASE("manifest errors identify the offending row") {
    fs::create_directories(dir);
    {
      std::ofstream man(dir / "manifest.tsv");
      man << "# comment line\n";
      man << "missing.ppm\t1\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("row 2"), IoError);
    {
      std::ofstream man(dir / "manifest.tsv");
      man << "x.ppm\t2\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("non-binary"), IoError);
    {
      ImagePatch a(4, 4, 3), b(6, 6, 3);
      write_image_8bit(dir / "a.ppm", a);
      write_image_8bit(dir / "b.ppm", b);
      std::ofstream man(dir / "manifest.tsv");
      man << "a.ppm\t0\nb.ppm\t1\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("geometry"), IoError);
  }

  fs::remove_all(dir);
}
