// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hcae/rng.hpp"

namespace hcae {

// H x W x C raster, row-major with channels fastest, values in [0,1].
struct ImagePatch {
  int height = 0, width = 0, channels = 0;
  std::vector<float> pixels;

  ImagePatch() = default;
  ImagePatch(int h, int w, int c)
      : height(h), width(w), channels(c),
        pixels(static_cast<size_t>(h) * static_cast<size_t>(w) * static_cast<size_t>(c), 0.f) {}

  float& at(int y, int x, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  bool same_geometry(const ImagePatch& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  void validate() const;  // positive dims, pixel count, values in [0,1]
};

// Label semantics: 1 iff the centered window (32x32 for 96x96 patches)
// contains target structure; structure outside the window never matters.
struct LabeledSample {
  ImagePatch patch;
  int label = 0;
};

struct LabeledDataset {
  std::vector<LabeledSample> samples;
  uint64_t seed = 0;

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  const ImagePatch& geometry_of_first() const { return samples.front().patch; }
  void validate_uniform_geometry() const;
  size_t count_label(int label) const;
};

struct PatchGeometry {
  int height = 96, width = 96, channels = 3;
};

// Centered label window. Scales as round(side/3), nudged up by one when the
// remainder is odd so the window stays concentric and dihedral transforms map
// it onto itself (96 -> 32, matching the 32/96 reference proportion).
int center_window_size(int side);
struct WindowBox {
  int y0, x0, h, w;  // inclusive start, extent
};
WindowBox center_window(int height, int width);

// Colors of the synthetic texture. Blob chroma is separated from every
// possible background value by a wide margin, so "is this a blob pixel" is
// decidable per pixel; tests exploit that to re-derive labels independently.
struct SyntheticPalette {
  // background = base * luminance + per-channel offset + fine noise
  static constexpr float base_rgb[3] = {0.78f, 0.62f, 0.72f};
  static constexpr float lum_lo = 0.55f, lum_hi = 0.95f;
  static constexpr float offset_amp = 0.06f;
  static constexpr float noise_amp = 0.02f;
  static constexpr float blob_rgb[3] = {0.85f, 0.15f, 0.75f};
  static constexpr float blob_noise = 0.05f;
  // 1-channel variant
  static constexpr float base_gray = 0.70f;
  static constexpr float blob_gray_lo = 0.04f, blob_gray_hi = 0.12f;
};

// Deterministic synthetic patches: textured background; positives carry a
// high-contrast blob overlapping the center window (plus sometimes an outer
// distractor), negatives carry either no blob or only outer blobs. Identical
// arguments give bit-identical datasets.
LabeledDataset generate_synthetic_dataset(int n, uint64_t seed, double positive_fraction,
                                          PatchGeometry geometry = PatchGeometry{});

// Loads image files listed in a manifest (one `relative_path<TAB>label` per
// line, labels literal 0/1, '#' lines ignored, paths relative to `dir`).
// Sample order follows the manifest.
LabeledDataset load_dataset(const std::filesystem::path& dir,
                            const std::string& manifest_name = "manifest.tsv");

// Writes patches as PNM files plus a manifest in the format load_dataset
// reads. Pixel values are quantized to 8 bits.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& dir);

// Deterministic disjoint split; |val| = round(val_fraction * n).
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double val_fraction,
                                                uint64_t seed);

// One of the 8 symmetries of the square: bit 2 flips horizontally first,
// bits 0..1 rotate 90° clockwise that many times.
ImagePatch apply_dihedral(const ImagePatch& patch, int transform);

// Random dihedral transform; label is invariant because every such transform
// maps the centered window onto itself. Requires a square patch.
LabeledSample augment(const LabeledSample& sample, Rng& rng);

}  // namespace hcae
