// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include "hcae/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hcae/errors.hpp"
#include "hcae/image_io.hpp"

namespace hcae {

namespace fs = std::filesystem;

void ImagePatch::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0)
    throw std::invalid_argument("ImagePatch: dimensions must be positive");
  if (pixels.size() != static_cast<size_t>(height) * width * channels)
    throw std::invalid_argument("ImagePatch: pixel count does not match geometry");
  for (float v : pixels)
    if (!(v >= 0.0f && v <= 1.0f))
      throw std::invalid_argument("ImagePatch: pixel value outside [0,1]");
}

void LabeledDataset::validate_uniform_geometry() const {
  if (samples.empty()) return;
  const ImagePatch& first = samples.front().patch;
  for (const auto& s : samples)
    if (!s.patch.same_geometry(first))
      throw std::invalid_argument("LabeledDataset: mixed patch geometries");
}

size_t LabeledDataset::count_label(int label) const {
  size_t n = 0;
  for (const auto& s : samples) n += (s.label == label) ? 1 : 0;
  return n;
}

int center_window_size(int side) {
  int w = static_cast<int>(std::lround(side / 3.0));
  if (w < 1) w = 1;
  if ((side - w) % 2 != 0) ++w;  // keep the window concentric
  return std::min(w, side);
}

WindowBox center_window(int height, int width) {
  const int wh = center_window_size(height);
  const int ww = center_window_size(width);
  return WindowBox{(height - wh) / 2, (width - ww) / 2, wh, ww};
}

namespace {

float clamp01(double v) { return static_cast<float>(std::min(1.0, std::max(0.0, v))); }

// Smooth background: bilinear interpolation of a coarse random grid, plus
// per-pixel fine noise.
void draw_background(ImagePatch& p, Rng& rng) {
  const int side = std::min(p.height, p.width);
  const int grid = std::max(3, std::min(9, (side + 11) / 12));
  std::vector<double> lum(static_cast<size_t>(grid) * grid);
  for (auto& v : lum) v = rng.uniform(SyntheticPalette::lum_lo, SyntheticPalette::lum_hi);
  std::vector<double> off(static_cast<size_t>(grid) * grid * p.channels);
  for (auto& v : off) v = rng.uniform(-SyntheticPalette::offset_amp, SyntheticPalette::offset_amp);

  auto bilerp = [&](const std::vector<double>& f, int plane, double gy, double gx) {
    const int y0 = std::min(static_cast<int>(gy), grid - 2);
    const int x0 = std::min(static_cast<int>(gx), grid - 2);
    const double ty = gy - y0, tx = gx - x0;
    const auto idx = [&](int yy, int xx) {
      return (static_cast<size_t>(yy) * grid + xx) * (plane >= 0 ? p.channels : 1) +
             (plane >= 0 ? plane : 0);
    };
    const double a = f[idx(y0, x0)] * (1 - tx) + f[idx(y0, x0 + 1)] * tx;
    const double b = f[idx(y0 + 1, x0)] * (1 - tx) + f[idx(y0 + 1, x0 + 1)] * tx;
    return a * (1 - ty) + b * ty;
  };

  const double sy = p.height > 1 ? double(grid - 1) / (p.height - 1) : 0.0;
  const double sx = p.width > 1 ? double(grid - 1) / (p.width - 1) : 0.0;
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x) {
      const double l = bilerp(lum, -1, y * sy, x * sx);
      for (int c = 0; c < p.channels; ++c) {
        const double base =
            p.channels == 3 ? SyntheticPalette::base_rgb[c] : SyntheticPalette::base_gray;
        const double o = bilerp(off, c, y * sy, x * sx);
        const double noise = rng.uniform(-SyntheticPalette::noise_amp, SyntheticPalette::noise_amp);
        p.at(y, x, c) = clamp01(base * l + o + noise);
      }
    }
}

struct Ellipse {
  double cy, cx, a, b, theta;
  double rmax() const { return std::max(a, b); }
};

void draw_ellipse(ImagePatch& p, const Ellipse& e, Rng& rng) {
  const double ct = std::cos(e.theta), st = std::sin(e.theta);
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.rmax())));
  const int y1 = std::min(p.height - 1, static_cast<int>(std::ceil(e.cy + e.rmax())));
  const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.rmax())));
  const int x1 = std::min(p.width - 1, static_cast<int>(std::ceil(e.cx + e.rmax())));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dy = y - e.cy, dx = x - e.cx;
      const double u = ct * dx + st * dy;
      const double v = -st * dx + ct * dy;
      if ((u / e.a) * (u / e.a) + (v / e.b) * (v / e.b) > 1.0) continue;
      if (p.channels == 3) {
        for (int c = 0; c < 3; ++c)
          p.at(y, x, c) = clamp01(SyntheticPalette::blob_rgb[c] +
                                  rng.uniform(-SyntheticPalette::blob_noise,
                                              SyntheticPalette::blob_noise));
      } else {
        p.at(y, x, 0) = clamp01(
            rng.uniform(SyntheticPalette::blob_gray_lo, SyntheticPalette::blob_gray_hi));
      }
    }
}

Ellipse random_ellipse_axes(const ImagePatch& p, Rng& rng) {
  const int side = std::min(p.height, p.width);
  const double lo = std::max(1.5, 0.06 * side);
  const double hi = std::max(2.5, 0.13 * side);
  Ellipse e;
  e.a = rng.uniform(lo, hi);
  e.b = rng.uniform(lo, hi);
  e.theta = rng.uniform(0.0, 3.14159265358979323846);
  return e;
}

// A blob whose integer bounding box is disjoint from the center window.
// Returns false when no placement was found (the sample simply gets fewer
// blobs, which keeps it a valid negative).
bool try_outer_ellipse(ImagePatch& p, const WindowBox& wb, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Ellipse e = random_ellipse_axes(p, rng);
    e.cy = rng.uniform(0.0, p.height);
    e.cx = rng.uniform(0.0, p.width);
    const int by0 = static_cast<int>(std::floor(e.cy - e.rmax()));
    const int by1 = static_cast<int>(std::ceil(e.cy + e.rmax()));
    const int bx0 = static_cast<int>(std::floor(e.cx - e.rmax()));
    const int bx1 = static_cast<int>(std::ceil(e.cx + e.rmax()));
    const bool disjoint = by1 < wb.y0 || by0 > wb.y0 + wb.h - 1 || bx1 < wb.x0 ||
                          bx0 > wb.x0 + wb.w - 1;
    if (!disjoint) continue;
    draw_ellipse(p, e, rng);
    return true;
  }
  return false;
}

LabeledSample make_sample(int label, const PatchGeometry& g, Rng& rng) {
  LabeledSample s;
  s.label = label;
  s.patch = ImagePatch(g.height, g.width, g.channels);
  draw_background(s.patch, rng);
  const WindowBox wb = center_window(g.height, g.width);
  if (label == 1) {
    Ellipse e = random_ellipse_axes(s.patch, rng);
    // Center inside the window (inset one pixel) guarantees blob pixels in it.
    e.cy = rng.uniform(wb.y0 + 1.0, wb.y0 + wb.h - 1.0);
    e.cx = rng.uniform(wb.x0 + 1.0, wb.x0 + wb.w - 1.0);
    draw_ellipse(s.patch, e, rng);
    if (rng.coin(0.5)) try_outer_ellipse(s.patch, wb, rng);
  } else {
    if (rng.coin(0.7)) {
      const int blobs = 1 + (rng.coin(0.5) ? 1 : 0);
      for (int b = 0; b < blobs; ++b) try_outer_ellipse(s.patch, wb, rng);
    }
  }
  return s;
}

}  // namespace

LabeledDataset generate_synthetic_dataset(int n, uint64_t seed, double positive_fraction,
                                          PatchGeometry geometry) {
  if (n < 1) throw std::invalid_argument("generate_synthetic_dataset: n must be >= 1");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
    throw std::invalid_argument("generate_synthetic_dataset: positive_fraction must be in (0,1)");
  if (geometry.channels != 1 && geometry.channels != 3)
    throw std::invalid_argument("generate_synthetic_dataset: channels must be 1 or 3");
  if (std::min(geometry.height, geometry.width) < 8)
    throw std::invalid_argument(
        "generate_synthetic_dataset: geometry too small; the center window would leave no outer "
        "region (need side >= 8)");
  const WindowBox wb = center_window(geometry.height, geometry.width);
  if (wb.h >= geometry.height || wb.w >= geometry.width)
    throw std::invalid_argument(
        "generate_synthetic_dataset: center window covers the whole patch");

  const int n_pos = static_cast<int>(std::lround(positive_fraction * n));
  std::vector<int> labels(static_cast<size_t>(n), 0);
  std::fill(labels.begin(), labels.begin() + n_pos, 1);
  Rng shuffle_rng(derive_seed(seed, 1));
  for (size_t i = labels.size(); i > 1; --i)
    std::swap(labels[i - 1], labels[shuffle_rng.next_below(i)]);

  LabeledDataset ds;
  ds.seed = seed;
  ds.samples.resize(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, 1000 + static_cast<uint64_t>(i)));
    ds.samples[static_cast<size_t>(i)] = make_sample(labels[static_cast<size_t>(i)], geometry, rng);
  }
  return ds;
}

LabeledDataset load_dataset(const fs::path& dir, const std::string& manifest_name) {
  const fs::path mpath = dir / manifest_name;
  std::ifstream in(mpath);
  if (!in) throw IoError("cannot open manifest: " + mpath.string());

  LabeledDataset ds;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw IoError("manifest row " + std::to_string(row) + ": expected <path>\\t<label>");
    const std::string rel = line.substr(0, tab);
    const std::string label_str = line.substr(tab + 1);
    int label;
    if (label_str == "0")
      label = 0;
    else if (label_str == "1")
      label = 1;
    else
      throw IoError("manifest row " + std::to_string(row) + ": non-binary label '" + label_str +
                    "'");
    ImagePatch patch;
    try {
      patch = read_image(dir / rel);
    } catch (const IoError& e) {
      throw IoError("manifest row " + std::to_string(row) + " (" + rel + "): " + e.what());
    }
    if (!ds.samples.empty() && !patch.same_geometry(ds.samples.front().patch))
      throw IoError("manifest row " + std::to_string(row) + " (" + rel +
                    "): geometry differs from the first sample");
    ds.samples.push_back(LabeledSample{std::move(patch), label});
  }
  return ds;
}

void save_dataset(const LabeledDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  const char* ext = (!ds.samples.empty() && ds.samples.front().patch.channels == 1) ? ".pgm"
                                                                                    : ".ppm";
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw IoError("cannot write manifest in " + dir.string());
  manifest << "# generated dataset, seed " << ds.seed << "\n";
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "patch_%05zu%s", i, ext);
    write_image_8bit(dir / name, ds.samples[i].patch);
    manifest << name << "\t" << ds.samples[i].label << "\n";
  }
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double val_fraction,
                                                uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw std::invalid_argument("split: val_fraction must be in (0,1)");
  const size_t n = ds.size();
  const size_t n_val = static_cast<size_t>(std::lround(val_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val == n)
    throw std::invalid_argument("split: requested fraction yields an empty partition");

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 2));
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);

  LabeledDataset val, train;
  val.seed = train.seed = seed;
  val.samples.reserve(n_val);
  train.samples.reserve(n - n_val);
  for (size_t i = 0; i < n; ++i)
    (i < n_val ? val : train).samples.push_back(ds.samples[order[i]]);
  return {std::move(train), std::move(val)};
}

namespace {

ImagePatch flip_horizontal(const ImagePatch& p) {
  ImagePatch out(p.height, p.width, p.channels);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x)
      for (int c = 0; c < p.channels; ++c) out.at(y, x, c) = p.at(y, p.width - 1 - x, c);
  return out;
}

// 90 degrees clockwise; requires a square patch.
ImagePatch rotate_cw(const ImagePatch& p) {
  ImagePatch out(p.width, p.height, p.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < p.channels; ++c) out.at(y, x, c) = p.at(p.height - 1 - x, y, c);
  return out;
}

}  // namespace

ImagePatch apply_dihedral(const ImagePatch& patch, int transform) {
  if (transform < 0 || transform > 7)
    throw std::invalid_argument("apply_dihedral: transform must be in [0,8)");
  if ((transform & 3) != 0 && patch.height != patch.width)
    throw std::invalid_argument("apply_dihedral: rotation requires a square patch");
  ImagePatch out = (transform & 4) ? flip_horizontal(patch) : patch;
  for (int r = 0; r < (transform & 3); ++r) out = rotate_cw(out);
  return out;
}

LabeledSample augment(const LabeledSample& sample, Rng& rng) {
  if (sample.patch.height != sample.patch.width)
    throw std::invalid_argument("augment: requires square patches");
  const int t = static_cast<int>(rng.next_below(8));
  return LabeledSample{apply_dihedral(sample.patch, t), sample.label};
}

}  // namespace hcae
