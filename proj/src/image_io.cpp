// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include "hcae/image_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

#include "hcae/errors.hpp"

namespace hcae {

namespace {

// Reads the next whitespace/comment-delimited token of a PNM header.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

}  // namespace

ImagePatch read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());

  const std::string magic = next_token(in);
  int channels;
  if (magic == "P6")
    channels = 3;
  else if (magic == "P5")
    channels = 1;
  else
    throw IoError("unsupported image format '" + magic + "' in " + path.string());

  const int width = std::stoi(next_token(in));
  const int height = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval >= 65536)
    throw IoError("bad PNM header in " + path.string());
  // next_token consumed exactly one whitespace byte after maxval.

  const size_t count = static_cast<size_t>(width) * height * channels;
  const int bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(count * static_cast<size_t>(bytes_per));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError("truncated image data in " + path.string());

  ImagePatch patch(height, width, channels);
  const float inv = 1.0f / static_cast<float>(maxval);
  for (size_t i = 0; i < count; ++i) {
    unsigned v = bytes_per == 1 ? raw[i]
                                : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    patch.pixels[i] = static_cast<float>(v) * inv;
  }
  return patch;
}

void write_image_8bit(const std::filesystem::path& path, const ImagePatch& patch) {
  if (patch.channels != 1 && patch.channels != 3)
    throw IoError("PNM output supports 1 or 3 channels, got " + std::to_string(patch.channels));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open image for writing: " + path.string());
  out << (patch.channels == 3 ? "P6" : "P5") << "\n"
      << patch.width << " " << patch.height << "\n255\n";
  std::vector<unsigned char> raw(patch.pixels.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    const float v = std::round(patch.pixels[i] * 255.0f);
    raw[i] = static_cast<unsigned char>(std::min(255.0f, std::max(0.0f, v)));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("image write failed: " + path.string());
}

}  // namespace hcae
