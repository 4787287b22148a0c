// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "hcae/datasets.hpp"

// Binary PNM images: P6 (RGB) for 3-channel patches, P5 (grayscale) for
// 1-channel. Reading normalizes by the file's maxval (so 8-bit 255 -> 1.0);
// writing quantizes with round(v * 255).

namespace hcae {

ImagePatch read_image(const std::filesystem::path& path);
void write_image_8bit(const std::filesystem::path& path, const ImagePatch& patch);

}  // namespace hcae
