// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace hcae {

// FNV-1a 64-bit. Used for content fingerprints in manifests; not
// cryptographic.
class Fnv1a64 {
 public:
  void update(const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ull;
    }
  }
  uint64_t digest() const { return h_; }
  std::string hex() const;

 private:
  uint64_t h_ = 0xcbf29ce484222325ull;
};

uint64_t fnv1a64(const void* data, size_t n);
std::string fnv1a64_hex(const void* data, size_t n);

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320). Used by the latent file
// format for corruption detection.
uint32_t crc32(const void* data, size_t n, uint32_t seed = 0);

}  // namespace hcae
