// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcae/nn/layers.hpp"

// Checkpoint directory layout:
//   <dir>/manifest.json   kind, dtype, seed, arch, extra, ordered group table
//   <dir>/<group-id>.bin  raw little-endian values, one file per group
// Reload is bit-exact: payloads are the in-memory bytes.

namespace hcae::nn {

struct CheckpointMeta {
  std::string kind;   // "autoencoder" | "classifier" | "codec-encoder" | ...
  std::string dtype;  // "f32" | "f64"
  uint64_t seed = 0;
  nlohmann::json arch = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
};

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == sizeof(float) ? "f32" : "f64";
}

template <typename T>
void save_checkpoint(const std::filesystem::path& dir,
                     const std::vector<const ParamGroup<T>*>& groups, CheckpointMeta meta);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

// Loads values into existing groups; every group must be present in the
// manifest with matching shape and dtype, and its trainable flag is restored.
template <typename T>
void load_checkpoint_params(const std::filesystem::path& dir,
                            const std::vector<ParamGroup<T>*>& groups);

// FNV-1a over all parameter payload bytes in manifest order. Stable content
// fingerprint of what the checkpoint stores.
std::string checkpoint_param_hash(const std::filesystem::path& dir);

}  // namespace hcae::nn
