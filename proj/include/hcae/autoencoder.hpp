// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcae/datasets.hpp"
#include "hcae/nn/history.hpp"
#include "hcae/nn/layers.hpp"

namespace hcae {

// Encoder/decoder block layout. Each encoder block halves the spatial dims
// with 2x2 pooling, so the latent is (H/2^B, W/2^B, last width). Presets:
//   "33"  4 blocks, latent 6x6x256 on 96x96x3  (ratio 0.3333)
//   "66"  3 blocks, latent 12x12x128           (ratio 0.6667)
//   "83"  3 blocks, latent 12x12x160           (ratio 0.8333)
struct CompressionConfig {
  std::string name = "custom";
  int input_h = 96, input_w = 96, input_c = 3;
  std::vector<int> block_widths;  // one conv width per encoder block

  static CompressionConfig preset(const std::string& id);
  static const std::vector<std::string>& preset_names();

  void validate() const;  // throws std::invalid_argument
  int blocks() const { return static_cast<int>(block_widths.size()); }
  int latent_h() const { return input_h >> blocks(); }
  int latent_w() const { return input_w >> blocks(); }
  int latent_c() const { return block_widths.back(); }
  int64_t input_elems() const { return int64_t(input_h) * input_w * input_c; }
  int64_t latent_elems() const { return int64_t(latent_h()) * latent_w() * latent_c(); }
  double dimensionality_ratio() const {
    return static_cast<double>(latent_elems()) / static_cast<double>(input_elems());
  }
  // Mirror widths for the decoder blocks (before the final projection conv).
  std::vector<int> decoder_widths() const;

  nlohmann::json to_json() const;
  static CompressionConfig from_json(const nlohmann::json& j);
};

enum class Quantization : uint8_t { none = 0, affine8 = 1 };

// Spatial latent activations plus provenance. Never flattened.
struct LatentCode {
  Tensor<float> activations;  // (h, w, c)
  std::string config_name;
  Quantization quantization = Quantization::none;
  std::vector<float> q_scale, q_offset;  // per channel, affine8 only
};

template <typename T>
struct Autoencoder {
  CompressionConfig config;
  uint64_t seed = 0;
  nn::Sequential<T> encoder;
  nn::Sequential<T> decoder;

  std::vector<nn::ParamGroup<T>*> all_params();
  std::vector<const nn::ParamGroup<T>*> all_params() const;
};

// Encoder blocks: [3x3 conv(same) -> batch norm -> ReLU -> 2x2 max pool].
// Decoder mirrors with up-sampling and ends in a 3x3 conv + sigmoid back to
// the input channel count. Deterministic init from the seed.
template <typename T>
Autoencoder<T> build_autoencoder(const CompressionConfig& config, uint64_t seed);

// Inference-mode single-patch mappings (deterministic, concurrency-safe).
template <typename T>
LatentCode encode(const Autoencoder<T>& ae, const ImagePatch& patch);
template <typename T>
ImagePatch decode(const Autoencoder<T>& ae, const LatentCode& code);

struct AeTrainOptions {
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-3;
  uint64_t seed = 0;
};

// Unsupervised MSE reconstruction training with Adam; labels are ignored.
// Keeps the best-validation-loss parameters. Throws NumericalError if the
// loss goes non-finite (reporting the epoch).
template <typename T>
nn::TrainingHistory train_autoencoder(Autoencoder<T>& ae, const LabeledDataset& train,
                                      const LabeledDataset& val, const AeTrainOptions& opts);

// Validation-set mean reconstruction MSE (inference mode).
template <typename T>
double reconstruction_mse(Autoencoder<T>& ae, const LabeledDataset& ds, int batch_size = 32);

// Batched inference reconstruction: decode(encode(x)).
template <typename T>
Tensor<T> reconstruct_batch(Autoencoder<T>& ae, const Tensor<T>& x, nn::Phase phase,
                            bool record);

// Checkpoint I/O (directory format shared by all model kinds).
template <typename T>
void save_autoencoder(const Autoencoder<T>& ae, const std::filesystem::path& dir,
                      const nlohmann::json& extra = nlohmann::json::object());
template <typename T>
Autoencoder<T> load_autoencoder(const std::filesystem::path& dir);

}  // namespace hcae
