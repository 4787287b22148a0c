// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include "hcae/autoencoder.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "hcae/errors.hpp"
#include "hcae/nn/batching.hpp"
#include "hcae/nn/checkpoint.hpp"
#include "hcae/nn/loss.hpp"
#include "hcae/nn/optimizer.hpp"

namespace hcae {

using nn::Phase;
using nlohmann::json;

CompressionConfig CompressionConfig::preset(const std::string& id) {
  CompressionConfig c;
  c.name = id;
  if (id == "33")
    c.block_widths = {12, 24, 48, 256};
  else if (id == "66")
    c.block_widths = {12, 24, 128};
  else if (id == "83")
    c.block_widths = {12, 24, 160};
  else
    throw std::invalid_argument("unknown compression preset '" + id + "'");
  return c;
}

const std::vector<std::string>& CompressionConfig::preset_names() {
  static const std::vector<std::string> names = {"33", "66", "83"};
  return names;
}

void CompressionConfig::validate() const {
  if (input_h <= 0 || input_w <= 0 || input_c <= 0)
    throw std::invalid_argument("CompressionConfig: input dims must be positive");
  if (block_widths.empty())
    throw std::invalid_argument("CompressionConfig: at least one encoder block required");
  for (int w : block_widths)
    if (w <= 0) throw std::invalid_argument("CompressionConfig: block widths must be positive");
  const int b = blocks();
  if (b >= 31 || (input_h % (1 << b)) != 0 || (input_w % (1 << b)) != 0)
    throw std::invalid_argument("CompressionConfig: spatial dims must divide exactly by 2^" +
                                std::to_string(b) + " (got " + std::to_string(input_h) + "x" +
                                std::to_string(input_w) + ")");
  if (latent_h() <= 0 || latent_w() <= 0)
    throw std::invalid_argument("CompressionConfig: latent spatial dims would be empty");
}

std::vector<int> CompressionConfig::decoder_widths() const {
  // Reverse of the encoder widths shifted by one, ending at the first width:
  // encoder [w0..wB-1] with latent wB-1 -> decoder [wB-2, .., w0, w0].
  std::vector<int> out;
  for (int i = blocks() - 2; i >= 0; --i) out.push_back(block_widths[static_cast<size_t>(i)]);
  out.push_back(block_widths.front());
  return out;
}

json CompressionConfig::to_json() const {
  return json{{"name", name},
              {"input", {input_h, input_w, input_c}},
              {"block_widths", block_widths}};
}

CompressionConfig CompressionConfig::from_json(const json& j) {
  CompressionConfig c;
  c.name = j.at("name").get<std::string>();
  const auto in = j.at("input").get<std::vector<int>>();
  if (in.size() != 3) throw std::invalid_argument("CompressionConfig: bad input triple");
  c.input_h = in[0];
  c.input_w = in[1];
  c.input_c = in[2];
  c.block_widths = j.at("block_widths").get<std::vector<int>>();
  c.validate();
  return c;
}

template <typename T>
std::vector<nn::ParamGroup<T>*> Autoencoder<T>::all_params() {
  auto out = encoder.params();
  for (auto* g : decoder.params()) out.push_back(g);
  return out;
}

template <typename T>
std::vector<const nn::ParamGroup<T>*> Autoencoder<T>::all_params() const {
  std::vector<const nn::ParamGroup<T>*> out;
  for (auto* g : encoder.params()) out.push_back(g);
  for (auto* g : decoder.params()) out.push_back(g);
  return out;
}

template <typename T>
Autoencoder<T> build_autoencoder(const CompressionConfig& config, uint64_t seed) {
  config.validate();
  Autoencoder<T> ae;
  ae.config = config;
  ae.seed = seed;

  uint64_t layer_idx = 0;
  auto layer_rng = [&]() { return Rng(derive_seed(seed, layer_idx++)); };

  int ch = config.input_c;
  for (int b = 0; b < config.blocks(); ++b) {
    const std::string tag = "enc" + std::to_string(b + 1);
    const int width = config.block_widths[static_cast<size_t>(b)];
    Rng r = layer_rng();
    ae.encoder.add(std::make_unique<nn::Conv2D<T>>(tag + ".conv", ch, width, 3, r));
    ae.encoder.add(std::make_unique<nn::BatchNorm<T>>(tag + ".bn", width));
    ae.encoder.add(std::make_unique<nn::ReLU<T>>(tag + ".relu"));
    ae.encoder.add(std::make_unique<nn::MaxPool2x2<T>>(tag + ".pool"));
    ch = width;
  }

  const auto dec_widths = config.decoder_widths();
  for (size_t b = 0; b < dec_widths.size(); ++b) {
    const std::string tag = "dec" + std::to_string(b + 1);
    const int width = dec_widths[b];
    Rng r = layer_rng();
    ae.decoder.add(std::make_unique<nn::Conv2D<T>>(tag + ".conv", ch, width, 3, r));
    ae.decoder.add(std::make_unique<nn::BatchNorm<T>>(tag + ".bn", width));
    ae.decoder.add(std::make_unique<nn::ReLU<T>>(tag + ".relu"));
    ae.decoder.add(std::make_unique<nn::UpsampleNearest2x2<T>>(tag + ".up"));
    ch = width;
  }
  Rng r = layer_rng();
  ae.decoder.add(std::make_unique<nn::Conv2D<T>>("out.conv", ch, config.input_c, 3, r));
  ae.decoder.add(std::make_unique<nn::Sigmoid<T>>("out.sigmoid"));
  return ae;
}

template <typename T>
LatentCode encode(const Autoencoder<T>& ae, const ImagePatch& patch) {
  if (patch.height != ae.config.input_h || patch.width != ae.config.input_w ||
      patch.channels != ae.config.input_c)
    throw std::invalid_argument("encode: patch geometry does not match config input shape");
  Tensor<T> x = nn::patch_to_batch<T>(patch);
  // Inference pass is const over the model.
  auto& enc = const_cast<nn::Sequential<T>&>(ae.encoder);
  Tensor<T> z = enc.forward(x, Phase::eval, false);
  LatentCode code;
  code.config_name = ae.config.name;
  code.activations = Tensor<float>({ae.config.latent_h(), ae.config.latent_w(),
                                    ae.config.latent_c()});
  for (int64_t i = 0; i < z.size(); ++i) code.activations[i] = static_cast<float>(z[i]);
  return code;
}

template <typename T>
ImagePatch decode(const Autoencoder<T>& ae, const LatentCode& code) {
  const std::vector<int> want{ae.config.latent_h(), ae.config.latent_w(), ae.config.latent_c()};
  if (code.activations.shape != want)
    throw std::invalid_argument("decode: latent shape " + code.activations.shape_str() +
                                " does not match config latent shape");
  Tensor<T> z({1, want[0], want[1], want[2]});
  for (int64_t i = 0; i < z.size(); ++i) z[i] = T(code.activations[i]);
  auto& dec = const_cast<nn::Sequential<T>&>(ae.decoder);
  Tensor<T> y = dec.forward(z, Phase::eval, false);
  ImagePatch out(ae.config.input_h, ae.config.input_w, ae.config.input_c);
  for (size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = static_cast<float>(y[static_cast<int64_t>(i)]);
  return out;
}

template <typename T>
Tensor<T> reconstruct_batch(Autoencoder<T>& ae, const Tensor<T>& x, Phase phase, bool record) {
  Tensor<T> z = ae.encoder.forward(x, phase, record);
  return ae.decoder.forward(z, phase, record);
}

template <typename T>
double reconstruction_mse(Autoencoder<T>& ae, const LabeledDataset& ds, int batch_size) {
  double acc = 0.0;
  std::vector<size_t> idx;
  for (size_t start = 0; start < ds.size(); start += static_cast<size_t>(batch_size)) {
    idx.clear();
    for (size_t i = start; i < std::min(ds.size(), start + static_cast<size_t>(batch_size)); ++i)
      idx.push_back(i);
    Tensor<T> x = nn::assemble_batch<T>(ds, idx);
    Tensor<T> y = reconstruct_batch(ae, x, Phase::eval, false);
    acc += nn::mse_loss<T>(y, x, nullptr) * static_cast<double>(idx.size());
  }
  return acc / static_cast<double>(ds.size());
}

template <typename T>
nn::TrainingHistory train_autoencoder(Autoencoder<T>& ae, const LabeledDataset& train,
                                      const LabeledDataset& val, const AeTrainOptions& opts) {
  if (opts.epochs < 1) throw std::invalid_argument("train_autoencoder: epochs must be >= 1");
  if (opts.batch_size < 1) throw std::invalid_argument("train_autoencoder: batch_size must be >= 1");
  if (!(opts.lr > 0)) throw std::invalid_argument("train_autoencoder: lr must be positive");
  if (train.empty() || val.empty())
    throw std::invalid_argument("train_autoencoder: empty dataset");

  auto groups = ae.all_params();
  nn::Adam<T> opt(groups, static_cast<T>(opts.lr));

  nn::TrainingHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor<T>> best_snapshot;

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng(derive_seed(opts.seed, static_cast<uint64_t>(epoch)));
    const auto batches = nn::make_batches(nn::shuffled_indices(train.size(), shuffle_rng),
                                          static_cast<size_t>(opts.batch_size));
    double train_acc = 0.0;
    for (const auto& idx : batches) {
      Tensor<T> x = nn::assemble_batch<T>(train, idx);
      Tensor<T> y = reconstruct_batch(ae, x, Phase::train, true);
      Tensor<T> grad;
      const double loss = nn::mse_loss(y, x, &grad);
      if (!std::isfinite(loss))
        throw NumericalError("train_autoencoder: non-finite loss at epoch " +
                             std::to_string(epoch));
      train_acc += loss * static_cast<double>(idx.size());
      opt.zero_grads();
      Tensor<T> dz = ae.decoder.backward(grad);
      ae.encoder.backward(dz);
      opt.step();
    }

    nn::EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_acc / static_cast<double>(train.size());
    rec.val_loss = reconstruction_mse(ae, val, opts.batch_size);
    if (!std::isfinite(rec.val_loss))
      throw NumericalError("train_autoencoder: non-finite validation loss at epoch " +
                           std::to_string(epoch));
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(rec);

    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best_snapshot = nn::snapshot_params(groups);
      history.best_epoch = epoch;
    }
  }
  if (!best_snapshot.empty()) nn::restore_params(groups, best_snapshot);
  ae.encoder.clear_tape();
  ae.decoder.clear_tape();
  return history;
}

template <typename T>
void save_autoencoder(const Autoencoder<T>& ae, const std::filesystem::path& dir,
                      const json& extra) {
  nn::CheckpointMeta meta;
  meta.kind = "autoencoder";
  meta.seed = ae.seed;
  meta.arch = ae.config.to_json();
  meta.extra = extra;
  nn::save_checkpoint<T>(dir, ae.all_params(), meta);
}

template <typename T>
Autoencoder<T> load_autoencoder(const std::filesystem::path& dir) {
  const auto meta = nn::read_checkpoint_meta(dir);
  if (meta.kind != "autoencoder")
    throw IoError("checkpoint at " + dir.string() + " is '" + meta.kind +
                  "', expected 'autoencoder'");
  Autoencoder<T> ae = build_autoencoder<T>(CompressionConfig::from_json(meta.arch), meta.seed);
  nn::load_checkpoint_params<T>(dir, ae.all_params());
  return ae;
}

#define HCAE_INSTANTIATE_AE(T)                                                              \
  template struct Autoencoder<T>;                                                           \
  template Autoencoder<T> build_autoencoder<T>(const CompressionConfig&, uint64_t);         \
  template LatentCode encode<T>(const Autoencoder<T>&, const ImagePatch&);                  \
  template ImagePatch decode<T>(const Autoencoder<T>&, const LatentCode&);                  \
  template Tensor<T> reconstruct_batch<T>(Autoencoder<T>&, const Tensor<T>&, Phase, bool);  \
  template double reconstruction_mse<T>(Autoencoder<T>&, const LabeledDataset&, int);       \
  template nn::TrainingHistory train_autoencoder<T>(Autoencoder<T>&, const LabeledDataset&, \
                                                    const LabeledDataset&,                  \
                                                    const AeTrainOptions&);                 \
  template void save_autoencoder<T>(const Autoencoder<T>&, const std::filesystem::path&,    \
                                    const json&);                                           \
  template Autoencoder<T> load_autoencoder<T>(const std::filesystem::path&);

HCAE_INSTANTIATE_AE(float)
HCAE_INSTANTIATE_AE(double)

#undef HCAE_INSTANTIATE_AE

}  // namespace hcae
