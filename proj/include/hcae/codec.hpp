// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hcae/autoencoder.hpp"
#include "hcae/errors.hpp"

// Standalone encoder/decoder artifacts split from a trained autoencoder, and
// the `.hcl` compressed-latent file format:
//
//   offset  size  field
//   0       4     magic "HCAE"
//   4       2     version (u16 LE, currently 1)
//   6       2     latent h (u16 LE)
//   8       2     latent w
//   10      2     latent c
//   12      1     quantization mode (0 = float32, 1 = 8-bit affine/channel)
//   13      ...   mode 0: h*w*c float32 LE activations (row-major h,w,c)
//                 mode 1: c float32 scales, c float32 offsets,
//                         then h*w*c bytes
//   end     4     CRC-32 (u16/u32 fields LE) over header+payload
//
// Mode-0 storage is bit-exact. Mode-1 per-channel affine quantization has
// worst-case error (channel max - channel min)/255/2 plus rounding.

namespace hcae {

enum class CodecRole { encoder, decoder };

template <typename T>
struct CodecArtifact {
  CodecRole role = CodecRole::encoder;
  CompressionConfig config;
  uint64_t seed = 0;
  nn::Sequential<T> net;      // the relevant half of the autoencoder
  std::string checksum;       // content hash over the parameter payloads

  std::vector<const nn::ParamGroup<T>*> params() const { return net.params(); }
};

// Writes <dir>/encoder and <dir>/decoder checkpoint directories. The two
// halves recompose bit-exactly into the original forward pass.
template <typename T>
std::pair<CodecArtifact<T>, CodecArtifact<T>> export_split(const Autoencoder<T>& ae,
                                                           const std::filesystem::path& dir);

template <typename T>
CodecArtifact<T> load_codec_artifact(const std::filesystem::path& dir);

// Artifact forward passes (inference). Role-checked.
template <typename T>
LatentCode artifact_encode(const CodecArtifact<T>& enc, const ImagePatch& patch);
template <typename T>
ImagePatch artifact_decode(const CodecArtifact<T>& dec, const LatentCode& code);

// Structured latent-file errors, one category per failure class.
class LatentFileError : public IoError {
 public:
  enum class Kind { bad_magic, bad_version, truncated, bad_checksum, bad_shape };
  LatentFileError(Kind kind, const std::string& msg) : IoError(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void write_latent_file(const std::filesystem::path& path, const LatentCode& code,
                       Quantization mode);
// expected_* validate the stored dims against the decoder config.
LatentCode read_latent_file(const std::filesystem::path& path, int expected_h, int expected_w,
                            int expected_c, const std::string& config_name);
// Exact byte size of a latent file per the format table above.
uint64_t latent_file_size(int h, int w, int c, Quantization mode);

struct CompressSummary {
  uint64_t bytes_in = 0;   // 8-bit source pixel payload: H*W*C
  uint64_t bytes_out = 0;  // latent file size
  double dimensionality_ratio = 0.0;
  double byte_ratio = 0.0;  // bytes_out / bytes_in; honest about expansion
};

template <typename T>
CompressSummary compress_file(const CodecArtifact<T>& encoder, const std::filesystem::path& image_in,
                              const std::filesystem::path& latent_out, Quantization mode);

struct DecompressSummary {
  uint64_t bytes_in = 0;
  uint64_t bytes_out = 0;
};

template <typename T>
DecompressSummary decompress_file(const CodecArtifact<T>& decoder,
                                  const std::filesystem::path& latent_in,
                                  const std::filesystem::path& image_out);

}  // namespace hcae
