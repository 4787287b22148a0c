// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include "hcae/codec.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "hcae/hash.hpp"
#include "hcae/image_io.hpp"
#include "hcae/nn/batching.hpp"
#include "hcae/nn/checkpoint.hpp"

namespace hcae {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'H', 'C', 'A', 'E'};
constexpr uint16_t kVersion = 1;

const char* role_name(CodecRole role) {
  return role == CodecRole::encoder ? "encoder" : "decoder";
}

template <typename T>
std::string artifact_checksum(const std::vector<const nn::ParamGroup<T>*>& groups) {
  Fnv1a64 h;
  for (const auto* g : groups) {
    h.update(g->id.data(), g->id.size());
    h.update(g->value.ptr(), sizeof(T) * g->value.data.size());
  }
  return h.hex();
}

// Rebuild the right half of an autoencoder with matching layer names, then
// move it out. Initialization values do not matter; they are overwritten.
template <typename T>
nn::Sequential<T> build_half(const CompressionConfig& config, uint64_t seed, CodecRole role) {
  Autoencoder<T> ae = build_autoencoder<T>(config, seed);
  return role == CodecRole::encoder ? std::move(ae.encoder) : std::move(ae.decoder);
}

void put_u16(std::vector<uint8_t>& buf, uint16_t v) {
  buf.push_back(static_cast<uint8_t>(v & 0xff));
  buf.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<uint8_t>& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

uint16_t get_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }
uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
float get_f32(const uint8_t* p) {
  const uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

uint64_t latent_file_size(int h, int w, int c, Quantization mode) {
  const uint64_t n = uint64_t(h) * w * c;
  const uint64_t header = 13;
  const uint64_t payload =
      mode == Quantization::none ? 4 * n : uint64_t(c) * 8 + n;
  return header + payload + 4;  // + CRC
}

void write_latent_file(const fs::path& path, const LatentCode& code, Quantization mode) {
  const int h = code.activations.dim(0), w = code.activations.dim(1),
            c = code.activations.dim(2);
  if (h > 0xffff || w > 0xffff || c > 0xffff)
    throw std::invalid_argument("write_latent_file: dims exceed the u16 header fields");

  std::vector<uint8_t> buf;
  buf.reserve(static_cast<size_t>(latent_file_size(h, w, c, mode)));
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u16(buf, kVersion);
  put_u16(buf, static_cast<uint16_t>(h));
  put_u16(buf, static_cast<uint16_t>(w));
  put_u16(buf, static_cast<uint16_t>(c));
  buf.push_back(static_cast<uint8_t>(mode));

  const int64_t n = code.activations.size();
  if (mode == Quantization::none) {
    for (int64_t i = 0; i < n; ++i) put_f32(buf, code.activations[i]);
  } else {
    // Per-channel affine: scale = (max-min)/255, offset = min.
    std::vector<float> scale(static_cast<size_t>(c)), offset(static_cast<size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
      float lo = code.activations[ch], hi = code.activations[ch];
      for (int64_t i = ch; i < n; i += c) {
        lo = std::min(lo, code.activations[i]);
        hi = std::max(hi, code.activations[i]);
      }
      offset[static_cast<size_t>(ch)] = lo;
      scale[static_cast<size_t>(ch)] = (hi - lo) / 255.0f;
    }
    for (int ch = 0; ch < c; ++ch) put_f32(buf, scale[static_cast<size_t>(ch)]);
    for (int ch = 0; ch < c; ++ch) put_f32(buf, offset[static_cast<size_t>(ch)]);
    for (int64_t i = 0; i < n; ++i) {
      const int ch = static_cast<int>(i % c);
      const float s = scale[static_cast<size_t>(ch)];
      float q = 0.0f;
      if (s > 0.0f)
        q = std::round((code.activations[i] - offset[static_cast<size_t>(ch)]) / s);
      buf.push_back(static_cast<uint8_t>(std::min(255.0f, std::max(0.0f, q))));
    }
  }

  put_u32(buf, crc32(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write latent file: " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("latent file write failed: " + path.string());
}

LatentCode read_latent_file(const fs::path& path, int expected_h, int expected_w, int expected_c,
                            const std::string& config_name) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open latent file: " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  in.read(reinterpret_cast<char*>(buf.data()), size);
  if (!in) throw IoError("latent file read failed: " + path.string());

  if (buf.size() < 17 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw LatentFileError(LatentFileError::Kind::bad_magic,
                          "not a latent file (bad magic): " + path.string());
  const uint16_t version = get_u16(buf.data() + 4);
  if (version != kVersion)
    throw LatentFileError(LatentFileError::Kind::bad_version,
                          "unsupported latent file version " + std::to_string(version));
  const int h = get_u16(buf.data() + 6);
  const int w = get_u16(buf.data() + 8);
  const int c = get_u16(buf.data() + 10);
  const uint8_t mode_raw = buf[12];
  if (mode_raw > 1)
    throw LatentFileError(LatentFileError::Kind::bad_shape,
                          "unknown quantization mode " + std::to_string(mode_raw));
  const Quantization mode = static_cast<Quantization>(mode_raw);

  const uint64_t want = latent_file_size(h, w, c, mode);
  if (buf.size() != want)
    throw LatentFileError(LatentFileError::Kind::truncated,
                          "latent file length " + std::to_string(buf.size()) + ", expected " +
                              std::to_string(want));

  const uint32_t stored_crc = get_u32(buf.data() + buf.size() - 4);
  if (crc32(buf.data(), buf.size() - 4) != stored_crc)
    throw LatentFileError(LatentFileError::Kind::bad_checksum,
                          "latent file checksum mismatch: " + path.string());

  if (h != expected_h || w != expected_w || c != expected_c)
    throw LatentFileError(LatentFileError::Kind::bad_shape,
                          "latent dims " + std::to_string(h) + "x" + std::to_string(w) + "x" +
                              std::to_string(c) + " do not match the codec config");

  LatentCode code;
  code.config_name = config_name;
  code.quantization = mode;
  code.activations = Tensor<float>({h, w, c});
  const int64_t n = code.activations.size();
  const uint8_t* p = buf.data() + 13;
  if (mode == Quantization::none) {
    for (int64_t i = 0; i < n; ++i, p += 4) code.activations[i] = get_f32(p);
  } else {
    code.q_scale.resize(static_cast<size_t>(c));
    code.q_offset.resize(static_cast<size_t>(c));
    for (int ch = 0; ch < c; ++ch, p += 4) code.q_scale[static_cast<size_t>(ch)] = get_f32(p);
    for (int ch = 0; ch < c; ++ch, p += 4) code.q_offset[static_cast<size_t>(ch)] = get_f32(p);
    for (int64_t i = 0; i < n; ++i, ++p) {
      const int ch = static_cast<int>(i % c);
      code.activations[i] =
          code.q_offset[static_cast<size_t>(ch)] + float(*p) * code.q_scale[static_cast<size_t>(ch)];
    }
  }
  return code;
}

template <typename T>
std::pair<CodecArtifact<T>, CodecArtifact<T>> export_split(const Autoencoder<T>& ae,
                                                           const fs::path& dir) {
  fs::create_directories(dir);
  auto make = [&](CodecRole role) {
    CodecArtifact<T> art;
    art.role = role;
    art.config = ae.config;
    art.seed = ae.seed;
    art.net = build_half<T>(ae.config, ae.seed, role);
    // Copy the trained values over by id.
    const auto& src = role == CodecRole::encoder ? ae.encoder : ae.decoder;
    auto src_groups = src.params();
    for (auto* dst : art.net.params()) {
      const nn::ParamGroup<T>* found = nullptr;
      for (const auto* g : src_groups)
        if (g->id == dst->id) {
          found = g;
          break;
        }
      if (!found) throw std::logic_error("export_split: missing group " + dst->id);
      dst->value = found->value;
      dst->trainable = false;
    }
    art.checksum = artifact_checksum<T>(art.params());

    nn::CheckpointMeta meta;
    meta.kind = std::string("codec-") + role_name(role);
    meta.seed = ae.seed;
    meta.arch = ae.config.to_json();
    meta.extra = json{{"role", role_name(role)}, {"checksum", art.checksum}};
    nn::save_checkpoint<T>(dir / role_name(role), art.params(), meta);
    return art;
  };
  auto enc = make(CodecRole::encoder);
  auto dec = make(CodecRole::decoder);
  return {std::move(enc), std::move(dec)};
}

template <typename T>
CodecArtifact<T> load_codec_artifact(const fs::path& dir) {
  const auto meta = nn::read_checkpoint_meta(dir);
  CodecRole role;
  if (meta.kind == "codec-encoder")
    role = CodecRole::encoder;
  else if (meta.kind == "codec-decoder")
    role = CodecRole::decoder;
  else
    throw IoError("checkpoint at " + dir.string() + " is '" + meta.kind +
                  "', expected a codec artifact");
  CodecArtifact<T> art;
  art.role = role;
  art.config = CompressionConfig::from_json(meta.arch);
  art.seed = meta.seed;
  art.net = build_half<T>(art.config, art.seed, role);
  nn::load_checkpoint_params<T>(dir, art.net.params());
  art.checksum = artifact_checksum<T>(art.params());
  return art;
}

template <typename T>
LatentCode artifact_encode(const CodecArtifact<T>& enc, const ImagePatch& patch) {
  if (enc.role != CodecRole::encoder)
    throw std::invalid_argument("artifact_encode: artifact role is decoder");
  if (patch.height != enc.config.input_h || patch.width != enc.config.input_w ||
      patch.channels != enc.config.input_c)
    throw std::invalid_argument("artifact_encode: patch geometry mismatch");
  Tensor<T> x = nn::patch_to_batch<T>(patch);
  auto& net = const_cast<nn::Sequential<T>&>(enc.net);
  Tensor<T> z = net.forward(x, nn::Phase::eval, false);
  LatentCode code;
  code.config_name = enc.config.name;
  code.activations =
      Tensor<float>({enc.config.latent_h(), enc.config.latent_w(), enc.config.latent_c()});
  for (int64_t i = 0; i < z.size(); ++i) code.activations[i] = static_cast<float>(z[i]);
  return code;
}

template <typename T>
ImagePatch artifact_decode(const CodecArtifact<T>& dec, const LatentCode& code) {
  if (dec.role != CodecRole::decoder)
    throw std::invalid_argument("artifact_decode: artifact role is encoder");
  const std::vector<int> want{dec.config.latent_h(), dec.config.latent_w(),
                              dec.config.latent_c()};
  if (code.activations.shape != want)
    throw std::invalid_argument("artifact_decode: latent shape mismatch");
  Tensor<T> z({1, want[0], want[1], want[2]});
  for (int64_t i = 0; i < z.size(); ++i) z[i] = T(code.activations[i]);
  auto& net = const_cast<nn::Sequential<T>&>(dec.net);
  Tensor<T> y = net.forward(z, nn::Phase::eval, false);
  ImagePatch out(dec.config.input_h, dec.config.input_w, dec.config.input_c);
  for (size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = static_cast<float>(y[static_cast<int64_t>(i)]);
  return out;
}

template <typename T>
CompressSummary compress_file(const CodecArtifact<T>& encoder, const fs::path& image_in,
                              const fs::path& latent_out, Quantization mode) {
  const ImagePatch patch = read_image(image_in);
  const LatentCode code = artifact_encode(encoder, patch);
  write_latent_file(latent_out, code, mode);

  CompressSummary s;
  s.bytes_in = static_cast<uint64_t>(encoder.config.input_elems());
  s.bytes_out = latent_file_size(encoder.config.latent_h(), encoder.config.latent_w(),
                                 encoder.config.latent_c(), mode);
  s.dimensionality_ratio = encoder.config.dimensionality_ratio();
  s.byte_ratio = static_cast<double>(s.bytes_out) / static_cast<double>(s.bytes_in);
  return s;
}

template <typename T>
DecompressSummary decompress_file(const CodecArtifact<T>& decoder, const fs::path& latent_in,
                                  const fs::path& image_out) {
  if (decoder.role != CodecRole::decoder)
    throw std::invalid_argument("decompress_file: artifact role is encoder");
  const LatentCode code =
      read_latent_file(latent_in, decoder.config.latent_h(), decoder.config.latent_w(),
                       decoder.config.latent_c(), decoder.config.name);
  const ImagePatch out = artifact_decode(decoder, code);
  write_image_8bit(image_out, out);
  DecompressSummary s;
  s.bytes_in = static_cast<uint64_t>(fs::file_size(latent_in));
  s.bytes_out = static_cast<uint64_t>(decoder.config.input_elems());
  return s;
}

#define HCAE_INSTANTIATE_CODEC(T)                                                        \
  template struct CodecArtifact<T>;                                                      \
  template std::pair<CodecArtifact<T>, CodecArtifact<T>> export_split<T>(                \
      const Autoencoder<T>&, const fs::path&);                                           \
  template CodecArtifact<T> load_codec_artifact<T>(const fs::path&);                     \
  template LatentCode artifact_encode<T>(const CodecArtifact<T>&, const ImagePatch&);    \
  template ImagePatch artifact_decode<T>(const CodecArtifact<T>&, const LatentCode&);    \
  template CompressSummary compress_file<T>(const CodecArtifact<T>&, const fs::path&,    \
                                            const fs::path&, Quantization);              \
  template DecompressSummary decompress_file<T>(const CodecArtifact<T>&, const fs::path&, \
                                                const fs::path&);

HCAE_INSTANTIATE_CODEC(float)
HCAE_INSTANTIATE_CODEC(double)

#undef HCAE_INSTANTIATE_CODEC

}  // namespace hcae
