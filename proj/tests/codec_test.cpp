// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "hcae/codec.hpp"
#include "hcae/image_io.hpp"
#include "oracles.hpp"

using namespace hcae;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CompressionConfig mini_config() {
  CompressionConfig c;
  c.input_h = c.input_w = 16;
  c.input_c = 3;
  c.block_widths = {4, 6};
  return c;
}

LatentCode random_latent(int h, int w, int c, uint64_t seed) {
  LatentCode code;
  code.config_name = "custom";
  code.activations = Tensor<float>({h, w, c});
  Rng rng(seed);
  for (auto& v : code.activations.data) v = float(rng.uniform(-3.0, 5.0));
  return code;
}

void corrupt_byte(const fs::path& p, std::streamoff off, uint8_t mask) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekg(off);
  char b;
  f.read(&b, 1);
  b = static_cast<char>(b ^ mask);
  f.seekp(off);
  f.write(&b, 1);
}

}  // namespace

TEST_CASE("split artifacts recompose the unsplit forward pass bit-exactly") {
  TempDir tmp("hcae_codec_split");
  auto ae = build_autoencoder<float>(mini_config(), 71);
  const auto [enc, dec] = export_split(ae, tmp.path);

  PatchGeometry g;
  g.height = g.width = 16;
  const auto ds = generate_synthetic_dataset(10, 5, 0.5, g);
  for (const auto& s : ds.samples) {
    const ImagePatch direct = decode(ae, encode(ae, s.patch));
    const ImagePatch via_split = artifact_decode(dec, artifact_encode(enc, s.patch));
    CHECK(direct.pixels == via_split.pixels);
  }

  SUBCASE("artifacts reload from disk with identical checksums") {
    const auto enc2 = load_codec_artifact<float>(tmp.path / "encoder");
    const auto dec2 = load_codec_artifact<float>(tmp.path / "decoder");
    CHECK(enc2.checksum == enc.checksum);
    CHECK(dec2.checksum == dec.checksum);
    const ImagePatch p = ds.samples[0].patch;
    CHECK(artifact_encode(enc2, p).activations.data == artifact_encode(enc, p).activations.data);
  }

  SUBCASE("role guards") {
    const LatentCode code = artifact_encode(enc, ds.samples[0].patch);
    CHECK_THROWS_AS(artifact_decode(enc, code), std::invalid_argument);   // encoder cannot decode
    CHECK_THROWS_AS(artifact_encode(dec, ds.samples[0].patch), std::invalid_argument);
  }

  SUBCASE("checksums change iff parameters change") {
    TempDir tmp2("hcae_codec_split2");
    const auto [enc_same, dec_same] = export_split(ae, tmp2.path);
    CHECK(enc_same.checksum == enc.checksum);
    CHECK(dec_same.checksum == dec.checksum);

    // Flip one bit of one encoder parameter and re-export.
    auto* w = ae.encoder.find_param("enc1.conv.w");
    uint32_t bits;
    std::memcpy(&bits, &w->value[0], 4);
    bits ^= 1u;
    std::memcpy(&w->value[0], &bits, 4);
    TempDir tmp3("hcae_codec_split3");
    const auto [enc_mut, dec_mut] = export_split(ae, tmp3.path);
    CHECK(enc_mut.checksum != enc.checksum);
    CHECK(dec_mut.checksum == dec.checksum);  // decoder parameters untouched
  }
}

TEST_CASE("latent file format") {
  TempDir tmp("hcae_latent");
  const fs::path file = tmp.path / "code.hcl";

  SUBCASE("float mode round-trips bit-exactly and sizes match the layout") {
    const LatentCode code = random_latent(4, 4, 6, 3);
    write_latent_file(file, code, Quantization::none);
    CHECK(fs::file_size(file) == latent_file_size(4, 4, 6, Quantization::none));
    const LatentCode back = read_latent_file(file, 4, 4, 6, "custom");
    CHECK(back.activations.data == code.activations.data);
    CHECK(back.quantization == Quantization::none);
  }

  SUBCASE("8-bit mode respects the per-channel error bound") {
    const int h = 6, w = 6, c = 5;
    const LatentCode code = random_latent(h, w, c, 9);
    write_latent_file(file, code, Quantization::affine8);
    CHECK(fs::file_size(file) == latent_file_size(h, w, c, Quantization::affine8));
    const LatentCode back = read_latent_file(file, h, w, c, "custom");
    REQUIRE(back.quantization == Quantization::affine8);

    for (int ch = 0; ch < c; ++ch) {
      float lo = code.activations[ch], hi = code.activations[ch];
      for (int64_t i = ch; i < code.activations.size(); i += c) {
        lo = std::min(lo, code.activations[i]);
        hi = std::max(hi, code.activations[i]);
      }
      const double bound = double(hi - lo) / 255.0 / 2.0 + 1e-5 * std::abs(double(hi));
      for (int64_t i = ch; i < code.activations.size(); i += c)
        CHECK(std::abs(double(back.activations[i]) - double(code.activations[i])) <= bound);
    }
  }

  SUBCASE("constant channels quantize exactly") {
    LatentCode code = random_latent(2, 2, 2, 1);
    for (int64_t i = 0; i < code.activations.size(); i += 2) code.activations[i] = 1.25f;
    write_latent_file(file, code, Quantization::affine8);
    const LatentCode back = read_latent_file(file, 2, 2, 2, "custom");
    for (int64_t i = 0; i < code.activations.size(); i += 2)
      CHECK(back.activations[i] == 1.25f);
  }

  SUBCASE("error categories are distinct") {
    const LatentCode code = random_latent(4, 4, 6, 3);
    write_latent_file(file, code, Quantization::none);

    corrupt_byte(file, 0, 0x01);  // magic
    CHECK_THROWS_AS(read_latent_file(file, 4, 4, 6, "x"), LatentFileError);
    try {
      read_latent_file(file, 4, 4, 6, "x");
    } catch (const LatentFileError& e) {
      CHECK(e.kind() == LatentFileError::Kind::bad_magic);
    }
    corrupt_byte(file, 0, 0x01);  // restore

    corrupt_byte(file, 4, 0x02);  // version
    try {
      read_latent_file(file, 4, 4, 6, "x");
      FAIL("expected version error");
    } catch (const LatentFileError& e) {
      CHECK(e.kind() == LatentFileError::Kind::bad_version);
    }
    corrupt_byte(file, 4, 0x02);

    corrupt_byte(file, 20, 0x10);  // payload -> checksum failure
    try {
      read_latent_file(file, 4, 4, 6, "x");
      FAIL("expected checksum error");
    } catch (const LatentFileError& e) {
      CHECK(e.kind() == LatentFileError::Kind::bad_checksum);
    }
    corrupt_byte(file, 20, 0x10);

    // Truncation.
    {
      std::ifstream in(file, std::ios::binary);
      std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
      in.close();
      std::ofstream out(file, std::ios::binary | std::ios::trunc);
      out.write(buf.data(), static_cast<std::streamsize>(buf.size() - 7));
    }
    try {
      read_latent_file(file, 4, 4, 6, "x");
      FAIL("expected truncation error");
    } catch (const LatentFileError& e) {
      CHECK(e.kind() == LatentFileError::Kind::truncated);
    }

    // Shape mismatch against the expected dims.
    write_latent_file(file, code, Quantization::none);
    try {
      read_latent_file(file, 8, 2, 6, "x");
      FAIL("expected shape error");
    } catch (const LatentFileError& e) {
      CHECK(e.kind() == LatentFileError::Kind::bad_shape);
    }
  }
}

TEST_CASE("compress and decompress files") {
  TempDir tmp("hcae_codec_files");
  auto ae = build_autoencoder<float>(mini_config(), 13);
  const auto [enc, dec] = export_split(ae, tmp.path / "split");

  PatchGeometry g;
  g.height = g.width = 16;
  const auto ds = generate_synthetic_dataset(4, 3, 0.5, g);
  const fs::path img = tmp.path / "patch.ppm";
  write_image_8bit(img, ds.samples[0].patch);
  // The on-disk patch is the 8-bit quantized rendition.
  const ImagePatch img_loaded = read_image(img);

  SUBCASE("float mode equals the direct path after identical 8-bit rounding") {
    const fs::path hcl = tmp.path / "patch.hcl";
    const fs::path out = tmp.path / "recon.ppm";
    const CompressSummary cs = compress_file(enc, img, hcl, Quantization::none);
    decompress_file(dec, hcl, out);

    const fs::path direct = tmp.path / "direct.ppm";
    write_image_8bit(direct, decode(ae, encode(ae, img_loaded)));

    std::ifstream a(out, std::ios::binary), b(direct, std::ios::binary);
    const std::vector<char> va((std::istreambuf_iterator<char>(a)),
                               std::istreambuf_iterator<char>());
    const std::vector<char> vb((std::istreambuf_iterator<char>(b)),
                               std::istreambuf_iterator<char>());
    CHECK(va == vb);

    // Byte accounting from the format layout: 16*16*3 source bytes.
    CHECK(cs.bytes_in == 768);
    CHECK(cs.bytes_out == latent_file_size(4, 4, 6, Quantization::none));
    CHECK(cs.dimensionality_ratio == doctest::Approx((4.0 * 4 * 6) / 768.0));
    CHECK(cs.byte_ratio ==
          doctest::Approx(double(cs.bytes_out) / double(cs.bytes_in)).epsilon(1e-12));
  }

  SUBCASE("preset-66 byte accounting from the format layout alone") {
    // 96x96x3 input, latent 12x12x128. Float latents are an expansion over
    // 8-bit pixels and the ratio says so honestly; 8-bit latents track the
    // dimensionality ratio plus the fixed header/scale overhead.
    const double src_bytes = 96.0 * 96 * 3;
    const double f32 = double(latent_file_size(12, 12, 128, Quantization::none));
    CHECK(f32 == 13 + 4.0 * 18432 + 4);
    CHECK(f32 / src_bytes == doctest::Approx(4.0 * 18432 / 27648).epsilon(1e-3));
    CHECK(f32 / src_bytes > 1.0);  // expansion
    const double q8 = double(latent_file_size(12, 12, 128, Quantization::affine8));
    CHECK(q8 == 13 + 128 * 8 + 18432 + 4);
    CHECK(q8 / src_bytes == doctest::Approx(18432.0 / 27648).epsilon(0.06));
    CHECK(q8 / src_bytes < 1.0);
  }

  SUBCASE("8-bit mode shrinks the payload to the dimensionality ratio plus overhead") {
    const fs::path hcl = tmp.path / "patch8.hcl";
    const CompressSummary cs = compress_file(enc, img, hcl, Quantization::affine8);
    const uint64_t want = 13 + 6 * 8 + 4ull * 4 * 6 + 4;
    CHECK(cs.bytes_out == want);
    CHECK(cs.byte_ratio == doctest::Approx(double(want) / 768.0).epsilon(1e-12));
    const fs::path out = tmp.path / "recon8.ppm";
    decompress_file(dec, hcl, out);
    // Bounded deviation from the float path, measured on the decoded image.
    const ImagePatch recon8 = read_image(out);
    const ImagePatch reconf = decode(ae, encode(ae, img_loaded));
    double mean_abs = 0.0;
    for (size_t i = 0; i < recon8.pixels.size(); ++i)
      mean_abs += std::abs(double(recon8.pixels[i]) - double(reconf.pixels[i]));
    mean_abs /= double(recon8.pixels.size());
    MESSAGE("8-bit mean abs pixel deviation ", mean_abs);
    CHECK(mean_abs < 0.05);
  }

  SUBCASE("corrupt input leaves no partial image behind") {
    const fs::path hcl = tmp.path / "bad.hcl";
    write_latent_file(hcl, random_latent(4, 4, 6, 2), Quantization::none);
    corrupt_byte(hcl, 25, 0x08);
    const fs::path out = tmp.path / "never.ppm";
    CHECK_THROWS_AS(decompress_file(dec, hcl, out), LatentFileError);
    CHECK_FALSE(fs::exists(out));
  }

  SUBCASE("geometry mismatch on compression input") {
    PatchGeometry small;
    small.height = small.width = 8;
    const auto ds8 = generate_synthetic_dataset(1, 1, 0.5, small);
    const fs::path img8 = tmp.path / "small.ppm";
    write_image_8bit(img8, ds8.samples[0].patch);
    CHECK_THROWS_AS(compress_file(enc, img8, tmp.path / "small.hcl", Quantization::none),
                    std::invalid_argument);
  }
}

TEST_CASE("stored-and-reloaded float latent decodes identically to a fresh one") {
  TempDir tmp("hcae_codec_reload");
  auto ae = build_autoencoder<float>(mini_config(), 99);
  PatchGeometry g;
  g.height = g.width = 16;
  const auto ds = generate_synthetic_dataset(1, 8, 0.5, g);

  const LatentCode fresh = encode(ae, ds.samples[0].patch);
  const fs::path file = tmp.path / "z.hcl";
  write_latent_file(file, fresh, Quantization::none);
  const LatentCode reloaded = read_latent_file(file, fresh.activations.dim(0),
                                               fresh.activations.dim(1), fresh.activations.dim(2),
                                               fresh.config_name);
  CHECK(decode(ae, reloaded).pixels == decode(ae, fresh).pixels);
}
