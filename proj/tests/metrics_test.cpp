// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <doctest.h>

#include "hcae/metrics.hpp"
#include "oracles.hpp"

using namespace hcae;
namespace fs = std::filesystem;

namespace {

ImagePatch constant_patch(int side, float v, int channels = 1) {
  ImagePatch p(side, side, channels);
  std::fill(p.pixels.begin(), p.pixels.end(), v);
  return p;
}

ImagePatch noise_patch(int side, uint64_t seed) {
  ImagePatch p(side, side, 1);
  Rng rng(seed);
  for (auto& v : p.pixels) v = float(rng.uniform());
  return p;
}

ScoredSet make_set(std::vector<double> scores, std::vector<int> labels) {
  ScoredSet s;
  s.scores = std::move(scores);
  s.labels = std::move(labels);
  return s;
}

}  // namespace

TEST_CASE("mse examples and symmetry") {
  const ImagePatch zeros = constant_patch(4, 0.0f, 3);
  const ImagePatch ones = constant_patch(4, 1.0f, 3);
  CHECK(mse(zeros, zeros) == 0.0);
  CHECK(mse(zeros, ones) == doctest::Approx(1.0).epsilon(1e-12));

  ImagePatch a(2, 1, 1), b(2, 1, 1);
  a.pixels = {0.0f, 0.5f};
  b.pixels = {0.5f, 0.5f};
  CHECK(mse(a, b) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(mse(a, b) == mse(b, a));

  CHECK_THROWS_AS(mse(zeros, constant_patch(5, 0.0f, 3)), std::invalid_argument);
}

TEST_CASE("psnr closed forms") {
  const ImagePatch p = noise_patch(8, 1);
  CHECK(psnr_is_infinite(psnr(p, p)));

  // Construct pairs with exact MSE 0.01 and 0.25.
  ImagePatch a = constant_patch(4, 0.5f);
  ImagePatch b = constant_patch(4, 0.6f);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));

  ImagePatch c = constant_patch(4, 0.25f);
  ImagePatch d = constant_patch(4, 0.75f);
  CHECK(psnr(c, d) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-9));
  CHECK(psnr(c, d) == doctest::Approx(6.0206).epsilon(1e-4));

  CHECK_THROWS_AS(psnr(a, b, 0.0), std::invalid_argument);
}

TEST_CASE("ssim identity, luminance closed form, noise decorrelation") {
  const ImagePatch p = noise_patch(16, 3);
  CHECK(ssim(p, p) == doctest::Approx(1.0).epsilon(1e-12));

  // Constant patches: variance terms vanish, only the luminance factor
  // remains: (2 m1 m2 + c1) / (m1^2 + m2^2 + c1).
  const double m1 = 0.3, m2 = 0.55, c1 = 0.01 * 0.01;
  const ImagePatch a = constant_patch(16, float(m1));
  const ImagePatch b = constant_patch(16, float(m2));
  const double want = (2 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
  CHECK(ssim(a, b) == doctest::Approx(want).epsilon(1e-6));
  CHECK(want < 1.0);

  // Independent noise: mean SSIM lands near zero.
  const ImagePatch n1 = noise_patch(48, 5);
  const ImagePatch n2 = noise_patch(48, 6);
  const double v = ssim(n1, n2);
  MESSAGE("noise ssim ", v);
  CHECK(std::abs(v) < 0.2);

  CHECK(ssim(a, b) == ssim(b, a));
  CHECK_THROWS_AS(ssim(a, b, 17), std::invalid_argument);  // window > side
}

TEST_CASE("auc examples") {
  CHECK(auc_roc(make_set({0.9, 0.1}, {1, 0})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(auc_roc(make_set({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0})) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(auc_roc(make_set({0.1, 0.9}, {1, 0})) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(auc_roc(make_set({0.3, 0.4}, {1, 1})), std::invalid_argument);
  CHECK_THROWS_AS(auc_roc(make_set({0.3}, {0})), std::invalid_argument);
  CHECK_THROWS_AS(auc_roc(make_set({0.3, 0.1}, {1})), std::invalid_argument);
}

TEST_CASE("auc equals exhaustive pair counting, including tie-heavy sets") {
  Rng rng(404);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(199));
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    const bool heavy_ties = trial % 2 == 0;
    bool pos = false, neg = false;
    for (int i = 0; i < n; ++i) {
      const double s = rng.uniform();
      scores[static_cast<size_t>(i)] = heavy_ties ? std::round(s * 4.0) / 4.0 : s;
      labels[static_cast<size_t>(i)] = rng.coin(0.5) ? 1 : 0;
      (labels[static_cast<size_t>(i)] ? pos : neg) = true;
    }
    if (!pos) labels[0] = 1;
    if (!neg) labels[static_cast<size_t>(n - 1)] = 0;

    const double got = auc_roc(make_set(scores, labels));
    const double want = oracles::pair_counting_auc(scores, labels);
    CHECK(std::abs(got - want) < 1e-9);
  }
}

TEST_CASE("auc rank invariance and label complement") {
  Rng rng(77);
  std::vector<double> scores(80);
  std::vector<int> labels(80);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform(0.01, 0.99);
    labels[i] = rng.coin(0.4) ? 1 : 0;
  }
  labels[0] = 1;
  labels[1] = 0;

  const double base = auc_roc(make_set(scores, labels));

  // Strictly increasing transforms leave the ranking unchanged.
  std::vector<double> logit(scores.size()), expd(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    logit[i] = std::log(scores[i] / (1.0 - scores[i]));
    expd[i] = std::exp(3.0 * scores[i]);
  }
  CHECK(auc_roc(make_set(logit, labels)) == doctest::Approx(base).epsilon(1e-12));
  CHECK(auc_roc(make_set(expd, labels)) == doctest::Approx(base).epsilon(1e-12));

  // Complement: flipping labels maps AUC to 1 - AUC.
  std::vector<int> flipped(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) flipped[i] = 1 - labels[i];
  CHECK(auc_roc(make_set(scores, flipped)) == doctest::Approx(1.0 - base).epsilon(1e-12));
}

TEST_CASE("accuracy and f1") {
  SUBCASE("perfect predictions") {
    const auto r = accuracy_f1(make_set({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}));
    CHECK(r.accuracy == 1.0);
    CHECK(r.f1 == 1.0);
  }
  SUBCASE("all-negative predictions give F1 zero") {
    const auto r = accuracy_f1(make_set({0.1, 0.2, 0.3}, {1, 0, 1}));
    CHECK(r.f1 == 0.0);
    CHECK(r.accuracy == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("hand-counted confusion matrix") {
    // TP=1 (0.9), FP=1 (0.6), FN=1 (0.4), TN=1 (0.2).
    const auto r = accuracy_f1(make_set({0.9, 0.6, 0.4, 0.2}, {1, 0, 1, 0}), 0.5);
    CHECK(r.accuracy == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("threshold bounds") {
    CHECK_THROWS_AS(accuracy_f1(make_set({0.5}, {1}), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(accuracy_f1(make_set({0.5}, {1}), 1.0), std::invalid_argument);
  }
}

TEST_CASE("evaluate_triplet produces the three-way report") {
  CompressionConfig cfg;
  cfg.input_h = cfg.input_w = 16;
  cfg.input_c = 3;
  cfg.block_widths = {4, 6};
  auto ae_a = build_autoencoder<float>(cfg, 1);
  auto ae_b = build_autoencoder<float>(cfg, 1);  // identical twin
  ClassifierSpec cs;
  cs.input_h = cs.input_w = 16;
  cs.widths = {4};
  auto clf = build_classifier<float>(cs, 2);

  PatchGeometry g;
  g.height = g.width = 16;
  const auto val = generate_synthetic_dataset(24, 11, 0.5, g);

  const EvalReport rep = evaluate_triplet(clf, ae_a, ae_b, val, 8);
  REQUIRE(rep.rows.size() == 3);

  SUBCASE("original row has identity distortion metrics") {
    const EvalRow& orig = rep.row(ScoreSource::original);
    CHECK(orig.mean_mse == 0.0);
    CHECK(psnr_is_infinite(orig.mean_psnr));
    CHECK(orig.mean_ssim == 1.0);
  }

  SUBCASE("identical autoencoders give identical rows") {
    const EvalRow& u = rep.row(ScoreSource::unsup_recon);
    const EvalRow& s = rep.row(ScoreSource::sup_recon);
    CHECK(u.auc == s.auc);
    CHECK(u.accuracy == s.accuracy);
    CHECK(u.mean_mse == s.mean_mse);
    CHECK(u.mean_ssim == s.mean_ssim);
  }

  SUBCASE("json round trip keeps the infinity sentinel parseable") {
    const auto j = rep.to_json();
    CHECK(j.at("rows")[0].at("mean_psnr") == "inf");
    const EvalReport back = EvalReport::from_json(j);
    CHECK(psnr_is_infinite(back.row(ScoreSource::original).mean_psnr));
    CHECK(back.row(ScoreSource::unsup_recon).auc ==
          doctest::Approx(rep.row(ScoreSource::unsup_recon).auc));
    CHECK(back.to_table().find("original") != std::string::npos);
  }

  SUBCASE("bar chart renders to a PPM file") {
    const fs::path chart = fs::temp_directory_path() / "hcae_chart.ppm";
    fs::remove(chart);
    render_auc_chart(rep, chart);
    CHECK(fs::exists(chart));
    CHECK(fs::file_size(chart) > 1000);
    fs::remove(chart);
  }
}
