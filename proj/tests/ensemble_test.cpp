// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "hcae/ensemble.hpp"
#include "hcae/errors.hpp"
#include "hcae/metrics.hpp"
#include "hcae/nn/batching.hpp"
#include "hcae/nn/loss.hpp"
#include "hcae/nn/optimizer.hpp"
#include "oracles.hpp"

using namespace hcae;

namespace {

PatchGeometry mini_geometry(int side = 16) {
  PatchGeometry g;
  g.height = g.width = side;
  return g;
}

CompressionConfig mini_ae_config(int side = 16) {
  CompressionConfig c;
  c.input_h = c.input_w = side;
  c.input_c = 3;
  c.block_widths = {4, 6};
  return c;
}

ClassifierSpec mini_clf_spec(int side = 16) {
  ClassifierSpec s;
  s.input_h = s.input_w = side;
  s.input_c = 3;
  s.widths = {4};
  return s;
}

template <typename T>
struct MiniRig {
  Autoencoder<T> ae;
  Classifier<T> clf;
  Ensemble<T> ens;

  MiniRig(LossWeights w = LossWeights{})
      : ae(build_autoencoder<T>(mini_ae_config(), 31)),
        clf(build_classifier<T>(mini_clf_spec(), 37)),
        ens(build_ensemble(ae, clf, w)) {}
};

}  // namespace

TEST_CASE("loss weight validation") {
  CHECK_THROWS_AS((LossWeights{-0.1, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((LossWeights{0.0, 0.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((LossWeights{1.0, 0.0}.validate()));
  CHECK_NOTHROW((LossWeights{0.0, 0.5}.validate()));
}

TEST_CASE("building an ensemble freezes every classifier group") {
  MiniRig<float> rig;
  for (auto* g : rig.clf.params()) CHECK_FALSE(g->trainable);
  for (auto* g : rig.ae.all_params())
    if (!g->statistic) CHECK(g->trainable);

  SUBCASE("geometry mismatch is rejected") {
    auto clf_big = build_classifier<float>(mini_clf_spec(32), 1);
    CHECK_THROWS_AS(build_ensemble(rig.ae, clf_big, LossWeights{}), std::invalid_argument);
  }
}

TEST_CASE("ensemble forward equals the composed single-patch path bit-exactly") {
  MiniRig<float> rig;
  const auto ds = generate_synthetic_dataset(3, 9, 0.5, mini_geometry());
  std::vector<size_t> idx = {0, 1, 2};
  Tensor<float> x = nn::assemble_batch<float>(ds, idx);
  const Tensor<float> p = ensemble_forward(rig.ens, x);

  for (size_t i = 0; i < 3; ++i) {
    const ImagePatch recon = decode(rig.ae, encode(rig.ae, ds.samples[i].patch));
    const float want = predict(rig.clf, recon);
    CHECK(p[static_cast<int64_t>(i)] == want);
  }
}

TEST_CASE("blended loss arithmetic") {
  SUBCASE("matches a hand-computed two-sample batch") {
    // w = (0.7, 0.3); samples (p=0.8,y=1,mse=0.02) and (p=0.3,y=0,mse=0.05).
    const double want =
        0.5 * ((0.7 * -std::log(0.8) + 0.3 * 0.02) + (0.7 * -std::log(1.0 - 0.3) + 0.3 * 0.05));
    const double got = blended_loss({0.8, 0.3}, {1, 0}, {0.02, 0.05}, LossWeights{0.7, 0.3});
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("perfect predictions and perfect reconstructions vanish") {
    // Clamping bounds the BCE term by -log(1 - 1e-7) ~ 1e-7.
    const double got = blended_loss({1.0, 0.0}, {1, 0}, {0.0, 0.0}, LossWeights{1.0, 1.0});
    CHECK(got == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(got < 1e-6);
  }
  SUBCASE("degenerate batches are rejected") {
    CHECK_THROWS_AS(blended_loss({}, {}, {}, LossWeights{}), std::invalid_argument);
    CHECK_THROWS_AS(blended_loss({0.5}, {1, 0}, {0.0}, LossWeights{}), std::invalid_argument);
  }
}

TEST_CASE("ensemble loss term elimination and linearity") {
  const auto ds = generate_synthetic_dataset(6, 13, 0.5, mini_geometry());
  const std::vector<LabeledSample> batch(ds.samples.begin(), ds.samples.end());

  MiniRig<float> rig;

  SUBCASE("w_s=0 reduces to the reconstruction MSE") {
    rig.ens.weights = LossWeights{0.0, 1.0};
    const double got = ensemble_loss(rig.ens, batch);
    double want = 0.0;
    for (const auto& s : batch) {
      const ImagePatch recon = decode(rig.ae, encode(rig.ae, s.patch));
      want += mse(recon, s.patch);
    }
    want /= static_cast<double>(batch.size());
    CHECK(got == doctest::Approx(want).epsilon(1e-6));
  }

  SUBCASE("w_r=0 reduces to the BCE of the composed predictions") {
    rig.ens.weights = LossWeights{1.0, 0.0};
    const double got = ensemble_loss(rig.ens, batch);
    double want = 0.0;
    for (const auto& s : batch) {
      const ImagePatch recon = decode(rig.ae, encode(rig.ae, s.patch));
      const double p = double(predict(rig.clf, recon));
      const double pc = std::min(std::max(p, 1e-7), 1.0 - 1e-7);
      want += s.label ? -std::log(pc) : -std::log(1.0 - pc);
    }
    want /= static_cast<double>(batch.size());
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }

  SUBCASE("loss is linear in the weights") {
    rig.ens.weights = LossWeights{1.0, 0.0};
    const double ls = ensemble_loss(rig.ens, batch);
    rig.ens.weights = LossWeights{0.0, 1.0};
    const double lr = ensemble_loss(rig.ens, batch);
    for (const auto& [ws, wr] : {std::pair<double, double>{0.3, 0.7}, {2.0, 0.25}, {1.0, 1.0}}) {
      rig.ens.weights = LossWeights{ws, wr};
      const double got = ensemble_loss(rig.ens, batch);
      CHECK(got == doctest::Approx(ws * ls + wr * lr).epsilon(1e-9));
    }
  }

  SUBCASE("empty batch is rejected") {
    CHECK_THROWS_AS(ensemble_loss(rig.ens, {}), std::invalid_argument);
  }
}

TEST_CASE("ensemble training updates only the autoencoder") {
  MiniRig<float> rig;
  const auto full = generate_synthetic_dataset(60, 3, 0.5, mini_geometry());
  const auto [train, val] = split(full, 0.2, 8);

  const uint64_t clf_before = nn::params_fingerprint(rig.clf.params());
  const uint64_t ae_before = nn::params_fingerprint(rig.ae.all_params());

  EnsTrainOptions opts;
  opts.epochs = 5;
  opts.batch_size = 16;
  opts.lr = 1e-3;
  opts.seed = 2;
  const auto history = train_ensemble(rig.ens, train, val, opts);

  CHECK(nn::params_fingerprint(rig.clf.params()) == clf_before);
  CHECK(nn::params_fingerprint(rig.ae.all_params()) != ae_before);
  REQUIRE(history.epochs.size() == 5);
  for (const auto& e : history.epochs) {
    CHECK(std::isfinite(e.val_loss));
    CHECK(std::isfinite(e.val_accuracy));
    CHECK(std::isfinite(e.val_auc));
  }

  SUBCASE("an unfrozen classifier is refused") {
    rig.clf.net.find_param("head.fc.w")->trainable = true;
    CHECK_THROWS_AS(train_ensemble(rig.ens, train, val, opts), std::invalid_argument);
  }
}

TEST_CASE("miniature ensemble gradient flow") {
  // Double-precision rig: finite differences across the full
  // encoder-decoder-classifier chain for the blended training loss.
  auto ae = build_autoencoder<double>(mini_ae_config(8), 311);
  auto clf = build_classifier<double>(mini_clf_spec(8), 317);
  // Positive norm shifts keep ReLU units active so the finite differences
  // never straddle a max-pool tie between zeros.
  for (auto* g : ae.all_params())
    if (g->id.ends_with(".beta")) g->value.fill(0.5);
  for (auto* g : clf.net.params())
    if (g->id.ends_with(".beta")) g->value.fill(0.5);
  auto ens = build_ensemble(ae, clf, LossWeights{1.0, 0.5});

  const auto ds = generate_synthetic_dataset(4, 7, 0.5, mini_geometry(8));
  std::vector<size_t> idx = {0, 1, 2, 3};
  std::vector<int> labels;
  Tensor<double> x = nn::assemble_batch<double>(ds, idx, &labels);

  auto loss_fn = [&]() {
    Tensor<double> recon = reconstruct_batch(ae, x, nn::Phase::train, true);
    Tensor<double> p = classifier_forward(clf, recon, nn::Phase::train, true);
    return ens.weights.w_s * nn::bce_loss(p, labels) +
           ens.weights.w_r * nn::mse_loss<double>(recon, x, nullptr);
  };

  // Analytic pass, mirroring the training loop.
  Tensor<double> recon = reconstruct_batch(ae, x, nn::Phase::train, true);
  Tensor<double> p = classifier_forward(clf, recon, nn::Phase::train, true);
  Tensor<double> dbce;
  nn::bce_loss(p, labels, &dbce);
  Tensor<double> dmse;
  nn::mse_loss(recon, x, &dmse);
  for (auto* g : ae.all_params()) g->zero_grad();
  clf.net.zero_grads();
  for (auto& v : dbce.data) v *= ens.weights.w_s;
  Tensor<double> drecon = clf.net.backward(dbce);
  for (int64_t i = 0; i < drecon.size(); ++i) drecon[i] += ens.weights.w_r * dmse[i];
  Tensor<double> dz = ae.decoder.backward(drecon);
  ae.encoder.backward(dz);

  double grad_norm = 0.0;
  for (auto* g : ae.all_params()) {
    if (g->statistic) continue;
    const std::vector<double> analytic(g->grad.data.begin(), g->grad.data.end());
    const auto fd =
        oracles::finite_difference_grad(loss_fn, g->value.ptr(), g->value.size(), 1e-6);
    const double err = oracles::max_rel_err(analytic, fd, 1e-3);
    INFO("group ", g->id, " err ", err);
    CHECK(err < 1e-4);
    for (double v : analytic) grad_norm += v * v;
  }
  CHECK(grad_norm > 0.0);  // gradient actually flows into the autoencoder

  // Frozen classifier: one optimizer step leaves it bit-identical.
  const uint64_t clf_before = nn::params_fingerprint(clf.params());
  auto all = ae.all_params();
  for (auto* g : clf.net.params()) all.push_back(g);
  nn::Adam<double> opt(all, 1e-3);
  opt.step();
  CHECK(nn::params_fingerprint(clf.params()) == clf_before);
}

TEST_CASE("linear supervised-autoencoder reference objective") {
  SUBCASE("identity chain with exact targets is zero") {
    Tensor<double> F({1, 1}), Wp({1, 1}), Wr({1, 1}), X({1, 1}), Y({1, 1});
    F[0] = Wp[0] = Wr[0] = 1.0;
    X[0] = 2.0;
    Y[0] = 2.0;
    // Reconstruction is x itself, prediction equals y: (1/2)[(0)^2+(0)^2].
    CHECK(linear_sae_objective(F, Wp, Wr, X, Y) == doctest::Approx(0.0).epsilon(1e-15));
  }

  SUBCASE("exact-fit instances vanish for larger shapes") {
    // F maps to a 2-d latent equal to the first two coordinates; Wp reads
    // the first latent, Wr reconstructs only when x lives in that span.
    Tensor<double> F({2, 2}), Wp({2, 1}), Wr({2, 2}), X({3, 2}), Y({3, 1});
    F.data = {1, 0, 0, 1};
    Wp.data = {1, 0};
    Wr.data = {1, 0, 0, 1};
    X.data = {0.5, -1, 2, 0.25, 0, 3};
    for (int i = 0; i < 3; ++i) Y[i] = X[int64_t(i) * 2];
    CHECK(linear_sae_objective(F, Wp, Wr, X, Y) == doctest::Approx(0.0).epsilon(1e-15));
  }

  SUBCASE("random instance matches an independent summation oracle") {
    const int d = 3, k = 2, m = 1, t = 4;
    Rng rng(55);
    Tensor<double> F({d, k}), Wp({k, m}), Wr({k, d}), X({t, d}), Y({t, m});
    oracles::fill_uniform(F.data, rng);
    oracles::fill_uniform(Wp.data, rng);
    oracles::fill_uniform(Wr.data, rng);
    oracles::fill_uniform(X.data, rng);
    oracles::fill_uniform(Y.data, rng);

    // Direct elementwise summation, no shared code with the implementation.
    double acc = 0.0;
    for (int i = 0; i < t; ++i) {
      std::vector<double> h(k, 0.0);
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < d; ++b) h[a] += X[int64_t(i) * d + b] * F[int64_t(b) * k + a];
      for (int a = 0; a < m; ++a) {
        double pred = 0.0;
        for (int b = 0; b < k; ++b) pred += h[b] * Wp[int64_t(b) * m + a];
        const double e = pred - Y[int64_t(i) * m + a];
        acc += e * e;
      }
      for (int a = 0; a < d; ++a) {
        double rec = 0.0;
        for (int b = 0; b < k; ++b) rec += h[b] * Wr[int64_t(b) * d + a];
        const double e = rec - X[int64_t(i) * d + a];
        acc += e * e;
      }
    }
    const double want = acc / (2.0 * t);
    CHECK(linear_sae_objective(F, Wp, Wr, X, Y) == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("shape mismatches are rejected") {
    Tensor<double> F({2, 2}), Wp({2, 1}), Wr({2, 3}), X({1, 2}), Y({1, 1});
    CHECK_THROWS_AS(linear_sae_objective(F, Wp, Wr, X, Y), std::invalid_argument);
  }
}
