// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include "hcae/ensemble.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "hcae/errors.hpp"
#include "hcae/kernels/kernels.hpp"
#include "hcae/metrics.hpp"
#include "hcae/nn/batching.hpp"
#include "hcae/nn/loss.hpp"
#include "hcae/nn/optimizer.hpp"

namespace hcae {

using nn::Phase;

void LossWeights::validate() const {
  if (!(w_s >= 0.0) || !(w_r >= 0.0))
    throw std::invalid_argument("LossWeights: weights must be non-negative");
  if (!(w_s + w_r > 0.0)) throw std::invalid_argument("LossWeights: w_s + w_r must be positive");
}

template <typename T>
Ensemble<T> build_ensemble(Autoencoder<T>& ae, Classifier<T>& clf, LossWeights weights) {
  weights.validate();
  if (ae.config.input_h != clf.spec.input_h || ae.config.input_w != clf.spec.input_w ||
      ae.config.input_c != clf.spec.input_c)
    throw std::invalid_argument(
        "build_ensemble: classifier input geometry must equal autoencoder output geometry");
  // Freeze the classifier for the ensemble's lifetime. Frozen batch norms run
  // on stored statistics, so the statistics are frozen too.
  for (auto* g : clf.net.params())
    if (!g->statistic) g->trainable = false;
  Ensemble<T> ens;
  ens.ae = &ae;
  ens.clf = &clf;
  ens.weights = weights;
  return ens;
}

template <typename T>
Tensor<T> ensemble_forward(Ensemble<T>& ens, const Tensor<T>& x) {
  Tensor<T> recon = reconstruct_batch(*ens.ae, x, Phase::eval, false);
  return classifier_forward(*ens.clf, recon, Phase::eval, false);
}

double blended_loss(const std::vector<double>& probs, const std::vector<int>& labels,
                    const std::vector<double>& per_sample_mse, const LossWeights& weights) {
  if (probs.size() != labels.size() || probs.size() != per_sample_mse.size())
    throw std::invalid_argument("blended_loss: size mismatch");
  if (probs.empty()) throw std::invalid_argument("blended_loss: empty batch");
  constexpr double eps = 1e-7;
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    const double pc = std::min(std::max(probs[i], eps), 1.0 - eps);
    const double yi = labels[i] ? 1.0 : 0.0;
    const double bce = -(yi * std::log(pc) + (1.0 - yi) * std::log(1.0 - pc));
    acc += weights.w_s * bce + weights.w_r * per_sample_mse[i];
  }
  return acc / static_cast<double>(probs.size());
}

template <typename T>
double ensemble_loss(Ensemble<T>& ens, const std::vector<LabeledSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("ensemble_loss: empty batch");
  LabeledDataset tmp;
  tmp.samples = batch;
  std::vector<int> labels;
  std::vector<size_t> idx(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) idx[i] = i;
  Tensor<T> x = nn::assemble_batch<T>(tmp, idx, &labels);

  Tensor<T> recon = reconstruct_batch(*ens.ae, x, Phase::eval, false);
  Tensor<T> p = classifier_forward(*ens.clf, recon, Phase::eval, false);

  const int64_t stride = recon.size() / static_cast<int64_t>(batch.size());
  std::vector<double> probs(batch.size()), sample_mse(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    double acc = 0.0;
    for (int64_t j = 0; j < stride; ++j) {
      const double d =
          double(recon[int64_t(i) * stride + j]) - double(x[int64_t(i) * stride + j]);
      acc += d * d;
    }
    sample_mse[i] = acc / static_cast<double>(stride);
    probs[i] = double(p[static_cast<int64_t>(i)]);
    if (!std::isfinite(probs[i]) || !std::isfinite(sample_mse[i]))
      throw NumericalError("ensemble_loss: non-finite intermediate at sample " +
                           std::to_string(i));
  }
  return blended_loss(probs, labels, sample_mse, ens.weights);
}

namespace {

template <typename T>
uint64_t classifier_fingerprint(const Classifier<T>& clf) {
  return nn::params_fingerprint(clf.params());
}

template <typename T>
struct EnsValMetrics {
  double loss, accuracy, auc;
};

template <typename T>
EnsValMetrics<T> validate_ensemble(Ensemble<T>& ens, const LabeledDataset& val, int batch_size) {
  std::vector<double> probs;
  std::vector<int> labels;
  double loss_acc = 0.0;
  std::vector<size_t> idx;
  for (size_t start = 0; start < val.size(); start += static_cast<size_t>(batch_size)) {
    idx.clear();
    for (size_t i = start; i < std::min(val.size(), start + static_cast<size_t>(batch_size)); ++i)
      idx.push_back(i);
    std::vector<int> batch_labels;
    Tensor<T> x = nn::assemble_batch<T>(val, idx, &batch_labels);
    Tensor<T> recon = reconstruct_batch(*ens.ae, x, Phase::eval, false);
    Tensor<T> p = classifier_forward(*ens.clf, recon, Phase::eval, false);

    const int64_t stride = recon.size() / static_cast<int64_t>(idx.size());
    std::vector<double> bprobs(idx.size()), bmse(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
      double acc = 0.0;
      for (int64_t j = 0; j < stride; ++j) {
        const double d =
            double(recon[int64_t(i) * stride + j]) - double(x[int64_t(i) * stride + j]);
        acc += d * d;
      }
      bmse[i] = acc / static_cast<double>(stride);
      bprobs[i] = double(p[static_cast<int64_t>(i)]);
    }
    loss_acc += blended_loss(bprobs, batch_labels, bmse, ens.weights) *
                static_cast<double>(idx.size());
    probs.insert(probs.end(), bprobs.begin(), bprobs.end());
    labels.insert(labels.end(), batch_labels.begin(), batch_labels.end());
  }

  EnsValMetrics<T> m{};
  m.loss = loss_acc / static_cast<double>(val.size());
  ScoredSet set;
  set.scores = std::move(probs);
  set.labels = std::move(labels);
  m.accuracy = accuracy_f1(set).accuracy;
  m.auc = set.both_classes() ? auc_roc(set) : std::numeric_limits<double>::quiet_NaN();
  return m;
}

}  // namespace

template <typename T>
nn::TrainingHistory train_ensemble(Ensemble<T>& ens, const LabeledDataset& train,
                                   const LabeledDataset& val, const EnsTrainOptions& opts) {
  if (opts.epochs < 1) throw std::invalid_argument("train_ensemble: epochs must be >= 1");
  if (opts.batch_size < 1) throw std::invalid_argument("train_ensemble: batch_size must be >= 1");
  if (train.empty() || val.empty()) throw std::invalid_argument("train_ensemble: empty dataset");
  for (const auto* g : ens.clf->params())
    if (!g->statistic && g->trainable)
      throw std::invalid_argument("train_ensemble: classifier must be frozen");

  const uint64_t clf_before = classifier_fingerprint(*ens.clf);

  auto ae_groups = ens.ae->all_params();
  nn::Adam<T> opt(ae_groups, static_cast<T>(opts.lr));
  nn::TrainingHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor<T>> best_snapshot;

  const LossWeights& w = ens.weights;

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng(derive_seed(opts.seed, static_cast<uint64_t>(epoch)));
    const auto batches = nn::make_batches(nn::shuffled_indices(train.size(), shuffle_rng),
                                          static_cast<size_t>(opts.batch_size));
    double train_acc = 0.0;
    for (const auto& idx : batches) {
      std::vector<int> labels;
      Tensor<T> x = nn::assemble_batch<T>(train, idx, &labels);

      // Autoencoder in training mode (it is being trained); classifier layers
      // are frozen and therefore run on stored statistics either way.
      Tensor<T> recon = reconstruct_batch(*ens.ae, x, Phase::train, true);
      Tensor<T> p = classifier_forward(*ens.clf, recon, Phase::train, true);

      Tensor<T> dbce;
      const double loss_s = nn::bce_loss(p, labels, &dbce);
      Tensor<T> dmse;
      const double loss_r = nn::mse_loss(recon, x, &dmse);
      const double loss = w.w_s * loss_s + w.w_r * loss_r;
      if (!std::isfinite(loss))
        throw NumericalError("train_ensemble: non-finite loss at epoch " + std::to_string(epoch));
      train_acc += loss * static_cast<double>(idx.size());

      opt.zero_grads();
      ens.clf->net.zero_grads();
      for (auto& v : dbce.data) v *= static_cast<T>(w.w_s);
      Tensor<T> drecon = ens.clf->net.backward(dbce);
      if (w.w_r != 0.0)
        kernels::axpy(static_cast<T>(w.w_r), dmse.ptr(), drecon.ptr(), drecon.size());
      Tensor<T> dz = ens.ae->decoder.backward(drecon);
      ens.ae->encoder.backward(dz);
      opt.step();
    }

    nn::EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_acc / static_cast<double>(train.size());
    const auto vm = validate_ensemble(ens, val, opts.batch_size);
    rec.val_loss = vm.loss;
    rec.val_accuracy = vm.accuracy;
    rec.val_auc = vm.auc;
    if (!std::isfinite(rec.val_loss))
      throw NumericalError("train_ensemble: non-finite validation loss at epoch " +
                           std::to_string(epoch));
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(rec);

    if (opts.policy == CheckpointPolicy::best_val_loss && rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best_snapshot = nn::snapshot_params(ae_groups);
      history.best_epoch = epoch;
    }
  }

  if (opts.policy == CheckpointPolicy::best_val_loss && !best_snapshot.empty())
    nn::restore_params(ae_groups, best_snapshot);
  else
    history.best_epoch = opts.epochs;
  ens.ae->encoder.clear_tape();
  ens.ae->decoder.clear_tape();
  ens.clf->net.clear_tape();

  if (classifier_fingerprint(*ens.clf) != clf_before)
    throw std::logic_error(
        "train_ensemble: classifier parameters drifted during ensemble training (frozen-top "
        "invariant violated)");
  return history;
}

double linear_sae_objective(const Tensor<double>& F, const Tensor<double>& Wp,
                            const Tensor<double>& Wr, const Tensor<double>& X,
                            const Tensor<double>& Y) {
  if (F.rank() != 2 || Wp.rank() != 2 || Wr.rank() != 2 || X.rank() != 2 || Y.rank() != 2)
    throw std::invalid_argument("linear_sae_objective: all arguments must be matrices");
  const int d = F.dim(0), k = F.dim(1);
  const int m = Wp.dim(1);
  const int t = X.dim(0);
  if (Wp.dim(0) != k || Wr.dim(0) != k || Wr.dim(1) != d || X.dim(1) != d || Y.dim(0) != t ||
      Y.dim(1) != m)
    throw std::invalid_argument("linear_sae_objective: inconsistent shapes");

  Tensor<double> H({t, k});
  kernels::gemm_nn(X.ptr(), F.ptr(), H.ptr(), t, d, k, false);
  Tensor<double> P({t, m});
  kernels::gemm_nn(H.ptr(), Wp.ptr(), P.ptr(), t, k, m, false);
  Tensor<double> R({t, d});
  kernels::gemm_nn(H.ptr(), Wr.ptr(), R.ptr(), t, k, d, false);

  double acc = 0.0;
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < m; ++j) {
      const double e = P[int64_t(i) * m + j] - Y[int64_t(i) * m + j];
      acc += e * e;
    }
    for (int j = 0; j < d; ++j) {
      const double e = R[int64_t(i) * d + j] - X[int64_t(i) * d + j];
      acc += e * e;
    }
  }
  return acc / (2.0 * static_cast<double>(t));
}

#define HCAE_INSTANTIATE_ENS(T)                                                       \
  template struct Ensemble<T>;                                                        \
  template Ensemble<T> build_ensemble<T>(Autoencoder<T>&, Classifier<T>&, LossWeights); \
  template Tensor<T> ensemble_forward<T>(Ensemble<T>&, const Tensor<T>&);             \
  template double ensemble_loss<T>(Ensemble<T>&, const std::vector<LabeledSample>&);  \
  template nn::TrainingHistory train_ensemble<T>(Ensemble<T>&, const LabeledDataset&, \
                                                 const LabeledDataset&,               \
                                                 const EnsTrainOptions&);

HCAE_INSTANTIATE_ENS(float)
HCAE_INSTANTIATE_ENS(double)

#undef HCAE_INSTANTIATE_ENS

}  // namespace hcae
