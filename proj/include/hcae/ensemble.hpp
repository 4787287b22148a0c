// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hcae/autoencoder.hpp"
#include "hcae/classifier.hpp"
#include "hcae/nn/history.hpp"

namespace hcae {

// Blend of the supervised (binary cross-entropy through the classifier) and
// reconstruction (MSE) objectives. The default (1, 0) trains the ensemble on
// the classifier's own loss; the reconstruction term is available for the
// general supervised-autoencoder formulation.
struct LossWeights {
  double w_s = 1.0;
  double w_r = 0.0;
  void validate() const;
};

// Trained autoencoder base composed with a frozen classifier top. Building
// the ensemble freezes every classifier group for its lifetime (including
// normalization statistics: the classifier always runs in inference mode).
// Holds references; the underlying models must outlive the ensemble.
template <typename T>
struct Ensemble {
  Autoencoder<T>* ae = nullptr;
  Classifier<T>* clf = nullptr;
  LossWeights weights;
};

template <typename T>
Ensemble<T> build_ensemble(Autoencoder<T>& ae, Classifier<T>& clf, LossWeights weights);

// Forward pass: clf(decode(encode(x))). Inference mode, no recording.
template <typename T>
Tensor<T> ensemble_forward(Ensemble<T>& ens, const Tensor<T>& x);

// The blended objective as plain arithmetic:
// (1/t) sum_i [ w_s * BCE(p_i, y_i) + w_r * mse_i ].
// Exposed separately so tests can pin it against hand-computed numbers.
double blended_loss(const std::vector<double>& probs, const std::vector<int>& labels,
                    const std::vector<double>& per_sample_mse, const LossWeights& weights);

// Evaluation-mode loss over a batch of samples. Throws NumericalError naming
// the first sample index that produced a non-finite intermediate.
template <typename T>
double ensemble_loss(Ensemble<T>& ens, const std::vector<LabeledSample>& batch);

struct EnsTrainOptions {
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-4;
  uint64_t seed = 0;
  CheckpointPolicy policy = CheckpointPolicy::best_val_loss;
};

// Trains the autoencoder inside the ensemble; classifier parameters and
// statistics are verified bit-identical afterwards (std::logic_error if not,
// that would be an internal invariant failure). History carries loss,
// accuracy and AUC per epoch.
template <typename T>
nn::TrainingHistory train_ensemble(Ensemble<T>& ens, const LabeledDataset& train,
                                   const LabeledDataset& val, const EnsTrainOptions& opts);

// Reference objective of the linear supervised autoencoder, row-vector
// convention: latent h_i = x_i F with F (d,k); predictions h_i Wp with
// Wp (k,m); reconstructions h_i Wr with Wr (k,d). Returns
// (1/2t) sum_i [ ||x_i F Wp - y_i||^2 + ||x_i F Wr - x_i||^2 ].
// A standalone pedagogical function, not wired into training.
double linear_sae_objective(const Tensor<double>& F, const Tensor<double>& Wp,
                            const Tensor<double>& Wr, const Tensor<double>& X,
                            const Tensor<double>& Y);

}  // namespace hcae
