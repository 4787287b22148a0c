// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcae/autoencoder.hpp"
#include "hcae/classifier.hpp"
#include "hcae/datasets.hpp"

// Evaluation metrics implemented from scratch, and the three-way comparison
// report (classifier scores on originals vs both reconstruction streams).

namespace hcae {

enum class ScoreSource { original, unsup_recon, sup_recon };
std::string score_source_name(ScoreSource s);

struct ScoredSet {
  std::vector<double> scores;  // probabilities
  std::vector<int> labels;     // {0,1}
  ScoreSource source = ScoreSource::original;

  void validate() const;       // equal lengths, binary labels
  bool both_classes() const;
};

double mse(const ImagePatch& a, const ImagePatch& b);

// 10*log10(peak^2 / MSE); identical inputs return +infinity.
double psnr(const ImagePatch& a, const ImagePatch& b, double peak = 1.0);
inline bool psnr_is_infinite(double v) { return std::isinf(v); }

// Mean local SSIM over Gaussian-weighted windows (default 11x11, sigma 1.5,
// k1=0.01, k2=0.03, dynamic range 1). Channels are averaged.
double ssim(const ImagePatch& a, const ImagePatch& b, int window = 11, double k1 = 0.01,
            double k2 = 0.03);

// Rank/trapezoidal AUC with half credit for ties; equals
// P(score_pos > score_neg) + 0.5 P(tie). Requires both classes.
double auc_roc(const ScoredSet& set);

struct AccuracyF1 {
  double accuracy = 0.0;
  double f1 = 0.0;
};
// Threshold in (0,1); predictions are score >= threshold. F1 with zero
// predicted positives is defined as 0.
AccuracyF1 accuracy_f1(const ScoredSet& set, double threshold = 0.5);

struct EvalRow {
  ScoreSource source;
  double auc = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double mean_mse = 0.0;
  double mean_psnr = 0.0;  // +inf for exact reconstructions
  double mean_ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // original, unsup_recon, sup_recon
  std::string dataset_id;
  nlohmann::json checkpoint_ids = nlohmann::json::object();

  const EvalRow& row(ScoreSource s) const;
  nlohmann::json to_json() const;  // PSNR of exact reconstructions as "inf"
  static EvalReport from_json(const nlohmann::json& j);
  std::string to_table() const;    // human-readable rendering
};

// Applies the classifier to the originals and to both reconstruction
// streams; distortion metrics compare each reconstruction to the original.
template <typename T>
EvalReport evaluate_triplet(Classifier<T>& clf, Autoencoder<T>& ae_unsup,
                            Autoencoder<T>& ae_sup, const LabeledDataset& val,
                            int batch_size = 32);

// Bar chart of the per-source AUC values, written as a PPM image.
void render_auc_chart(const EvalReport& report, const std::filesystem::path& path);

}  // namespace hcae
