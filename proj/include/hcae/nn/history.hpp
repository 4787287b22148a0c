// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

namespace hcae::nn {

struct EpochRecord {
  int epoch = 0;  // 1-based, monotone across the whole run
  int stage = -1; // fine-tuning stage index, -1 when the run has no stages
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
  double val_auc = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // epoch whose parameters were retained

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : epochs) {
      nlohmann::json r{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"seconds", e.seconds}};
      if (e.stage >= 0) r["stage"] = e.stage;
      if (!std::isnan(e.val_loss)) r["val_loss"] = e.val_loss;
      if (!std::isnan(e.val_accuracy)) r["val_accuracy"] = e.val_accuracy;
      if (!std::isnan(e.val_auc)) r["val_auc"] = e.val_auc;
      arr.push_back(std::move(r));
    }
    return nlohmann::json{{"epochs", arr}, {"best_epoch", best_epoch}};
  }
};

}  // namespace hcae::nn
