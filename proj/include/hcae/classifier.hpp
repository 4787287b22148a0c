// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcae/datasets.hpp"
#include "hcae/nn/history.hpp"
#include "hcae/nn/layers.hpp"

namespace hcae {

// Binary patch classifier: pluggable backbone + fixed head
// (global average pool -> dense(1) -> sigmoid).
//
// The default "scratch-small-cnn" backbone is conv blocks
// [3x3 conv -> batch norm -> ReLU -> 2x2 max pool] with the given widths,
// followed by a learned spatial gate. The gate exists because the head pools
// globally: without some position-dependent weighting the model could not
// distinguish structure inside the center window from structure outside it.
// A pretrained backbone can be substituted by loading a classifier
// checkpoint whose arch carries different widths/flags.
struct ClassifierSpec {
  std::string backbone = "scratch-small-cnn";
  int input_h = 96, input_w = 96, input_c = 3;
  std::vector<int> widths = {12, 24, 48};
  bool spatial_gate = true;

  void validate() const;
  nlohmann::json to_json() const;
  static ClassifierSpec from_json(const nlohmann::json& j);
};

enum class Scope { head, top_block, all, custom };

std::string scope_name(Scope s);
Scope scope_from_name(const std::string& name);

struct StageSpec {
  int epochs = 1;
  Scope scope = Scope::head;
  std::vector<std::string> custom_blocks;  // block tags when scope == custom
  double lr = 1e-3;
  bool augment = false;
};

// Staged fine-tuning: later stages may only widen the trainable scope.
// Learning rates must stay within [1e-4, 1e-2].
struct FineTuneSchedule {
  std::vector<StageSpec> stages;

  void validate(const ClassifierSpec& spec) const;
  // The published large-scale schedule shape (80 epochs head-only, 120 with
  // the top block, then 100 more with augmentation). Provided as a preset
  // for real-data runs; the desk-scale configs use much shorter stages.
  static FineTuneSchedule reference_preset();
};

template <typename T>
struct Classifier {
  ClassifierSpec spec;
  uint64_t seed = 0;
  nn::Sequential<T> net;

  std::vector<nn::ParamGroup<T>*> params() { return net.params(); }
  std::vector<const nn::ParamGroup<T>*> params() const { return net.params(); }
};

// Block tags a scope resolves to, given the spec ("block1".."blockB",
// "gate", "head").
std::vector<std::string> scope_blocks(const ClassifierSpec& spec, Scope scope,
                                      const std::vector<std::string>& custom = {});

// Deterministic build; backbone groups start non-trainable, head trainable.
template <typename T>
Classifier<T> build_classifier(const ClassifierSpec& spec, uint64_t seed);

// Toggle the trainable flag of every non-statistic group whose id starts
// with one of the given block tags. Throws if nothing matches.
template <typename T>
void set_trainable(Classifier<T>& clf, const std::vector<std::string>& block_tags, bool flag);

template <typename T>
T predict(const Classifier<T>& clf, const ImagePatch& patch);
// Probabilities in input order.
template <typename T>
std::vector<T> predict_batch(Classifier<T>& clf, const LabeledDataset& ds, int batch_size = 64);
// Raw tensor variant used by the ensemble.
template <typename T>
Tensor<T> classifier_forward(Classifier<T>& clf, const Tensor<T>& x, nn::Phase phase,
                             bool record);

enum class CheckpointPolicy { best_val_loss, last };

struct ClfTrainOptions {
  int batch_size = 32;
  uint64_t seed = 0;
  CheckpointPolicy policy = CheckpointPolicy::best_val_loss;
};

// Executes the schedule stage by stage (binary cross-entropy, Adam). Only
// the stage scope receives updates; history rows are tagged with the stage.
template <typename T>
nn::TrainingHistory train_classifier(Classifier<T>& clf, const LabeledDataset& train,
                                     const LabeledDataset& val, const FineTuneSchedule& schedule,
                                     const ClfTrainOptions& opts);

template <typename T>
void save_classifier(const Classifier<T>& clf, const std::filesystem::path& dir,
                     const nlohmann::json& extra = nlohmann::json::object());
template <typename T>
Classifier<T> load_classifier(const std::filesystem::path& dir);

}  // namespace hcae
