// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include "hcae/classifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <set>

#include "hcae/errors.hpp"
#include "hcae/metrics.hpp"
#include "hcae/nn/batching.hpp"
#include "hcae/nn/checkpoint.hpp"
#include "hcae/nn/loss.hpp"
#include "hcae/nn/optimizer.hpp"

namespace hcae {

using nn::Phase;
using nlohmann::json;

void ClassifierSpec::validate() const {
  if (backbone != "scratch-small-cnn")
    throw std::invalid_argument("unknown backbone '" + backbone + "'");
  if (input_h <= 0 || input_w <= 0 || input_c <= 0)
    throw std::invalid_argument("ClassifierSpec: input dims must be positive");
  if (widths.empty()) throw std::invalid_argument("ClassifierSpec: widths must be non-empty");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("ClassifierSpec: widths must be positive");
  const int b = static_cast<int>(widths.size());
  if (b >= 31 || input_h % (1 << b) != 0 || input_w % (1 << b) != 0)
    throw std::invalid_argument("ClassifierSpec: input dims must divide by 2^blocks");
}

json ClassifierSpec::to_json() const {
  return json{{"backbone", backbone},
              {"input", {input_h, input_w, input_c}},
              {"widths", widths},
              {"spatial_gate", spatial_gate}};
}

ClassifierSpec ClassifierSpec::from_json(const json& j) {
  ClassifierSpec s;
  s.backbone = j.at("backbone").get<std::string>();
  const auto in = j.at("input").get<std::vector<int>>();
  if (in.size() != 3) throw std::invalid_argument("ClassifierSpec: bad input triple");
  s.input_h = in[0];
  s.input_w = in[1];
  s.input_c = in[2];
  s.widths = j.at("widths").get<std::vector<int>>();
  s.spatial_gate = j.value("spatial_gate", true);
  s.validate();
  return s;
}

std::string scope_name(Scope s) {
  switch (s) {
    case Scope::head: return "head";
    case Scope::top_block: return "top-block";
    case Scope::all: return "all";
    case Scope::custom: return "custom";
  }
  return "?";
}

Scope scope_from_name(const std::string& name) {
  if (name == "head") return Scope::head;
  if (name == "top-block" || name == "top_block") return Scope::top_block;
  if (name == "all") return Scope::all;
  if (name == "custom") return Scope::custom;
  throw std::invalid_argument("unknown scope '" + name + "'");
}

std::vector<std::string> scope_blocks(const ClassifierSpec& spec, Scope scope,
                                      const std::vector<std::string>& custom) {
  const int b = static_cast<int>(spec.widths.size());
  switch (scope) {
    case Scope::head:
      return {"head"};
    case Scope::top_block: {
      std::vector<std::string> out = {"head", "block" + std::to_string(b)};
      if (spec.spatial_gate) out.push_back("gate");
      return out;
    }
    case Scope::all: {
      std::vector<std::string> out = {"head"};
      if (spec.spatial_gate) out.push_back("gate");
      for (int i = 1; i <= b; ++i) out.push_back("block" + std::to_string(i));
      return out;
    }
    case Scope::custom:
      if (custom.empty()) throw std::invalid_argument("custom scope with no blocks");
      return custom;
  }
  return {};
}

void FineTuneSchedule::validate(const ClassifierSpec& spec) const {
  if (stages.empty()) throw std::invalid_argument("FineTuneSchedule: schedule must be non-empty");
  std::set<std::string> prev;
  for (size_t i = 0; i < stages.size(); ++i) {
    const StageSpec& st = stages[i];
    if (st.epochs < 1)
      throw std::invalid_argument("FineTuneSchedule: stage " + std::to_string(i) +
                                  " epochs must be >= 1");
    if (!(st.lr >= 1e-4 && st.lr <= 1e-2))
      throw std::invalid_argument("FineTuneSchedule: stage " + std::to_string(i) +
                                  " lr must lie in [1e-4, 1e-2]");
    const auto blocks = scope_blocks(spec, st.scope, st.custom_blocks);
    std::set<std::string> cur(blocks.begin(), blocks.end());
    if (!std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()))
      throw std::invalid_argument("FineTuneSchedule: stage " + std::to_string(i) +
                                  " narrows the trainable scope; stages must widen");
    prev = std::move(cur);
  }
}

FineTuneSchedule FineTuneSchedule::reference_preset() {
  FineTuneSchedule s;
  s.stages = {StageSpec{80, Scope::head, {}, 1e-3, false},
              StageSpec{120, Scope::top_block, {}, 1e-4, false},
              StageSpec{100, Scope::top_block, {}, 1e-4, true}};
  return s;
}

template <typename T>
Classifier<T> build_classifier(const ClassifierSpec& spec, uint64_t seed) {
  spec.validate();
  Classifier<T> clf;
  clf.spec = spec;
  clf.seed = seed;

  uint64_t layer_idx = 0;
  auto layer_rng = [&]() { return Rng(derive_seed(seed, layer_idx++)); };

  int ch = spec.input_c;
  int h = spec.input_h, w = spec.input_w;
  for (size_t b = 0; b < spec.widths.size(); ++b) {
    const std::string tag = "block" + std::to_string(b + 1);
    const int width = spec.widths[b];
    Rng r = layer_rng();
    clf.net.add(std::make_unique<nn::Conv2D<T>>(tag + ".conv", ch, width, 3, r));
    clf.net.add(std::make_unique<nn::BatchNorm<T>>(tag + ".bn", width));
    clf.net.add(std::make_unique<nn::ReLU<T>>(tag + ".relu"));
    clf.net.add(std::make_unique<nn::MaxPool2x2<T>>(tag + ".pool"));
    ch = width;
    h /= 2;
    w /= 2;
  }
  if (spec.spatial_gate) clf.net.add(std::make_unique<nn::SpatialGate<T>>("gate", h, w));
  clf.net.add(std::make_unique<nn::GlobalAvgPool<T>>("gap"));
  Rng r = layer_rng();
  clf.net.add(std::make_unique<nn::Dense<T>>("head.fc", ch, 1, r));
  clf.net.add(std::make_unique<nn::Sigmoid<T>>("head.sigmoid"));

  // Transfer-learning posture: backbone frozen, head trainable.
  for (auto* g : clf.net.params())
    if (!g->statistic) g->trainable = g->id.rfind("head", 0) == 0;
  return clf;
}

template <typename T>
void set_trainable(Classifier<T>& clf, const std::vector<std::string>& block_tags, bool flag) {
  if (block_tags.empty()) throw std::invalid_argument("set_trainable: empty selector");
  size_t touched = 0;
  for (auto* g : clf.net.params()) {
    if (g->statistic) continue;
    for (const auto& tag : block_tags) {
      if (g->id.rfind(tag + ".", 0) == 0 || g->id == tag) {
        g->trainable = flag;
        ++touched;
        break;
      }
    }
  }
  if (touched == 0)
    throw std::invalid_argument("set_trainable: selector matched no parameter group");
}

template <typename T>
Tensor<T> classifier_forward(Classifier<T>& clf, const Tensor<T>& x, Phase phase, bool record) {
  if (x.rank() != 4 || x.dim(1) != clf.spec.input_h || x.dim(2) != clf.spec.input_w ||
      x.dim(3) != clf.spec.input_c)
    throw std::invalid_argument("classifier: input geometry mismatch, got " + x.shape_str());
  return clf.net.forward(x, phase, record);
}

template <typename T>
T predict(const Classifier<T>& clf, const ImagePatch& patch) {
  if (patch.height != clf.spec.input_h || patch.width != clf.spec.input_w ||
      patch.channels != clf.spec.input_c)
    throw std::invalid_argument("predict: patch geometry mismatch");
  Tensor<T> x = nn::patch_to_batch<T>(patch);
  auto& net = const_cast<nn::Sequential<T>&>(clf.net);
  const Tensor<T> p = net.forward(x, Phase::eval, false);
  return p[0];
}

template <typename T>
std::vector<T> predict_batch(Classifier<T>& clf, const LabeledDataset& ds, int batch_size) {
  std::vector<T> out;
  out.reserve(ds.size());
  std::vector<size_t> idx;
  for (size_t start = 0; start < ds.size(); start += static_cast<size_t>(batch_size)) {
    idx.clear();
    for (size_t i = start; i < std::min(ds.size(), start + static_cast<size_t>(batch_size)); ++i)
      idx.push_back(i);
    Tensor<T> x = nn::assemble_batch<T>(ds, idx);
    const Tensor<T> p = classifier_forward(clf, x, Phase::eval, false);
    for (int64_t i = 0; i < p.size(); ++i) out.push_back(p[i]);
  }
  return out;
}

namespace {

template <typename T>
struct ValMetrics {
  double loss, accuracy, auc;
};

template <typename T>
ValMetrics<T> validate_classifier(Classifier<T>& clf, const LabeledDataset& val, int batch_size) {
  const std::vector<T> probs = predict_batch(clf, val, batch_size);
  Tensor<T> p({static_cast<int>(probs.size()), 1});
  std::vector<int> labels;
  labels.reserve(val.size());
  for (const auto& s : val.samples) labels.push_back(s.label);
  for (size_t i = 0; i < probs.size(); ++i) p[static_cast<int64_t>(i)] = probs[i];
  ValMetrics<T> m{};
  m.loss = nn::bce_loss(p, labels);
  ScoredSet set;
  set.labels = labels;
  set.scores.assign(probs.begin(), probs.end());
  m.accuracy = accuracy_f1(set).accuracy;
  m.auc = set.both_classes() ? auc_roc(set) : std::numeric_limits<double>::quiet_NaN();
  return m;
}

}  // namespace

template <typename T>
nn::TrainingHistory train_classifier(Classifier<T>& clf, const LabeledDataset& train,
                                     const LabeledDataset& val, const FineTuneSchedule& schedule,
                                     const ClfTrainOptions& opts) {
  schedule.validate(clf.spec);
  if (train.empty() || val.empty()) throw std::invalid_argument("train_classifier: empty dataset");
  if (opts.batch_size < 1) throw std::invalid_argument("train_classifier: batch_size must be >= 1");

  auto groups = clf.net.params();
  nn::TrainingHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor<T>> best_snapshot;

  int epoch_counter = 0;
  for (size_t stage_idx = 0; stage_idx < schedule.stages.size(); ++stage_idx) {
    const StageSpec& stage = schedule.stages[stage_idx];
    // Freeze everything, then open the stage scope. Fresh optimizer state per
    // stage (the trainable set changed).
    for (auto* g : groups)
      if (!g->statistic) g->trainable = false;
    set_trainable(clf, scope_blocks(clf.spec, stage.scope, stage.custom_blocks), true);
    nn::Adam<T> opt(groups, static_cast<T>(stage.lr));

    for (int e = 1; e <= stage.epochs; ++e) {
      ++epoch_counter;
      const auto t0 = std::chrono::steady_clock::now();
      Rng shuffle_rng(derive_seed(opts.seed, (stage_idx << 24) + static_cast<uint64_t>(e)));
      Rng augment_rng(derive_seed(opts.seed ^ 0x5eedu, (stage_idx << 24) + static_cast<uint64_t>(e)));
      const auto batches = nn::make_batches(nn::shuffled_indices(train.size(), shuffle_rng),
                                            static_cast<size_t>(opts.batch_size));
      double train_acc = 0.0;
      for (const auto& idx : batches) {
        std::vector<int> labels;
        Tensor<T> x =
            nn::assemble_batch<T>(train, idx, &labels, stage.augment ? &augment_rng : nullptr);
        Tensor<T> p = classifier_forward(clf, x, Phase::train, true);
        Tensor<T> grad;
        const double loss = nn::bce_loss(p, labels, &grad);
        if (!std::isfinite(loss))
          throw NumericalError("train_classifier: non-finite loss at stage " +
                               std::to_string(stage_idx) + " epoch " + std::to_string(e));
        train_acc += loss * static_cast<double>(idx.size());
        opt.zero_grads();
        clf.net.backward(grad);
        opt.step();
      }

      nn::EpochRecord rec;
      rec.epoch = epoch_counter;
      rec.stage = static_cast<int>(stage_idx);
      rec.train_loss = train_acc / static_cast<double>(train.size());
      const auto vm = validate_classifier(clf, val, opts.batch_size);
      rec.val_loss = vm.loss;
      rec.val_accuracy = vm.accuracy;
      rec.val_auc = vm.auc;
      if (!std::isfinite(rec.val_loss))
        throw NumericalError("train_classifier: non-finite validation loss at stage " +
                             std::to_string(stage_idx) + " epoch " + std::to_string(e));
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      history.epochs.push_back(rec);

      if (opts.policy == CheckpointPolicy::best_val_loss && rec.val_loss < best_val) {
        best_val = rec.val_loss;
        best_snapshot = nn::snapshot_params(groups);
        history.best_epoch = epoch_counter;
      }
    }
  }

  if (opts.policy == CheckpointPolicy::best_val_loss && !best_snapshot.empty()) {
    // Restore values only; the trainable mask keeps its final-stage state.
    nn::restore_params(groups, best_snapshot);
  } else {
    history.best_epoch = epoch_counter;
  }
  clf.net.clear_tape();
  return history;
}

template <typename T>
void save_classifier(const Classifier<T>& clf, const std::filesystem::path& dir,
                     const json& extra) {
  nn::CheckpointMeta meta;
  meta.kind = "classifier";
  meta.seed = clf.seed;
  meta.arch = clf.spec.to_json();
  meta.extra = extra;
  const auto groups = clf.params();
  nn::save_checkpoint<T>(dir, groups, meta);
}

template <typename T>
Classifier<T> load_classifier(const std::filesystem::path& dir) {
  const auto meta = nn::read_checkpoint_meta(dir);
  if (meta.kind != "classifier")
    throw IoError("checkpoint at " + dir.string() + " is '" + meta.kind +
                  "', expected 'classifier'");
  Classifier<T> clf = build_classifier<T>(ClassifierSpec::from_json(meta.arch), meta.seed);
  nn::load_checkpoint_params<T>(dir, clf.net.params());
  return clf;
}

#define HCAE_INSTANTIATE_CLF(T)                                                             \
  template struct Classifier<T>;                                                            \
  template Classifier<T> build_classifier<T>(const ClassifierSpec&, uint64_t);              \
  template void set_trainable<T>(Classifier<T>&, const std::vector<std::string>&, bool);    \
  template Tensor<T> classifier_forward<T>(Classifier<T>&, const Tensor<T>&, Phase, bool);  \
  template T predict<T>(const Classifier<T>&, const ImagePatch&);                           \
  template std::vector<T> predict_batch<T>(Classifier<T>&, const LabeledDataset&, int);     \
  template nn::TrainingHistory train_classifier<T>(Classifier<T>&, const LabeledDataset&,   \
                                                   const LabeledDataset&,                   \
                                                   const FineTuneSchedule&,                 \
                                                   const ClfTrainOptions&);                 \
  template void save_classifier<T>(const Classifier<T>&, const std::filesystem::path&,      \
                                   const json&);                                            \
  template Classifier<T> load_classifier<T>(const std::filesystem::path&);

HCAE_INSTANTIATE_CLF(float)
HCAE_INSTANTIATE_CLF(double)

#undef HCAE_INSTANTIATE_CLF

}  // namespace hcae
