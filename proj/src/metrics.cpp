// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include "hcae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hcae/errors.hpp"
#include "hcae/image_io.hpp"
#include "hcae/nn/batching.hpp"

namespace hcae {

using nlohmann::json;

std::string score_source_name(ScoreSource s) {
  switch (s) {
    case ScoreSource::original: return "original";
    case ScoreSource::unsup_recon: return "unsup_recon";
    case ScoreSource::sup_recon: return "sup_recon";
  }
  return "?";
}

void ScoredSet::validate() const {
  if (scores.size() != labels.size())
    throw std::invalid_argument("ScoredSet: score/label count mismatch");
  if (scores.empty()) throw std::invalid_argument("ScoredSet: empty");
  for (int l : labels)
    if (l != 0 && l != 1) throw std::invalid_argument("ScoredSet: labels must be 0/1");
}

bool ScoredSet::both_classes() const {
  bool pos = false, neg = false;
  for (int l : labels) (l ? pos : neg) = true;
  return pos && neg;
}

namespace {

void check_same_geometry(const ImagePatch& a, const ImagePatch& b, const char* who) {
  if (!a.same_geometry(b)) throw std::invalid_argument(std::string(who) + ": geometry mismatch");
}

}  // namespace

double mse(const ImagePatch& a, const ImagePatch& b) {
  check_same_geometry(a, b, "mse");
  double acc = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = double(a.pixels[i]) - double(b.pixels[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.pixels.size());
}

double psnr(const ImagePatch& a, const ImagePatch& b, double peak) {
  if (!(peak > 0)) throw std::invalid_argument("psnr: peak must be positive");
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

double ssim(const ImagePatch& a, const ImagePatch& b, int window, double k1, double k2) {
  check_same_geometry(a, b, "ssim");
  if (window < 1 || window > std::min(a.height, a.width))
    throw std::invalid_argument("ssim: window must fit inside the patch");

  // Gaussian window, sigma 1.5, normalized to sum 1.
  std::vector<double> g(static_cast<size_t>(window) * window);
  const double sigma = 1.5;
  const int half = window / 2;
  double gsum = 0.0;
  for (int y = 0; y < window; ++y)
    for (int x = 0; x < window; ++x) {
      const double dy = y - half, dx = x - half;
      const double v = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      g[static_cast<size_t>(y) * window + x] = v;
      gsum += v;
    }
  for (auto& v : g) v /= gsum;

  const double c1 = (k1 * 1.0) * (k1 * 1.0);
  const double c2 = (k2 * 1.0) * (k2 * 1.0);

  double total = 0.0;
  int64_t count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int y0 = 0; y0 + window <= a.height; ++y0)
      for (int x0 = 0; x0 + window <= a.width; ++x0) {
        double ma = 0, mb = 0;
        for (int y = 0; y < window; ++y)
          for (int x = 0; x < window; ++x) {
            const double w = g[static_cast<size_t>(y) * window + x];
            ma += w * a.at(y0 + y, x0 + x, c);
            mb += w * b.at(y0 + y, x0 + x, c);
          }
        double va = 0, vb = 0, cov = 0;
        for (int y = 0; y < window; ++y)
          for (int x = 0; x < window; ++x) {
            const double w = g[static_cast<size_t>(y) * window + x];
            const double da = a.at(y0 + y, x0 + x, c) - ma;
            const double db = b.at(y0 + y, x0 + x, c) - mb;
            va += w * da * da;
            vb += w * db * db;
            cov += w * da * db;
          }
        const double num = (2 * ma * mb + c1) * (2 * cov + c2);
        const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
        ++count;
      }
  return total / static_cast<double>(count);
}

double auc_roc(const ScoredSet& set) {
  set.validate();
  if (!set.both_classes())
    throw std::invalid_argument("auc_roc: both classes must be present in the labels");

  // Sort by descending score; advance through tie groups so that ties donate
  // the trapezoid's half credit.
  std::vector<size_t> order(set.scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    return set.scores[i] > set.scores[j];
  });

  const double total_pos = static_cast<double>(std::count(set.labels.begin(), set.labels.end(), 1));
  const double total_neg = static_cast<double>(set.labels.size()) - total_pos;

  double auc = 0.0;
  double tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    double tie_tp = 0, tie_fp = 0;
    while (j < order.size() && set.scores[order[j]] == set.scores[order[i]]) {
      (set.labels[order[j]] ? tie_tp : tie_fp) += 1;
      ++j;
    }
    const double tp2 = tp + tie_tp, fp2 = fp + tie_fp;
    auc += (fp2 - fp) / total_neg * (tp + tp2) / (2.0 * total_pos);
    tp = tp2;
    fp = fp2;
    i = j;
  }
  return auc;
}

AccuracyF1 accuracy_f1(const ScoredSet& set, double threshold) {
  set.validate();
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("accuracy_f1: threshold must be in (0,1)");
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (size_t i = 0; i < set.scores.size(); ++i) {
    const bool pred = set.scores[i] >= threshold;
    const bool truth = set.labels[i] == 1;
    if (pred && truth)
      ++tp;
    else if (pred && !truth)
      ++fp;
    else if (!pred && truth)
      ++fn;
    else
      ++tn;
  }
  AccuracyF1 out;
  out.accuracy = static_cast<double>(tp + tn) / static_cast<double>(set.scores.size());
  const int64_t denom = 2 * tp + fp + fn;
  out.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  return out;
}

const EvalRow& EvalReport::row(ScoreSource s) const {
  for (const auto& r : rows)
    if (r.source == s) return r;
  throw std::invalid_argument("EvalReport: missing row " + score_source_name(s));
}

namespace {

json psnr_to_json(double v) {
  if (std::isinf(v)) return json("inf");
  return json(v);
}

double psnr_from_json(const json& j) {
  if (j.is_string()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace

json EvalReport::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows)
    rows_j.push_back(json{{"source", score_source_name(r.source)},
                          {"auc", r.auc},
                          {"accuracy", r.accuracy},
                          {"f1", r.f1},
                          {"mean_mse", r.mean_mse},
                          {"mean_psnr", psnr_to_json(r.mean_psnr)},
                          {"mean_ssim", r.mean_ssim}});
  return json{{"rows", rows_j}, {"dataset_id", dataset_id}, {"checkpoint_ids", checkpoint_ids}};
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport rep;
  rep.dataset_id = j.at("dataset_id").get<std::string>();
  rep.checkpoint_ids = j.value("checkpoint_ids", json::object());
  for (const auto& r : j.at("rows")) {
    EvalRow row;
    const std::string src = r.at("source").get<std::string>();
    if (src == "original")
      row.source = ScoreSource::original;
    else if (src == "unsup_recon")
      row.source = ScoreSource::unsup_recon;
    else if (src == "sup_recon")
      row.source = ScoreSource::sup_recon;
    else
      throw IoError("EvalReport: unknown source '" + src + "'");
    row.auc = r.at("auc").get<double>();
    row.accuracy = r.at("accuracy").get<double>();
    row.f1 = r.at("f1").get<double>();
    row.mean_mse = r.at("mean_mse").get<double>();
    row.mean_psnr = psnr_from_json(r.at("mean_psnr"));
    row.mean_ssim = r.at("mean_ssim").get<double>();
    rep.rows.push_back(row);
  }
  return rep;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << "source        auc     accuracy  f1      mse       psnr     ssim\n";
  for (const auto& r : rows) {
    char line[160];
    if (std::isinf(r.mean_psnr))
      std::snprintf(line, sizeof line, "%-12s  %.4f  %.4f    %.4f  %.6f  inf      %.4f\n",
                    score_source_name(r.source).c_str(), r.auc, r.accuracy, r.f1, r.mean_mse,
                    r.mean_ssim);
    else
      std::snprintf(line, sizeof line, "%-12s  %.4f  %.4f    %.4f  %.6f  %7.3f  %.4f\n",
                    score_source_name(r.source).c_str(), r.auc, r.accuracy, r.f1, r.mean_mse,
                    r.mean_psnr, r.mean_ssim);
    os << line;
  }
  return os.str();
}

namespace {

ImagePatch tensor_row_to_patch(const Tensor<float>& batch, int row, int h, int w, int c) {
  ImagePatch p(h, w, c);
  const int64_t stride = int64_t(h) * w * c;
  for (int64_t i = 0; i < stride; ++i) p.pixels[static_cast<size_t>(i)] = batch[row * stride + i];
  return p;
}

template <typename T>
ImagePatch tensor_row_to_patch_t(const Tensor<T>& batch, int row, int h, int w, int c) {
  ImagePatch p(h, w, c);
  const int64_t stride = int64_t(h) * w * c;
  for (int64_t i = 0; i < stride; ++i)
    p.pixels[static_cast<size_t>(i)] = static_cast<float>(batch[row * stride + i]);
  return p;
}

struct DistortionAcc {
  double mse_sum = 0.0;
  double psnr_sum = 0.0;
  int64_t psnr_finite = 0;
  double ssim_sum = 0.0;
  int64_t n = 0;

  void add(const ImagePatch& recon, const ImagePatch& orig) {
    mse_sum += mse(recon, orig);
    const double p = psnr(recon, orig);
    if (std::isfinite(p)) {
      psnr_sum += p;
      ++psnr_finite;
    }
    ssim_sum += ssim(recon, orig);
    ++n;
  }

  void fill(EvalRow& row) const {
    row.mean_mse = mse_sum / static_cast<double>(n);
    // Exact reconstructions are excluded from the PSNR mean; if every sample
    // was exact the row carries the infinity sentinel.
    row.mean_psnr = psnr_finite == 0 ? std::numeric_limits<double>::infinity()
                                     : psnr_sum / static_cast<double>(psnr_finite);
    row.mean_ssim = ssim_sum / static_cast<double>(n);
  }
};

}  // namespace

template <typename T>
EvalReport evaluate_triplet(Classifier<T>& clf, Autoencoder<T>& ae_unsup, Autoencoder<T>& ae_sup,
                            const LabeledDataset& val, int batch_size) {
  if (val.empty()) throw std::invalid_argument("evaluate_triplet: empty validation set");
  const ImagePatch& g = val.samples.front().patch;
  if (g.height != clf.spec.input_h || g.width != clf.spec.input_w || g.channels != clf.spec.input_c)
    throw std::invalid_argument("evaluate_triplet: classifier/input geometry mismatch");
  for (const auto* ae : {&ae_unsup, &ae_sup})
    if (ae->config.input_h != g.height || ae->config.input_w != g.width ||
        ae->config.input_c != g.channels)
      throw std::invalid_argument("evaluate_triplet: autoencoder/input geometry mismatch");

  ScoredSet orig{{}, {}, ScoreSource::original};
  ScoredSet unsup{{}, {}, ScoreSource::unsup_recon};
  ScoredSet sup{{}, {}, ScoreSource::sup_recon};
  DistortionAcc unsup_d, sup_d;

  std::vector<size_t> idx;
  for (size_t start = 0; start < val.size(); start += static_cast<size_t>(batch_size)) {
    idx.clear();
    for (size_t i = start; i < std::min(val.size(), start + static_cast<size_t>(batch_size)); ++i)
      idx.push_back(i);
    std::vector<int> labels;
    Tensor<T> x = nn::assemble_batch<T>(val, idx, &labels);

    const Tensor<T> p0 = classifier_forward(clf, x, nn::Phase::eval, false);
    const Tensor<T> ru = reconstruct_batch(ae_unsup, x, nn::Phase::eval, false);
    const Tensor<T> pu = classifier_forward(clf, ru, nn::Phase::eval, false);
    const Tensor<T> rs = reconstruct_batch(ae_sup, x, nn::Phase::eval, false);
    const Tensor<T> ps = classifier_forward(clf, rs, nn::Phase::eval, false);

    for (size_t i = 0; i < idx.size(); ++i) {
      orig.labels.push_back(labels[i]);
      unsup.labels.push_back(labels[i]);
      sup.labels.push_back(labels[i]);
      orig.scores.push_back(double(p0[static_cast<int64_t>(i)]));
      unsup.scores.push_back(double(pu[static_cast<int64_t>(i)]));
      sup.scores.push_back(double(ps[static_cast<int64_t>(i)]));

      const ImagePatch po = val.samples[idx[i]].patch;
      unsup_d.add(tensor_row_to_patch_t(ru, static_cast<int>(i), g.height, g.width, g.channels),
                  po);
      sup_d.add(tensor_row_to_patch_t(rs, static_cast<int>(i), g.height, g.width, g.channels),
                po);
    }
  }

  EvalReport rep;
  for (auto* set : {&orig, &unsup, &sup}) {
    EvalRow row;
    row.source = set->source;
    row.auc = auc_roc(*set);
    const AccuracyF1 af = accuracy_f1(*set);
    row.accuracy = af.accuracy;
    row.f1 = af.f1;
    if (set->source == ScoreSource::original) {
      row.mean_mse = 0.0;
      row.mean_psnr = std::numeric_limits<double>::infinity();
      row.mean_ssim = 1.0;
    } else if (set->source == ScoreSource::unsup_recon) {
      unsup_d.fill(row);
    } else {
      sup_d.fill(row);
    }
    rep.rows.push_back(row);
  }
  return rep;
}

template EvalReport evaluate_triplet<float>(Classifier<float>&, Autoencoder<float>&,
                                            Autoencoder<float>&, const LabeledDataset&, int);
template EvalReport evaluate_triplet<double>(Classifier<double>&, Autoencoder<double>&,
                                             Autoencoder<double>&, const LabeledDataset&, int);

void render_auc_chart(const EvalReport& report, const std::filesystem::path& path) {
  const int W = 480, H = 320;
  const int margin = 40, base = H - 50;
  ImagePatch img(H, W, 3);
  std::fill(img.pixels.begin(), img.pixels.end(), 1.0f);

  auto put = [&](int y, int x, float r, float g, float b) {
    if (y < 0 || y >= H || x < 0 || x >= W) return;
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = b;
  };

  // Axes.
  for (int x = margin; x < W - margin; ++x) put(base, x, 0, 0, 0);
  for (int y = base - 220; y <= base; ++y) put(y, margin, 0, 0, 0);
  // Gridline at AUC 0.5 and 1.0.
  for (int x = margin; x < W - margin; x += 3) {
    put(base - 110, x, 0.7f, 0.7f, 0.7f);
    put(base - 220, x, 0.7f, 0.7f, 0.7f);
  }

  const float colors[3][3] = {{0.85f, 0.1f, 0.55f},   // original: magenta
                              {0.45f, 0.45f, 0.45f},  // unsupervised: grey
                              {0.15f, 0.35f, 0.85f}}; // supervised: blue
  const int bar_w = 80, gap = 45;
  int x0 = margin + 40;
  for (size_t i = 0; i < report.rows.size() && i < 3; ++i) {
    const int h = static_cast<int>(std::lround(report.rows[i].auc * 220.0));
    for (int y = base - h; y < base; ++y)
      for (int x = x0; x < x0 + bar_w; ++x)
        put(y, x, colors[i][0], colors[i][1], colors[i][2]);
    x0 += bar_w + gap;
  }
  write_image_8bit(path, img);
}

}  // namespace hcae
