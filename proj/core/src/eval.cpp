#include "pipa/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace pipa::eval {

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes), counts_(static_cast<std::size_t>(classes) * classes, 0) {
  if (classes < 1) throw std::invalid_argument("confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw std::invalid_argument("accumulate: prediction and ground truth shapes differ");
  }
  const auto p = pred.values();
  const auto g = gt.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == kIgnore) continue;
    if (g[i] >= classes_ || p[i] >= classes_) throw std::invalid_argument("accumulate: class id out of range");
    ++counts_[static_cast<std::size_t>(g[i]) * classes_ + p[i]];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("merge: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

IoUReport miou(const ConfusionMatrix& cm) {
  const int c = cm.classes();
  IoUReport r;
  r.per_class.resize(c);
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < c; ++k) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (int j = 0; j < c; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    const std::uint64_t tp = cm.at(k, k);
    const std::uint64_t denom = row + col - tp;
    if (denom == 0) continue;
    r.per_class[k] = static_cast<double>(tp) / static_cast<double>(denom);
    sum += *r.per_class[k];
    ++present;
  }
  if (present == 0) throw std::domain_error("miou: every class is absent");
  r.mean = sum / present;
  return r;
}

std::vector<LabelMap> predict(const model::SegmentationNet& net, std::span<const Image> images) {
  const Tensor scores = model::forward_segment(net, stack_images(images));
  std::vector<LabelMap> out;
  const std::size_t plane = scores.plane();
  for (int n = 0; n < scores.n; ++n) {
    LabelMap lab(scores.h, scores.w);
    const float* s = scores.sample(n);
    for (std::size_t p = 0; p < plane; ++p) {
      int best = 0;
      for (int k = 1; k < scores.c; ++k) {
        if (s[k * plane + p] > s[best * plane + p]) best = k;
      }
      lab.values()[p] = static_cast<std::uint8_t>(best);
    }
    out.push_back(std::move(lab));
  }
  return out;
}

ConfusionMatrix evaluate(const model::SegmentationNet& net, std::span<const Sample> samples, int batch_size) {
  ConfusionMatrix cm(net.config.classes);
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<Image> images;
    for (std::size_t i = start; i < end; ++i) images.push_back(samples[i].image);
    const auto preds = predict(net, images);
    for (std::size_t i = start; i < end; ++i) cm.accumulate(preds[i - start], samples[i].label);
  }
  return cm;
}

std::string report_json(const IoUReport& report, const ConfusionMatrix& cm) {
  nlohmann::json j;
  j["miou"] = report.mean;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& v : report.per_class) per.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  j["per_class_iou"] = per;
  nlohmann::json rows = nlohmann::json::array();
  for (int g = 0; g < cm.classes(); ++g) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < cm.classes(); ++p) row.push_back(cm.at(g, p));
    rows.push_back(row);
  }
  j["confusion_matrix"] = rows;
  j["scored_pixels"] = cm.total();
  return j.dump(2);
}

std::string report_table(const IoUReport& report) {
  std::string head = "|";
  std::string rule = "|";
  std::string vals = "|";
  char buf[32];
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    std::snprintf(buf, sizeof(buf), " c%-4zu |", k);
    head += buf;
    rule += "-------|";
    if (report.per_class[k]) {
      std::snprintf(buf, sizeof(buf), " %5.1f |", 100.0 * *report.per_class[k]);
    } else {
      std::snprintf(buf, sizeof(buf), "   n/a |");
    }
    vals += buf;
  }
  std::snprintf(buf, sizeof(buf), " %5.1f |", 100.0 * report.mean);
  return head + " mIoU  |\n" + rule + "-------|\n" + vals + buf + "\n";
}

}  // namespace pipa::eval
