#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pipa/image.hpp"
#include "pipa/model.hpp"

namespace pipa::eval {

/// C x C pixel counts, entry (g, p) = ground truth g predicted p. Ignore
/// pixels in the ground truth are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  int classes() const { return classes_; }
  std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * classes_ + pred]; }
  std::uint64_t total() const;

  /// Throws std::invalid_argument on shape mismatch or out-of-range ids.
  void accumulate(const LabelMap& pred, const LabelMap& gt);
  void merge(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

struct IoUReport {
  std::vector<std::optional<double>> per_class;  ///< nullopt: class absent from gt and pred
  double mean = 0.0;                             ///< over present classes
};

/// IoU_c = TP / (TP + FP + FN). Throws std::domain_error if every class is absent.
IoUReport miou(const ConfusionMatrix& cm);

/// Per-pixel argmax of the segmentation path.
std::vector<LabelMap> predict(const model::SegmentationNet& net, std::span<const Image> images);

ConfusionMatrix evaluate(const model::SegmentationNet& net, std::span<const Sample> samples, int batch_size = 16);

std::string report_json(const IoUReport& report, const ConfusionMatrix& cm);
std::string report_table(const IoUReport& report);

}  // namespace pipa::eval
