#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace pipa {

/// Label value excluded from every loss and metric.
inline constexpr std::uint8_t kIgnore = 255;

/// Three-channel float raster, planar (channel-major) storage, values in [0,1].
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int height, int width, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return values_.empty(); }

  float& at(int c, int y, int x) { return values_[c * plane_size() + static_cast<std::size_t>(y) * width_ + x]; }
  float at(int c, int y, int x) const { return values_[c * plane_size() + static_cast<std::size_t>(y) * width_ + x]; }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  /// Throws std::invalid_argument unless every value is finite and in [0,1].
  void validate() const;

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
};

/// Integer class grid; values are class ids in [0, C) or kIgnore.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int height, int width, std::uint8_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  std::uint8_t& at(int y, int x) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<std::uint8_t> values() { return values_; }
  std::span<const std::uint8_t> values() const { return values_; }

  /// Throws std::invalid_argument if a non-ignore value is >= class_count.
  void validate(int class_count) const;

  bool operator==(const LabelMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> values_;
};

struct Sample {
  Image image;
  LabelMap label;
};

/// Bilinear resize (half-pixel centers, edge clamped).
Image resize_bilinear(const Image& img, int height, int width);

/// Copies the half-open window [x0,x1)x[y0,y1).
Image crop(const Image& img, int x0, int y0, int x1, int y1);

/// Nearest-cell-center downsampling of labels to a stride-k grid.
LabelMap downsample_labels(const LabelMap& labels, int stride);

/// Rounds every value to the nearest multiple of 1/255.
void quantize_8bit(Image& img);

}  // namespace pipa
