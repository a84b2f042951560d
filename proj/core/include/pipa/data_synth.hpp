#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pipa/image.hpp"
#include "pipa/rng.hpp"

namespace pipa::data {

/// Scene layout knobs shared by both domains.
struct SceneParams {
  double shape_density = 3.0;  ///< mean number of extra shapes beyond one per class
  int min_size = 5;            ///< smallest shape half-extent, pixels
  int max_size = 14;           ///< largest shape half-extent, pixels
};

/// Photometric shift applied on top of the rendered scene. All zero is the
/// identity; none of these fields touches geometry or labels.
struct ShiftParams {
  double hue_rotation = 0.0;            ///< degrees, [0, 360)
  double contrast_change = 0.0;         ///< contrast factor is 1 + value, [-0.9, 1]
  double noise_sigma = 0.0;             ///< additive Gaussian noise, [0, 0.5]
  double illumination_amplitude = 0.0;  ///< linear brightness ramp amplitude, [0, 1]

  bool is_identity() const {
    return hue_rotation == 0.0 && contrast_change == 0.0 && noise_sigma == 0.0 && illumination_amplitude == 0.0;
  }
};

struct DomainSpec {
  std::string name = "source";
  int class_count = 5;
  int height = 64;
  int width = 64;
  SceneParams scene;
  ShiftParams shift;
  int sample_count = 1000;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument with a diagnostic naming the bad field.
  void validate() const;
};

/// Renders sample `index` of the domain. Pure in (spec, index).
Sample generate_sample(const DomainSpec& spec, int index);

std::vector<Sample> generate_domain(const DomainSpec& spec);

/// Photometric augmentation knobs; zero strengths are the identity.
struct AugmentParams {
  double brightness = 0.3;
  double contrast = 0.4;
  double saturation = 0.2;
  double hue = 0.15;  ///< fraction of a full turn
  double blur_sigma_max = 1.0;
  double blur_probability = 0.5;
};

Image augment(const Image& img, const AugmentParams& params, Rng& rng);

/// Separable Gaussian blur with edge clamping; sigma <= 0 returns the input.
Image gaussian_blur(const Image& img, double sigma);

/// Hue rotation in degrees via HSV.
void rotate_hue(Image& img, double degrees);

// ---- on-disk layout -------------------------------------------------------
//
// <root>/manifest                       key = value text
// <root>/<domain>/images/<idx>.ppm      binary P6, 8-bit RGB
// <root>/<domain>/labels/<idx>.pgm      binary P5, 8-bit class ids

inline constexpr const char* kRasterFormat = "netpbm-8bit (images P6 .ppm, labels P5 .pgm)";

using Manifest = std::map<std::string, std::string>;

/// Writes one domain's rasters and returns its SHA-256 over all raster bytes
/// in index order.
std::string write_domain(const std::filesystem::path& root, const DomainSpec& spec,
                         const std::vector<Sample>& samples);

/// Generates and writes source and target domains plus the manifest.
Manifest write_dataset(const std::filesystem::path& root, const DomainSpec& source, const DomainSpec& target);

Manifest read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root, const Manifest& manifest);

/// Loads a domain listed in the manifest and verifies its checksum.
std::vector<Sample> load_domain(const std::filesystem::path& root, const std::string& name);

DomainSpec spec_from_manifest(const Manifest& manifest, const std::string& name);

void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_pgm(const std::filesystem::path& path);

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace pipa::data
