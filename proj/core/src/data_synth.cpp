#include "pipa/data_synth.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace pipa::data {
namespace fs = std::filesystem;

void DomainSpec::validate() const {
  auto fail = [&](const std::string& what) { throw std::invalid_argument("domain '" + name + "': " + what); };
  if (class_count < 2) fail("class_count must be >= 2, got " + std::to_string(class_count));
  if (class_count > 254) fail("class_count must be <= 254");
  if (sample_count <= 0) fail("sample_count must be > 0, got " + std::to_string(sample_count));
  if (height < 32 || width < 32) fail("height and width must be >= 32");
  if (scene.shape_density < 0.0 || scene.shape_density > 50.0) fail("scene.shape_density must be in [0, 50]");
  if (scene.min_size < 1 || scene.max_size < scene.min_size) fail("scene sizes must satisfy 1 <= min_size <= max_size");
  if (shift.hue_rotation < 0.0 || shift.hue_rotation >= 360.0) fail("shift.hue_rotation must be in [0, 360)");
  if (shift.contrast_change < -0.9 || shift.contrast_change > 1.0) fail("shift.contrast_change must be in [-0.9, 1]");
  if (shift.noise_sigma < 0.0 || shift.noise_sigma > 0.5) fail("shift.noise_sigma must be in [0, 0.5]");
  if (shift.illumination_amplitude < 0.0 || shift.illumination_amplitude > 1.0) {
    fail("shift.illumination_amplitude must be in [0, 1]");
  }
}

namespace {

struct Rgb {
  float r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  double h = 0.0;
  if (d > 0.0) {
    if (mx == r) {
      h = 60.0 * std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
      h = 60.0 * ((b - r) / d + 2.0);
    } else {
      h = 60.0 * ((r - g) / d + 4.0);
    }
  }
  if (h < 0) h += 360.0;
  return {h, mx > 0.0 ? d / mx : 0.0, mx};
}

enum class ShapeKind { kDisk, kBox, kTriangle, kRing };

struct Shape {
  std::uint8_t cls;
  ShapeKind kind;
  double cx, cy, r, aspect;
  double hue, sat, val;
};

struct ClassStyle {
  double hue;
  double stripe_angle;
  double stripe_freq;
};

ClassStyle class_style(int cls, int class_count) {
  const int fg = class_count - 1;
  return {360.0 * (cls - 1) / fg, std::numbers::pi * (cls - 1) / fg, 0.9 + 0.25 * ((cls - 1) % 3)};
}

bool contains(const Shape& s, double x, double y) {
  const double dx = x - s.cx;
  const double dy = y - s.cy;
  switch (s.kind) {
    case ShapeKind::kDisk:
      return dx * dx + dy * dy <= s.r * s.r;
    case ShapeKind::kBox:
      return std::fabs(dx) <= s.r && std::fabs(dy) <= s.r * s.aspect;
    case ShapeKind::kTriangle: {
      if (dy < -s.r || dy > s.r) return false;
      const double half = s.r * (dy + s.r) / (2.0 * s.r);
      return std::fabs(dx) <= half;
    }
    case ShapeKind::kRing: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= s.r * s.r && d2 >= 0.3 * s.r * s.r;
    }
  }
  return false;
}

Shape random_shape(std::uint8_t cls, const DomainSpec& spec, Rng& rng, bool large) {
  std::uniform_real_distribution<double> ux(0.0, spec.width);
  std::uniform_real_distribution<double> uy(0.0, spec.height);
  std::uniform_real_distribution<double> size(spec.scene.min_size, spec.scene.max_size);
  std::uniform_real_distribution<double> aspect(0.5, 1.0);
  std::normal_distribution<double> hue_jitter(0.0, 8.0);
  std::uniform_real_distribution<double> sv(0.55, 0.9);
  Shape s{};
  s.cls = cls;
  s.kind = static_cast<ShapeKind>((cls - 1) % 4);
  s.cx = ux(rng);
  s.cy = uy(rng);
  s.r = large ? spec.scene.max_size : size(rng);
  s.aspect = aspect(rng);
  s.hue = class_style(cls, spec.class_count).hue + hue_jitter(rng);
  s.sat = sv(rng);
  s.val = sv(rng);
  return s;
}

void render(const DomainSpec& spec, const std::vector<Shape>& shapes, double bg_hue, double bg_sat, double bg_val,
            double bg_slope, Sample& out) {
  out.image = Image(spec.height, spec.width);
  out.label = LabelMap(spec.height, spec.width, 0);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const Shape* top = nullptr;
      for (const Shape& s : shapes) {
        if (contains(s, x + 0.5, y + 0.5)) top = &s;
      }
      Rgb rgb{};
      if (top == nullptr) {
        const double v = bg_val + bg_slope * (static_cast<double>(y) / spec.height - 0.5);
        rgb = hsv_to_rgb(bg_hue, bg_sat, std::clamp(v, 0.0, 1.0));
      } else {
        const ClassStyle st = class_style(top->cls, spec.class_count);
        const double t = (x * std::cos(st.stripe_angle) + y * std::sin(st.stripe_angle)) * st.stripe_freq;
        const double v = std::clamp(top->val + 0.12 * std::sin(t), 0.0, 1.0);
        rgb = hsv_to_rgb(top->hue, top->sat, v);
        out.label.at(y, x) = top->cls;
      }
      out.image.at(0, y, x) = rgb.r;
      out.image.at(1, y, x) = rgb.g;
      out.image.at(2, y, x) = rgb.b;
    }
  }
}

void apply_shift(const ShiftParams& shift, Image& img, Rng& rng) {
  if (shift.hue_rotation != 0.0) rotate_hue(img, shift.hue_rotation);
  if (shift.contrast_change != 0.0) {
    const float k = static_cast<float>(1.0 + shift.contrast_change);
    for (float& v : img.values()) v = 0.5f + k * (v - 0.5f);
  }
  if (shift.illumination_amplitude != 0.0) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double a = angle(rng);
    const double ca = std::cos(a);
    const double sa = std::sin(a);
    for (int c = 0; c < Image::kChannels; ++c) {
      for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
          const double u = ((x + 0.5) / img.width() - 0.5) * ca + ((y + 0.5) / img.height() - 0.5) * sa;
          img.at(c, y, x) += static_cast<float>(shift.illumination_amplitude * u);
        }
      }
    }
  }
  if (shift.noise_sigma != 0.0) {
    std::normal_distribution<float> noise(0.0f, static_cast<float>(shift.noise_sigma));
    for (float& v : img.values()) v += noise(rng);
  }
  for (float& v : img.values()) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace

void rotate_hue(Image& img, double degrees) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      auto hsv = rgb_to_hsv(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x));
      const Rgb rgb = hsv_to_rgb(hsv[0] + degrees, hsv[1], hsv[2]);
      img.at(0, y, x) = std::clamp(rgb.r, 0.0f, 1.0f);
      img.at(1, y, x) = std::clamp(rgb.g, 0.0f, 1.0f);
      img.at(2, y, x) = std::clamp(rgb.b, 0.0f, 1.0f);
    }
  }
}

Sample generate_sample(const DomainSpec& spec, int index) {
  Rng scene_rng = make_rng(spec.seed, 2 * static_cast<std::uint64_t>(index));
  Rng shift_rng = make_rng(spec.seed, 2 * static_cast<std::uint64_t>(index) + 1);

  std::uniform_real_distribution<double> bg_hue(0.0, 360.0);
  std::uniform_real_distribution<double> bg_sat(0.05, 0.25);
  std::uniform_real_distribution<double> bg_val(0.3, 0.6);
  std::uniform_real_distribution<double> bg_slope(-0.2, 0.2);
  const double h = bg_hue(scene_rng);
  const double s = bg_sat(scene_rng);
  const double v = bg_val(scene_rng);
  const double slope = bg_slope(scene_rng);

  std::vector<Shape> shapes;
  for (int c = 1; c < spec.class_count; ++c) shapes.push_back(random_shape(static_cast<std::uint8_t>(c), spec, scene_rng, false));
  const int max_extra = static_cast<int>(std::lround(2.0 * spec.scene.shape_density));
  const int extra = std::uniform_int_distribution<int>(0, max_extra)(scene_rng);
  std::uniform_int_distribution<int> any_fg(1, spec.class_count - 1);
  for (int i = 0; i < extra; ++i) {
    shapes.push_back(random_shape(static_cast<std::uint8_t>(any_fg(scene_rng)), spec, scene_rng, false));
  }
  std::shuffle(shapes.begin(), shapes.end(), scene_rng);

  Sample sample;
  for (int attempt = 0;; ++attempt) {
    render(spec, shapes, h, s, v, slope, sample);
    std::vector<bool> seen(spec.class_count, false);
    for (auto l : sample.label.values()) seen[l] = true;
    bool added = false;
    for (int c = 0; c < spec.class_count; ++c) {
      if (seen[c]) continue;
      if (c == 0) {
        // Background fully covered; drop the last shape.
        shapes.pop_back();
      } else {
        shapes.push_back(random_shape(static_cast<std::uint8_t>(c), spec, scene_rng, true));
      }
      added = true;
    }
    if (!added || attempt > 16) break;
  }

  if (!spec.shift.is_identity()) apply_shift(spec.shift, sample.image, shift_rng);
  quantize_8bit(sample.image);
  return sample;
}

std::vector<Sample> generate_domain(const DomainSpec& spec) {
  spec.validate();
  std::vector<Sample> samples;
  samples.reserve(spec.sample_count);
  for (int i = 0; i < spec.sample_count; ++i) samples.push_back(generate_sample(spec, i));
  return samples;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& k : kernel) k /= sum;

  const int hgt = img.height();
  const int wid = img.width();
  Image tmp(hgt, wid);
  Image out(hgt, wid);
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < hgt; ++y) {
      for (int x = 0; x < wid; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img.at(c, y, std::clamp(x + i, 0, wid - 1));
        tmp.at(c, y, x) = static_cast<float>(acc);
      }
    }
    for (int y = 0; y < hgt; ++y) {
      for (int x = 0; x < wid; ++x) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.at(c, std::clamp(y + i, 0, hgt - 1), x);
        out.at(c, y, x) = std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

Image augment(const Image& img, const AugmentParams& p, Rng& rng) {
  Image out = img;
  auto factor = [&](double strength) { return std::uniform_real_distribution<double>(1.0 - strength, 1.0 + strength)(rng); };
  if (p.brightness > 0.0) {
    const float b = static_cast<float>(factor(p.brightness));
    for (float& v : out.values()) v = std::clamp(v * b, 0.0f, 1.0f);
  }
  if (p.contrast > 0.0) {
    const float k = static_cast<float>(factor(p.contrast));
    double mean = 0.0;
    for (float v : out.values()) mean += v;
    const float m = static_cast<float>(mean / out.values().size());
    for (float& v : out.values()) v = std::clamp(m + k * (v - m), 0.0f, 1.0f);
  }
  if (p.saturation > 0.0) {
    const float k = static_cast<float>(factor(p.saturation));
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        const float gray = 0.299f * out.at(0, y, x) + 0.587f * out.at(1, y, x) + 0.114f * out.at(2, y, x);
        for (int c = 0; c < Image::kChannels; ++c) {
          out.at(c, y, x) = std::clamp(gray + k * (out.at(c, y, x) - gray), 0.0f, 1.0f);
        }
      }
    }
  }
  if (p.hue > 0.0) {
    const double turn = std::uniform_real_distribution<double>(-p.hue, p.hue)(rng);
    rotate_hue(out, 360.0 * turn);
  }
  if (p.blur_sigma_max > 0.0 && p.blur_probability > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    const bool apply = coin(rng) < p.blur_probability;
    const double sigma = std::uniform_real_distribution<double>(0.1, std::max(0.1, p.blur_sigma_max))(rng);
    if (apply) out = gaussian_blur(out, sigma);
  }
  return out;
}

// ---- raster io --------------------------------------------------------------

namespace {

std::uint8_t to_byte(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

std::vector<std::uint8_t> ppm_bytes(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < Image::kChannels; ++c) bytes.push_back(to_byte(img.at(c, y, x)));
    }
  }
  return bytes;
}

std::vector<std::uint8_t> pgm_bytes(const LabelMap& labels) {
  const std::string header =
      "P5\n" + std::to_string(labels.width()) + " " + std::to_string(labels.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), labels.values().begin(), labels.values().end());
  return bytes;
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  std::size_t offset = 0;
};

NetpbmHeader parse_header(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
  NetpbmHeader h;
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  h.magic = token();
  const std::string w = token();
  const std::string hh = token();
  const std::string maxval = token();
  ++pos;
  if ((h.magic != "P5" && h.magic != "P6") || maxval != "255" || w.empty() || hh.empty()) {
    throw std::runtime_error("malformed netpbm header in " + path.string());
  }
  h.width = std::stoi(w);
  h.height = std::stoi(hh);
  h.offset = pos;
  return h;
}

std::string index_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", i);
  return buf;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const std::vector<std::uint8_t>& bytes) { EVP_DigestUpdate(ctx_, bytes.data(), bytes.size()); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kDigits[md[i] >> 4]);
      out.push_back(kDigits[md[i] & 15]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  Sha256 h;
  h.update(bytes);
  return h.hex();
}

void write_ppm(const fs::path& path, const Image& img) { write_bytes(path, ppm_bytes(img)); }
void write_pgm(const fs::path& path, const LabelMap& labels) { write_bytes(path, pgm_bytes(labels)); }

Image read_ppm(const fs::path& path) {
  const auto bytes = read_bytes(path);
  const auto h = parse_header(bytes, path);
  if (h.magic != "P6" || bytes.size() < h.offset + 3ULL * h.width * h.height) {
    throw std::runtime_error("truncated or non-P6 image " + path.string());
  }
  Image img(h.height, h.width);
  std::size_t p = h.offset;
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      for (int c = 0; c < Image::kChannels; ++c) img.at(c, y, x) = bytes[p++] / 255.0f;
    }
  }
  return img;
}

LabelMap read_pgm(const fs::path& path) {
  const auto bytes = read_bytes(path);
  const auto h = parse_header(bytes, path);
  if (h.magic != "P5" || bytes.size() < h.offset + static_cast<std::size_t>(h.width) * h.height) {
    throw std::runtime_error("truncated or non-P5 label map " + path.string());
  }
  LabelMap labels(h.height, h.width);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(h.offset), labels.size(), labels.values().begin());
  return labels;
}

std::string write_domain(const fs::path& root, const DomainSpec& spec, const std::vector<Sample>& samples) {
  const fs::path images = root / spec.name / "images";
  const fs::path labels = root / spec.name / "labels";
  fs::create_directories(images);
  fs::create_directories(labels);
  Sha256 digest;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto img = ppm_bytes(samples[i].image);
    const auto lab = pgm_bytes(samples[i].label);
    write_bytes(images / (index_name(static_cast<int>(i)) + ".ppm"), img);
    write_bytes(labels / (index_name(static_cast<int>(i)) + ".pgm"), lab);
    digest.update(img);
    digest.update(lab);
  }
  return digest.hex();
}

namespace {

void put_spec(Manifest& m, const DomainSpec& s) {
  const std::string p = s.name + ".";
  m[p + "class_count"] = std::to_string(s.class_count);
  m[p + "height"] = std::to_string(s.height);
  m[p + "width"] = std::to_string(s.width);
  m[p + "sample_count"] = std::to_string(s.sample_count);
  m[p + "seed"] = std::to_string(s.seed);
  m[p + "scene.shape_density"] = fmt_double(s.scene.shape_density);
  m[p + "scene.min_size"] = std::to_string(s.scene.min_size);
  m[p + "scene.max_size"] = std::to_string(s.scene.max_size);
  m[p + "shift.hue_rotation"] = fmt_double(s.shift.hue_rotation);
  m[p + "shift.contrast_change"] = fmt_double(s.shift.contrast_change);
  m[p + "shift.noise_sigma"] = fmt_double(s.shift.noise_sigma);
  m[p + "shift.illumination_amplitude"] = fmt_double(s.shift.illumination_amplitude);
}

const std::string& get(const Manifest& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw std::runtime_error("manifest missing key '" + key + "'");
  return it->second;
}

}  // namespace

DomainSpec spec_from_manifest(const Manifest& m, const std::string& name) {
  const std::string p = name + ".";
  DomainSpec s;
  s.name = name;
  s.class_count = std::stoi(get(m, p + "class_count"));
  s.height = std::stoi(get(m, p + "height"));
  s.width = std::stoi(get(m, p + "width"));
  s.sample_count = std::stoi(get(m, p + "sample_count"));
  s.seed = std::stoull(get(m, p + "seed"));
  s.scene.shape_density = std::stod(get(m, p + "scene.shape_density"));
  s.scene.min_size = std::stoi(get(m, p + "scene.min_size"));
  s.scene.max_size = std::stoi(get(m, p + "scene.max_size"));
  s.shift.hue_rotation = std::stod(get(m, p + "shift.hue_rotation"));
  s.shift.contrast_change = std::stod(get(m, p + "shift.contrast_change"));
  s.shift.noise_sigma = std::stod(get(m, p + "shift.noise_sigma"));
  s.shift.illumination_amplitude = std::stod(get(m, p + "shift.illumination_amplitude"));
  return s;
}

Manifest write_dataset(const fs::path& root, const DomainSpec& source, const DomainSpec& target) {
  source.validate();
  target.validate();
  if (source.name == target.name) throw std::invalid_argument("source and target domains need distinct names");
  if (source.class_count != target.class_count) throw std::invalid_argument("domains must share class_count");

  Manifest m;
  m["format_version"] = "1";
  m["raster_format"] = kRasterFormat;
  m["domains"] = source.name + "," + target.name;
  m["ignore_label"] = std::to_string(kIgnore);
  for (const DomainSpec* spec : {&source, &target}) {
    put_spec(m, *spec);
    m[spec->name + ".checksum"] = write_domain(root, *spec, generate_domain(*spec));
  }
  write_manifest(root, m);
  return m;
}

void write_manifest(const fs::path& root, const Manifest& manifest) {
  fs::create_directories(root);
  std::ofstream os(root / "manifest");
  if (!os) throw std::runtime_error("cannot write manifest under " + root.string());
  for (const auto& [k, v] : manifest) os << k << " = " << v << "\n";
}

Manifest read_manifest(const fs::path& root) {
  std::ifstream is(root / "manifest");
  if (!is) throw std::runtime_error("dataset manifest not found under " + root.string());
  Manifest m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw std::runtime_error("malformed manifest line: " + line);
    m[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return m;
}

std::vector<Sample> load_domain(const fs::path& root, const std::string& name) {
  const Manifest m = read_manifest(root);
  const DomainSpec spec = spec_from_manifest(m, name);
  std::vector<Sample> samples;
  samples.reserve(spec.sample_count);
  Sha256 digest;
  for (int i = 0; i < spec.sample_count; ++i) {
    const fs::path img_path = root / name / "images" / (index_name(i) + ".ppm");
    const fs::path lab_path = root / name / "labels" / (index_name(i) + ".pgm");
    const auto img_bytes = read_bytes(img_path);
    const auto lab_bytes = read_bytes(lab_path);
    digest.update(img_bytes);
    digest.update(lab_bytes);
    Sample s{read_ppm(img_path), read_pgm(lab_path)};
    if (s.image.height() != spec.height || s.image.width() != spec.width || s.label.height() != spec.height ||
        s.label.width() != spec.width) {
      throw std::runtime_error("raster size mismatch for " + img_path.string());
    }
    s.label.validate(spec.class_count);
    samples.push_back(std::move(s));
  }
  const std::string sum = digest.hex();
  if (sum != get(m, name + ".checksum")) {
    throw std::runtime_error("checksum mismatch for domain '" + name + "' (dataset corrupt)");
  }
  return samples;
}

}  // namespace pipa::data
