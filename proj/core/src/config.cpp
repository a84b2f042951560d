#include "pipa/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace pipa {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: cannot parse '" + std::string(text) + "' for " + std::string(key));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw std::invalid_argument("config: expected a boolean for " + std::string(key) + ", got '" + std::string(text) + "'");
}

template <class T>
std::string format_number(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Entry {
  ConfigKey key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

template <class T, class Access>
Entry number(std::string name, std::string help, Access access) {
  auto get = [access](const ExperimentConfig& c) { return format_number(access(const_cast<ExperimentConfig&>(c))); };
  auto set = [access, name](ExperimentConfig& c, std::string_view v) { access(c) = parse_number<T>(name, v); };
  return {{std::move(name), std::move(help)}, get, set};
}

template <class Access>
Entry boolean(std::string name, std::string help, Access access) {
  auto get = [access](const ExperimentConfig& c) -> std::string {
    return access(const_cast<ExperimentConfig&>(c)) ? "true" : "false";
  };
  auto set = [access, name](ExperimentConfig& c, std::string_view v) { access(c) = parse_bool(name, v); };
  return {{std::move(name), std::move(help)}, get, set};
}

template <class Access>
Entry text(std::string name, std::string help, Access access) {
  auto get = [access](const ExperimentConfig& c) { return std::string(access(const_cast<ExperimentConfig&>(c))); };
  auto set = [access](ExperimentConfig& c, std::string_view v) { access(c) = std::string(v); };
  return {{std::move(name), std::move(help)}, get, set};
}

// Keys that describe both domains write to both specs.
template <class T, class Member>
Entry shared_domain(std::string name, std::string help, Member member) {
  auto get = [member](const ExperimentConfig& c) { return format_number(member(const_cast<data::DomainSpec&>(c.source))); };
  auto set = [member, name](ExperimentConfig& c, std::string_view v) {
    const T x = parse_number<T>(name, v);
    member(c.source) = x;
    member(c.target) = x;
  };
  return {{std::move(name), std::move(help)}, get, set};
}

void add_shift(std::vector<Entry>& out, const std::string& domain, data::DomainSpec ExperimentConfig::*spec) {
  out.push_back(number<double>(domain + ".hue_rotation", "hue rotation in degrees, [0,360)",
                               [spec](ExperimentConfig& c) -> double& { return (c.*spec).shift.hue_rotation; }));
  out.push_back(number<double>(domain + ".contrast_change", "contrast factor minus one, [-0.9,1]",
                               [spec](ExperimentConfig& c) -> double& { return (c.*spec).shift.contrast_change; }));
  out.push_back(number<double>(domain + ".noise_sigma", "additive Gaussian noise sigma, [0,0.5]",
                               [spec](ExperimentConfig& c) -> double& { return (c.*spec).shift.noise_sigma; }));
  out.push_back(number<double>(domain + ".illumination_amplitude", "brightness ramp amplitude, [0,1]",
                               [spec](ExperimentConfig& c) -> double& { return (c.*spec).shift.illumination_amplitude; }));
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> r;
    using C = ExperimentConfig;
    r.push_back(text("paths.data_dir", "dataset root", [](C& c) -> std::filesystem::path& { return c.data_dir; }));
    r.push_back(text("paths.run_dir", "run output directory", [](C& c) -> std::filesystem::path& { return c.run_dir; }));

    r.push_back(shared_domain<int>("data.class_count", "number of classes C (both domains)",
                                   [](data::DomainSpec& d) -> int& { return d.class_count; }));
    r.push_back(shared_domain<int>("data.height", "raster height", [](data::DomainSpec& d) -> int& { return d.height; }));
    r.push_back(shared_domain<int>("data.width", "raster width", [](data::DomainSpec& d) -> int& { return d.width; }));
    r.push_back(shared_domain<int>("data.sample_count", "samples per domain",
                                   [](data::DomainSpec& d) -> int& { return d.sample_count; }));
    r.push_back(shared_domain<double>("data.shape_density", "mean extra shapes per scene",
                                      [](data::DomainSpec& d) -> double& { return d.scene.shape_density; }));
    r.push_back(shared_domain<int>("data.min_size", "smallest shape half-extent",
                                   [](data::DomainSpec& d) -> int& { return d.scene.min_size; }));
    r.push_back(shared_domain<int>("data.max_size", "largest shape half-extent",
                                   [](data::DomainSpec& d) -> int& { return d.scene.max_size; }));
    r.push_back(number<std::uint64_t>("source.seed", "source domain seed", [](C& c) -> std::uint64_t& { return c.source.seed; }));
    add_shift(r, "source", &C::source);
    r.push_back(number<std::uint64_t>("target.seed", "target domain seed", [](C& c) -> std::uint64_t& { return c.target.seed; }));
    add_shift(r, "target", &C::target);

    r.push_back(number<int>("model.stride", "encoder stride k", [](C& c) -> int& { return c.model.stride; }));
    r.push_back(number<int>("model.stem_channels", "first stage width", [](C& c) -> int& { return c.model.stem_channels; }));
    r.push_back(number<int>("model.body_channels", "residual body width", [](C& c) -> int& { return c.model.body_channels; }));
    r.push_back(number<int>("model.res_blocks", "residual blocks", [](C& c) -> int& { return c.model.res_blocks; }));
    r.push_back(number<int>("model.feature_dim", "encoder output width", [](C& c) -> int& { return c.model.feature_dim; }));
    r.push_back(number<int>("model.head_hidden", "hidden width of every head", [](C& c) -> int& { return c.model.head_hidden; }));
    r.push_back(number<int>("model.embed_dim", "projection head output width", [](C& c) -> int& { return c.model.embed_dim; }));

    r.push_back(number<int>("train.iterations", "total training steps", [](C& c) -> int& { return c.train.iterations; }));
    r.push_back(number<int>("train.batch_size", "images per domain per step", [](C& c) -> int& { return c.train.batch_size; }));
    r.push_back(number<double>("train.learning_rate", "base learning rate", [](C& c) -> double& { return c.train.learning_rate; }));
    r.push_back(number<int>("train.warmup", "linear warmup steps", [](C& c) -> int& { return c.train.warmup; }));
    r.push_back(number<double>("train.weight_decay", "decoupled weight decay", [](C& c) -> double& { return c.train.weight_decay; }));
    r.push_back(text("train.optimizer", "adamw or sgd", [](C& c) -> std::string& { return c.train.optimizer; }));
    r.push_back(number<double>("train.alpha", "pixel contrast weight", [](C& c) -> double& { return c.train.alpha; }));
    r.push_back(number<double>("train.beta", "patch contrast weight", [](C& c) -> double& { return c.train.beta; }));
    r.push_back(number<double>("train.threshold", "pseudo-label confidence threshold", [](C& c) -> double& { return c.train.threshold; }));
    r.push_back(number<double>("train.ema_momentum", "teacher EMA momentum", [](C& c) -> double& { return c.train.ema_momentum; }));
    r.push_back(Entry{{"train.teacher_init", "copy or random"},
                      [](const C& c) -> std::string { return c.train.teacher_init == model::TeacherInit::kCopy ? "copy" : "random"; },
                      [](C& c, std::string_view v) {
                        if (v == "copy") {
                          c.train.teacher_init = model::TeacherInit::kCopy;
                        } else if (v == "random") {
                          c.train.teacher_init = model::TeacherInit::kRandom;
                        } else {
                          throw std::invalid_argument("config: train.teacher_init must be copy or random");
                        }
                      }});
    r.push_back(number<int>("train.patch_size", "crop side for patch contrast", [](C& c) -> int& { return c.train.patch_size; }));
    r.push_back(number<double>("train.resize_min", "smallest resize ratio", [](C& c) -> double& { return c.train.resize_min; }));
    r.push_back(number<double>("train.resize_max", "largest resize ratio", [](C& c) -> double& { return c.train.resize_max; }));
    r.push_back(number<double>("train.iou_min", "smallest crop IoU", [](C& c) -> double& { return c.train.iou_min; }));
    r.push_back(number<double>("train.iou_max", "largest crop IoU", [](C& c) -> double& { return c.train.iou_max; }));
    r.push_back(boolean("train.enable_pixel", "pixel-wise contrast", [](C& c) -> bool& { return c.train.enable_pixel; }));
    r.push_back(boolean("train.enable_patch", "patch-wise contrast", [](C& c) -> bool& { return c.train.enable_patch; }));
    r.push_back(boolean("train.pixel_on_mixed", "also contrast mixed images", [](C& c) -> bool& { return c.train.pixel_on_mixed; }));
    r.push_back(boolean("train.augment_crops", "augment each patch crop independently",
                        [](C& c) -> bool& { return c.train.augment_crops; }));
    r.push_back(boolean("train.ignore_mixed_cells", "ignore class-mixed cells", [](C& c) -> bool& { return c.train.ignore_mixed_cells; }));
    r.push_back(number<std::uint64_t>("train.seed", "training seed", [](C& c) -> std::uint64_t& { return c.train.seed; }));
    r.push_back(number<int>("train.eval_interval", "steps between evaluations, 0 = end only",
                            [](C& c) -> int& { return c.train.eval_interval; }));
    r.push_back(number<double>("train.holdout_fraction", "target share held out for evaluation",
                               [](C& c) -> double& { return c.train.holdout_fraction; }));
    r.push_back(number<int>("train.max_consecutive_skips", "abort after this many non-finite steps in a row",
                            [](C& c) -> int& { return c.train.max_consecutive_skips; }));

    r.push_back(number<double>("contrast.temperature", "softmax temperature", [](C& c) -> double& { return c.train.contrast.temperature; }));
    r.push_back(number<int>("contrast.anchors_per_class", "anchors per class per image",
                            [](C& c) -> int& { return c.train.contrast.anchors_per_class; }));
    r.push_back(number<double>("contrast.hard_fraction", "share of hardest positives and negatives kept",
                               [](C& c) -> double& { return c.train.contrast.hard_fraction; }));
    r.push_back(boolean("contrast.cross_batch", "negatives from the whole batch", [](C& c) -> bool& { return c.train.contrast.cross_batch; }));
    r.push_back(Entry{{"contrast.denominator", "infonce or literal"},
                      [](const C& c) -> std::string {
                        return c.train.contrast.denominator == losses::Denominator::kInfoNce ? "infonce" : "literal";
                      },
                      [](C& c, std::string_view v) {
                        if (v == "infonce") {
                          c.train.contrast.denominator = losses::Denominator::kInfoNce;
                        } else if (v == "literal") {
                          c.train.contrast.denominator = losses::Denominator::kLiteral;
                        } else {
                          throw std::invalid_argument("config: contrast.denominator must be infonce or literal");
                        }
                      }});

    r.push_back(number<double>("augment.brightness", "brightness jitter", [](C& c) -> double& { return c.train.augment.brightness; }));
    r.push_back(number<double>("augment.contrast", "contrast jitter", [](C& c) -> double& { return c.train.augment.contrast; }));
    r.push_back(number<double>("augment.saturation", "saturation jitter", [](C& c) -> double& { return c.train.augment.saturation; }));
    r.push_back(number<double>("augment.hue", "hue jitter, fraction of a turn", [](C& c) -> double& { return c.train.augment.hue; }));
    r.push_back(number<double>("augment.blur_sigma_max", "largest blur sigma", [](C& c) -> double& { return c.train.augment.blur_sigma_max; }));
    r.push_back(number<double>("augment.blur_probability", "chance of blurring",
                               [](C& c) -> double& { return c.train.augment.blur_probability; }));
    return r;
  }();
  return entries;
}

const Entry& find(std::string_view key) {
  for (const auto& e : registry()) {
    if (e.key.name == key) return e;
  }
  throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  source.name = "source";
  source.seed = 1;
  target.name = "target";
  target.seed = 2;
  target.shift.hue_rotation = 40.0;
  target.shift.contrast_change = -0.4;
  target.shift.noise_sigma = 0.06;
  target.shift.illumination_amplitude = 0.3;
}

void ExperimentConfig::validate() const {
  source.validate();
  target.validate();
  if (source.class_count != target.class_count || source.height != target.height || source.width != target.width) {
    throw std::invalid_argument("config: source and target must share class count and raster size");
  }
  model::ModelConfig m = model;
  m.classes = source.class_count;
  m.validate();
  train.validate();
  if (source.height % model.stride != 0 || source.width % model.stride != 0) {
    throw std::invalid_argument("config: raster size must be divisible by model.stride");
  }
  if (train.patch_size % model.stride != 0) throw std::invalid_argument("config: train.patch_size must be a multiple of model.stride");
  if (train.resize_max * std::min(source.height, source.width) < train.patch_size) {
    throw std::invalid_argument("config: train.patch_size does not fit the largest resized image");
  }
  if (data_dir.empty() || run_dir.empty()) throw std::invalid_argument("config: paths must not be empty");
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  find(key).set(*this, trim(value));
  if (key == "data.class_count") model.classes = source.class_count;
}

std::string ExperimentConfig::get(std::string_view key) const { return find(key).get(*this); }

void ExperimentConfig::merge_text(std::string_view content, std::string_view origin) {
  std::istringstream in{std::string(content)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(std::string(origin) + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      set(trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  model.classes = source.class_count;
}

void ExperimentConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& e : registry()) out += e.key.name + " = " + e.get(*this) + "\n";
  return out;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : registry()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

std::pair<std::string, std::string> split_assignment(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw std::invalid_argument("expected key=value, got '" + std::string(text) + "'");
  }
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

}  // namespace pipa
