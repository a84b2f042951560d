#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pipa/data_synth.hpp"
#include "pipa/model.hpp"
#include "pipa/trainer.hpp"

namespace pipa {

/// Everything a run needs. Keys are flat and dotted (`train.alpha`,
/// `target.hue_rotation`, ...); see `config_keys()` for the full list.
struct ExperimentConfig {
  data::DomainSpec source;
  data::DomainSpec target;
  model::ModelConfig model;
  train::TrainConfig train;
  std::filesystem::path data_dir = "data";
  std::filesystem::path run_dir = "runs/default";

  ExperimentConfig();

  /// Cross-field checks on top of the per-section validators.
  void validate() const;

  /// Applies one `key=value` assignment. Throws std::invalid_argument on an
  /// unknown key or unparsable value.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// Reads `key = value` lines; `#` starts a comment.
  void merge_file(const std::filesystem::path& path);
  void merge_text(std::string_view text, std::string_view origin = "<text>");

  /// Every key with its resolved value, in registry order. Parsing the text
  /// back yields an identical config.
  std::string to_text() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

const std::vector<ConfigKey>& config_keys();

/// Parses `key=value` (as passed to --set).
std::pair<std::string, std::string> split_assignment(std::string_view text);

}  // namespace pipa
