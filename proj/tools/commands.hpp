#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pipa/config.hpp"

namespace pipa::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kVerification = 2 };

/// Options shared by every command that reads an experiment config.
struct ConfigSource {
  std::optional<std::filesystem::path> file;
  std::vector<std::string> overrides;  ///< key=value, applied after the file

  ExperimentConfig resolve() const;
};

struct GenDataOptions {
  ConfigSource config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  bool force = false;
};

struct TrainOptions {
  ConfigSource config;
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::filesystem::path> run_dir;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;
  bool no_pixel = false;
  bool no_patch = false;
  bool resume = false;
  bool force = false;
  bool quiet = false;
};

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> data_dir;
  std::string split = "target-holdout";
  std::optional<double> holdout;
  std::optional<std::filesystem::path> json_out;
};

struct AblateOptions {
  ConfigSource config;
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::filesystem::path> run_dir;
  std::string mode = "contrast";
  int seeds = 3;
  std::uint64_t first_seed = 0;
  std::optional<int> iterations;
  std::vector<int> crop_sizes{32, 40, 48, 56};
  double max_hours = 3.0;
  double max_disk_mb = 2048.0;
  bool dry_run = false;
};

struct GradcheckOptions {
  double tol = 1e-4;
  double oracle_tol = 1e-6;
  int oracle_instances = 200;
  int gradient_instances = 50;
  std::uint64_t seed = 2024;
  bool inject_fault = false;
};

int gen_data(const GenDataOptions& o);
int train(const TrainOptions& o);
int eval(const EvalOptions& o);
int ablate(const AblateOptions& o);
int gradcheck(const GradcheckOptions& o);
int show_config(const ConfigSource& c);

}  // namespace pipa::cli
