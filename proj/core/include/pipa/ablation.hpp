#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pipa/config.hpp"
#include "pipa/trainer.hpp"

namespace pipa::ablation {

struct Variant {
  std::string name;
  bool enable_pixel = false;
  bool enable_patch = false;
  int patch_size = 48;
};

/// baseline, +pixel, +patch, PiPa at the configured patch size.
std::vector<Variant> contrast_variants(const train::TrainConfig& base);

/// Full PiPa at each crop size.
std::vector<Variant> crop_size_variants(const train::TrainConfig& base, const std::vector<int>& sizes);

struct Plan {
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
};

struct Budget {
  double seconds = 0.0;
  std::uintmax_t bytes = 0;
};

/// Times a few steps of every variant and extrapolates; disk covers
/// checkpoints plus metric logs.
Budget estimate_budget(const ExperimentConfig& cfg, const Plan& plan, std::shared_ptr<const train::TrainData> data,
                       int probe_steps = 3);

struct RunResult {
  std::string variant;
  std::uint64_t seed = 0;
  double miou = 0.0;
  double seconds = 0.0;
};

struct Summary {
  std::string variant;
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation, 0 for a single seed
  double delta = 0.0;   ///< mean minus the first variant's mean
};

struct Result {
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::vector<RunResult> runs;  ///< variant-major

  double miou(const std::string& variant, std::uint64_t seed) const;
  std::vector<Summary> summarize() const;
};

using Progress = std::function<void(const RunResult&)>;

/// Runs every (variant, seed) into `<run_root>/<variant>/seed-<s>`.
Result run(const ExperimentConfig& cfg, const Plan& plan, std::shared_ptr<const train::TrainData> data,
           const std::filesystem::path& run_root, const Progress& progress = {});

/// mIoU table with mean +- std and delta columns, in percent.
std::string format_table(const Result& result);
std::string to_json(const Result& result);

/// Seeds in which baseline <= {+pixel, +patch} <= PiPa, given the four
/// contrast variants.
int ordering_holds(const Result& result);

}  // namespace pipa::ablation
