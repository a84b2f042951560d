#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pipa/model.hpp"
#include "pipa/optimizer.hpp"

namespace pipa::model {

/// Bump when the container layout or key scheme changes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume training bit-exactly or to run inference.
///
/// Container: the 8-byte magic "PIPACKPT", a little-endian uint32 version,
/// then a cereal portable-binary archive of the fields below in order.
/// Parameter keys are the layer names, e.g. "encoder.stage0.weight",
/// "cls.fc2.bias", "pixel_head.fc1.weight". Optimizer slot keys are
/// "<slot>.<parameter key>" (adamw: m, v; sgd: velocity).
struct Checkpoint {
  ModelConfig model;
  std::map<std::string, std::vector<float>> student;  ///< projection heads included while training
  std::map<std::string, std::vector<double>> teacher;
  double teacher_momentum = 0.999;
  train::OptimizerState optimizer;
  std::int64_t iteration = 0;
  std::map<std::string, std::string> rng_states;
  std::string config_text;  ///< resolved experiment config, informational
};

std::map<std::string, std::vector<float>> export_parameters(const ModelBundle& bundle);

/// Loads parameters by key. Heads absent from `values` are dropped from the
/// bundle; any other missing or mis-sized key throws.
void import_parameters(ModelBundle& bundle, const std::map<std::string, std::vector<float>>& values);

std::map<std::string, std::vector<double>> export_teacher(const TeacherState& teacher);
void import_teacher(TeacherState& teacher, const std::map<std::string, std::vector<double>>& values);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws std::runtime_error naming both versions on a version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Bundle rebuilt from a checkpoint's student parameters.
ModelBundle bundle_from_checkpoint(const Checkpoint& ckpt);

}  // namespace pipa::model
