#include "pipa/checkpoint.hpp"

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/map.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pipa::model {

namespace {

constexpr char kMagic[8] = {'P', 'I', 'P', 'A', 'C', 'K', 'P', 'T'};

template <class Archive>
void serialize_config(Archive& ar, ModelConfig& c) {
  ar(c.classes, c.stride, c.stem_channels, c.body_channels, c.res_blocks, c.feature_dim, c.head_hidden, c.embed_dim);
}

template <class Archive>
void serialize_ckpt(Archive& ar, Checkpoint& c) {
  serialize_config(ar, c.model);
  ar(c.student, c.teacher, c.teacher_momentum);
  ar(c.optimizer.kind, c.optimizer.steps, c.optimizer.slots);
  ar(c.iteration, c.rng_states, c.config_text);
}

}  // namespace

std::map<std::string, std::vector<float>> export_parameters(const ModelBundle& bundle) {
  std::map<std::string, std::vector<float>> out;
  for (const auto* p : bundle.parameters()) out[p->name] = p->value;
  return out;
}

void import_parameters(ModelBundle& bundle, const std::map<std::string, std::vector<float>>& values) {
  if (!values.contains("pixel_head.fc1.weight") || !values.contains("patch_head.fc1.weight")) {
    bundle.drop_projection_heads();
  }
  for (auto* p : bundle.parameters()) {
    auto it = values.find(p->name);
    if (it == values.end()) throw std::runtime_error("checkpoint missing parameter '" + p->name + "'");
    if (it->second.size() != p->size()) throw std::runtime_error("checkpoint parameter '" + p->name + "' has wrong size");
    p->value = it->second;
  }
}

std::map<std::string, std::vector<double>> export_teacher(const TeacherState& teacher) {
  std::map<std::string, std::vector<double>> out;
  const auto params = teacher.net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) out[params[i]->name] = teacher.shadow[i];
  return out;
}

void import_teacher(TeacherState& teacher, const std::map<std::string, std::vector<double>>& values) {
  const auto params = teacher.net.parameters();
  teacher.shadow.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = values.find(params[i]->name);
    if (it == values.end() || it->second.size() != params[i]->size()) {
      throw std::runtime_error("checkpoint teacher parameter '" + params[i]->name + "' missing or mis-sized");
    }
    teacher.shadow[i] = it->second;
  }
  teacher.sync();
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    const std::uint32_t v = kCheckpointVersion;
    const unsigned char le[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                 static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(le), 4);
    cereal::PortableBinaryOutputArchive ar(os);
    Checkpoint copy = ckpt;
    serialize_ckpt(ar, copy);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  unsigned char le[4];
  is.read(magic, sizeof(magic));
  is.read(reinterpret_cast<char*>(le), 4);
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a pipa checkpoint");
  }
  const std::uint32_t version = le[0] | (le[1] << 8) | (le[2] << 16) | (static_cast<std::uint32_t>(le[3]) << 24);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint version " + std::to_string(version) + " is incompatible with supported version " +
                             std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  try {
    cereal::PortableBinaryInputArchive ar(is);
    serialize_ckpt(ar, c);
  } catch (const cereal::Exception& e) {
    throw std::runtime_error("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return c;
}

ModelBundle bundle_from_checkpoint(const Checkpoint& ckpt) {
  Rng rng(0);
  ModelBundle bundle(ckpt.model, rng);
  import_parameters(bundle, ckpt.student);
  return bundle;
}

}  // namespace pipa::model
