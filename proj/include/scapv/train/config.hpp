#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace scapv::train {

// Which parts of the model exist. The six valid combinations are the
// point-only, view-only, direct-concatenation, no-view-level,
// no-object-level and full variants.
struct AblationFlags {
  bool use_point = true;
  bool use_view = true;
  bool use_object_branch = true;
  bool use_view_branch = true;
  bool direct_concat = false;

  // Throws ConfigError for contradictory or empty combinations.
  void validate() const;
  std::string name() const;
  static AblationFlags from_name(const std::string& name);
  static std::vector<std::string> variant_names();
};

struct DataConfig {
  std::size_t points = 1024;
  std::size_t views = 12;
  std::size_t resolution = 32;
};

struct ModelConfig {
  std::vector<std::size_t> edgeconv_widths = {64, 64, 128};
  std::size_t knn_k = 10;
  std::size_t point_dim = 1024;
  std::vector<std::size_t> view_widths = {16, 32, 64};
  std::size_t dim = 512;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 128;
  std::size_t blocks = 1;
  std::size_t fusion_hidden = 512;
  std::size_t descriptor_dim = 512;
  bool share_cmam_imam = false;
  AblationFlags ablation;
};

// Learning rate is piecewise constant: entry (threshold, lr) applies from
// epoch `threshold` (0-based) until the next entry.
struct LrSchedule {
  std::vector<std::pair<std::size_t, double>> steps = {{0, 0.01}};

  double at(std::size_t epoch) const;
  void validate() const;
  static LrSchedule parse(const std::string& text);  // "0:0.01,10:0.001"
  std::string str() const;
};

enum class Phase { kPretrainPoint, kPretrainView, kFinetune };

Phase parse_phase(const std::string& name);
std::string phase_name(Phase phase);

struct PhaseConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  LrSchedule lr_schedule;
  double weight_decay = 0.0;
  std::size_t freeze_backbones_until = 0;  // finetune only
  double arcface_margin = 0.5;             // finetune only
  double arcface_scale = 64.0;             // finetune only
};

struct Config {
  DataConfig data;
  ModelConfig model;
  PhaseConfig pretrain;
  PhaseConfig finetune;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  Config();
  void validate() const;
};

// `key = value` lines, '#' comments, namespaced keys (data.*, model.*,
// pretrain.*, finetune.*, train.*). Unknown keys and malformed values throw
// ConfigError naming the key.
Config parse_config(const std::string& text, Config base = Config());
Config load_config(const std::filesystem::path& path);
// Every key with its current value, in the same syntax parse_config reads.
std::string format_config(const Config& config);

}  // namespace scapv::train
