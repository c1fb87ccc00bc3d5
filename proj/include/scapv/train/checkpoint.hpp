#pragma once

#include <filesystem>
#include <string>

#include "scapv/numkit/tensor.hpp"
#include "scapv/train/config.hpp"
#include "scapv/train/model.hpp"

namespace scapv::train {

// A checkpoint is a directory:
//   index.txt    name <TAB> file, one parameter per line, in insertion order
//   <file>.pvt   one PVT1 tensor per parameter
//   config.txt   the full configuration (format_config)
//   meta.txt     key = value model shape
struct Checkpoint {
  numkit::ParameterSet params;
  Config config;
  ModelShape shape;
};

void save_checkpoint(const std::filesystem::path& dir, const numkit::ParameterSet& params, const Config& config,
                     const ModelShape& shape);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Copies values from `source` into the same-named parameters of `target`
// whose names start with `prefix`. Every such target parameter must be
// present in `source` (ContractError) with an identical shape
// (DimensionError naming the parameter). Returns the number copied.
std::size_t copy_parameters(numkit::ParameterSet& target, const numkit::ParameterSet& source,
                            const std::string& prefix = "");

// Rebuilds the model a checkpoint was trained as and loads its weights.
ScaPvNet restore_model(const Checkpoint& checkpoint);

}  // namespace scapv::train
