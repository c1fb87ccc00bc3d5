#include "scapv/train/checkpoint.hpp"

#include <algorithm>
#include <sstream>

#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/pvt_io.hpp"

namespace scapv::train {

namespace nk = scapv::numkit;
namespace fs = std::filesystem;

namespace {

std::string format_meta(const ModelShape& s) {
  std::ostringstream out;
  out << "num_classes = " << s.num_classes << "\n"
      << "views = " << s.views << "\n"
      << "views_precomputed = " << (s.views_precomputed ? "true" : "false") << "\n"
      << "view_channels = " << s.view_channels << "\n"
      << "view_tokens = " << s.view_tokens << "\n";
  return out.str();
}

ModelShape parse_meta(const std::string& text, const fs::path& path) {
  ModelShape s;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(' ') + 1);
    value.erase(0, value.find_first_not_of(' '));
    try {
      if (key == "num_classes") s.num_classes = std::stoul(value);
      else if (key == "views") s.views = std::stoul(value);
      else if (key == "views_precomputed") s.views_precomputed = value == "true";
      else if (key == "view_channels") s.view_channels = std::stoul(value);
      else if (key == "view_tokens") s.view_tokens = std::stoul(value);
      else throw IoError(path.string() + ": unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ": bad value for '" + key + "'");
    }
  }
  return s;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const nk::ParameterSet& params, const Config& config,
                     const ModelShape& shape) {
  fs::create_directories(dir);
  std::ostringstream index;
  for (const auto& p : params) {
    const std::string file = p.name + ".pvt";
    nk::save_pvt(dir / file, p.value);
    index << p.name << '\t' << file << '\n';
  }
  nk::write_file_bytes(dir / "index.txt", index.str());
  nk::write_file_bytes(dir / "config.txt", format_config(config));
  nk::write_file_bytes(dir / "meta.txt", format_meta(shape));
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("checkpoint directory not found: " + dir.string());
  Checkpoint ck;
  ck.config = parse_config(nk::read_file_bytes(dir / "config.txt"));
  ck.shape = parse_meta(nk::read_file_bytes(dir / "meta.txt"), dir / "meta.txt");
  std::istringstream index(nk::read_file_bytes(dir / "index.txt"));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError((dir / "index.txt").string() + " line " + std::to_string(line_no) + ": expected name<TAB>file");
    }
    const auto file = line.substr(tab + 1);
    if (file.find('/') != std::string::npos || file.find("..") != std::string::npos) {
      throw IoError((dir / "index.txt").string() + " line " + std::to_string(line_no) + ": bad file name");
    }
    ck.params.add(line.substr(0, tab), nk::load_pvt(dir / file));
  }
  return ck;
}

std::size_t copy_parameters(nk::ParameterSet& target, const nk::ParameterSet& source, const std::string& prefix) {
  std::size_t copied = 0;
  for (auto& p : target) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    const nk::Tensor* src = source.find(p.name);
    if (!src) throw ContractError("checkpoint is missing parameter '" + p.name + "'");
    if (src->shape() != p.value.shape()) {
      throw DimensionError("parameter '" + p.name + "' has shape " + nk::shape_str(src->shape()) +
                           " in the checkpoint but " + nk::shape_str(p.value.shape()) + " in the model");
    }
    const auto from = src->data();
    auto to = p.value.mutable_data();
    std::copy(from.begin(), from.end(), to.begin());
    ++copied;
  }
  return copied;
}

ScaPvNet restore_model(const Checkpoint& checkpoint) {
  ScaPvNet model(checkpoint.config, checkpoint.shape, checkpoint.config.seed);
  copy_parameters(model.params(), checkpoint.params);
  return model;
}

}  // namespace scapv::train
