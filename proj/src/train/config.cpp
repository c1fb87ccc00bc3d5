#include "scapv/train/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "scapv/numkit/errors.hpp"

namespace scapv::train {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + text + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::vector<std::size_t> parse_counts(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_count(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string real_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

using Setter = std::function<void(Config&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const Config&)>;

struct Field {
  const char* key;
  Setter set;
  Getter get;
};

template <typename Access>
Field count_field(const char* key, Access access) {
  return {key, [access](Config& c, const std::string& k, const std::string& v) { access(c) = parse_count(k, v); },
          [access](const Config& c) { return std::to_string(access(c)); }};
}

template <typename Access>
Field real_field(const char* key, Access access) {
  return {key, [access](Config& c, const std::string& k, const std::string& v) { access(c) = parse_real(k, v); },
          [access](const Config& c) { return real_str(access(c)); }};
}

template <typename Access>
Field schedule_field(const char* key, Access access) {
  return {key,
          [access](Config& c, const std::string& k, const std::string& v) {
            try {
              access(c) = LrSchedule::parse(v);
            } catch (const ConfigError& e) {
              throw ConfigError("config key '" + k + "': " + e.what());
            }
          },
          [access](const Config& c) { return access(c).str(); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      count_field("data.points", [](auto& c) -> auto& { return c.data.points; }),
      count_field("data.views", [](auto& c) -> auto& { return c.data.views; }),
      count_field("data.resolution", [](auto& c) -> auto& { return c.data.resolution; }),
      {"model.edgeconv_widths",
       [](Config& c, const std::string& k, const std::string& v) { c.model.edgeconv_widths = parse_counts(k, v); },
       [](const Config& c) { return join(c.model.edgeconv_widths); }},
      count_field("model.knn_k", [](auto& c) -> auto& { return c.model.knn_k; }),
      count_field("model.point_dim", [](auto& c) -> auto& { return c.model.point_dim; }),
      {"model.view_widths",
       [](Config& c, const std::string& k, const std::string& v) { c.model.view_widths = parse_counts(k, v); },
       [](const Config& c) { return join(c.model.view_widths); }},
      count_field("model.dim", [](auto& c) -> auto& { return c.model.dim; }),
      count_field("model.heads", [](auto& c) -> auto& { return c.model.heads; }),
      count_field("model.mlp_hidden", [](auto& c) -> auto& { return c.model.mlp_hidden; }),
      count_field("model.blocks", [](auto& c) -> auto& { return c.model.blocks; }),
      count_field("model.fusion_hidden", [](auto& c) -> auto& { return c.model.fusion_hidden; }),
      count_field("model.descriptor_dim", [](auto& c) -> auto& { return c.model.descriptor_dim; }),
      {"model.share_cmam_imam",
       [](Config& c, const std::string& k, const std::string& v) { c.model.share_cmam_imam = parse_bool(k, v); },
       [](const Config& c) { return std::string(c.model.share_cmam_imam ? "true" : "false"); }},
      {"model.ablation",
       [](Config& c, const std::string& k, const std::string& v) {
         try {
           c.model.ablation = AblationFlags::from_name(v);
         } catch (const ConfigError& e) {
           throw ConfigError("config key '" + k + "': " + e.what());
         }
       },
       [](const Config& c) { return c.model.ablation.name(); }},
      count_field("pretrain.epochs", [](auto& c) -> auto& { return c.pretrain.epochs; }),
      count_field("pretrain.batch_size", [](auto& c) -> auto& { return c.pretrain.batch_size; }),
      schedule_field("pretrain.lr_schedule", [](auto& c) -> auto& { return c.pretrain.lr_schedule; }),
      real_field("pretrain.weight_decay", [](auto& c) -> auto& { return c.pretrain.weight_decay; }),
      count_field("finetune.epochs", [](auto& c) -> auto& { return c.finetune.epochs; }),
      count_field("finetune.batch_size", [](auto& c) -> auto& { return c.finetune.batch_size; }),
      schedule_field("finetune.lr_schedule", [](auto& c) -> auto& { return c.finetune.lr_schedule; }),
      real_field("finetune.weight_decay", [](auto& c) -> auto& { return c.finetune.weight_decay; }),
      count_field("finetune.freeze_backbones_until",
                  [](auto& c) -> auto& { return c.finetune.freeze_backbones_until; }),
      real_field("finetune.arcface_margin", [](auto& c) -> auto& { return c.finetune.arcface_margin; }),
      real_field("finetune.arcface_scale", [](auto& c) -> auto& { return c.finetune.arcface_scale; }),
      real_field("train.momentum", [](auto& c) -> auto& { return c.momentum; }),
      {"train.seed",
       [](Config& c, const std::string& k, const std::string& v) { c.seed = parse_count(k, v); },
       [](const Config& c) { return std::to_string(c.seed); }},
  };
  return table;
}

}  // namespace

void AblationFlags::validate() const {
  if (!use_point && !use_view) throw ConfigError("ablation: at least one modality must be enabled");
  if (direct_concat) {
    if (!use_point || !use_view) throw ConfigError("ablation: direct_concat needs both modalities");
    if (!use_object_branch || !use_view_branch) {
      throw ConfigError("ablation: direct_concat bypasses aggregation, so branch flags must stay on");
    }
    return;
  }
  if (use_point != use_view) {
    // Single-modality baselines have no aggregation branches to switch off.
    if (!use_object_branch || !use_view_branch) {
      throw ConfigError("ablation: branch flags require both modalities");
    }
    return;
  }
  if (!use_object_branch && !use_view_branch) throw ConfigError("ablation: both aggregation branches disabled");
}

std::string AblationFlags::name() const {
  validate();
  if (direct_concat) return "direct_concat";
  if (!use_view) return "point_only";
  if (!use_point) return "view_only";
  if (!use_view_branch) return "no_view_branch";
  if (!use_object_branch) return "no_object_branch";
  return "full";
}

AblationFlags AblationFlags::from_name(const std::string& name) {
  AblationFlags f;
  if (name == "full") return f;
  if (name == "point_only") {
    f.use_view = false;
  } else if (name == "view_only") {
    f.use_point = false;
  } else if (name == "direct_concat") {
    f.direct_concat = true;
  } else if (name == "no_view_branch") {
    f.use_view_branch = false;
  } else if (name == "no_object_branch") {
    f.use_object_branch = false;
  } else {
    throw ConfigError("unknown ablation '" + name + "'");
  }
  return f;
}

std::vector<std::string> AblationFlags::variant_names() {
  return {"point_only", "view_only", "direct_concat", "no_view_branch", "no_object_branch", "full"};
}

double LrSchedule::at(std::size_t epoch) const {
  double lr = steps.front().second;
  for (const auto& [threshold, value] : steps) {
    if (epoch >= threshold) lr = value;
  }
  return lr;
}

void LrSchedule::validate() const {
  if (steps.empty()) throw ConfigError("lr schedule is empty");
  if (steps.front().first != 0) throw ConfigError("lr schedule must start at epoch 0");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i].second > 0.0)) throw ConfigError("lr schedule: learning rates must be positive");
    if (i > 0 && steps[i].first <= steps[i - 1].first) {
      throw ConfigError("lr schedule thresholds must be strictly increasing");
    }
  }
}

LrSchedule LrSchedule::parse(const std::string& text) {
  LrSchedule s;
  s.steps.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("lr schedule entry '" + item + "' is not epoch:lr");
    s.steps.emplace_back(parse_count("lr_schedule", trim(item.substr(0, colon))),
                         parse_real("lr_schedule", trim(item.substr(colon + 1))));
  }
  s.validate();
  return s;
}

std::string LrSchedule::str() const {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out += (i ? "," : "") + std::to_string(steps[i].first) + ":" + real_str(steps[i].second);
  }
  return out;
}

Phase parse_phase(const std::string& name) {
  if (name == "pretrain_point") return Phase::kPretrainPoint;
  if (name == "pretrain_view") return Phase::kPretrainView;
  if (name == "finetune") return Phase::kFinetune;
  throw ConfigError("unknown phase '" + name + "' (expected pretrain_point, pretrain_view or finetune)");
}

std::string phase_name(Phase phase) {
  switch (phase) {
    case Phase::kPretrainPoint:
      return "pretrain_point";
    case Phase::kPretrainView:
      return "pretrain_view";
    case Phase::kFinetune:
      return "finetune";
  }
  return "unknown";
}

Config::Config() {
  pretrain.epochs = 20;
  pretrain.batch_size = 16;
  pretrain.lr_schedule = LrSchedule{{{0, 0.01}}};
  pretrain.weight_decay = 1e-3;
  finetune.epochs = 30;
  finetune.batch_size = 16;
  finetune.lr_schedule = LrSchedule{{{0, 0.01}, {10, 0.001}}};
  finetune.weight_decay = 1e-5;
  finetune.freeze_backbones_until = 10;
}

void Config::validate() const {
  if (data.points < 2) throw ConfigError("data.points must be at least 2");
  if (data.views == 0 || 360 % data.views != 0) throw ConfigError("data.views must divide 360");
  if (data.resolution == 0) throw ConfigError("data.resolution must be positive");
  if (model.heads == 0 || model.dim % model.heads != 0) throw ConfigError("model.heads must divide model.dim");
  if (model.knn_k == 0) throw ConfigError("model.knn_k must be positive");
  for (const auto* n : {&model.point_dim, &model.dim, &model.mlp_hidden, &model.blocks, &model.fusion_hidden,
                        &model.descriptor_dim}) {
    if (*n == 0) throw ConfigError("model widths and block counts must be positive");
  }
  model.ablation.validate();
  for (const auto* p : {&pretrain, &finetune}) {
    if (p->batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(p->weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    p->lr_schedule.validate();
  }
  if (finetune.epochs == 0) throw ConfigError("finetune.epochs must be at least 1");
  if (!(finetune.arcface_margin >= 0.0 && finetune.arcface_margin < 1.5707963267948966)) {
    throw ConfigError("finetune.arcface_margin must lie in [0, pi/2)");
  }
  if (!(finetune.arcface_scale > 0.0)) throw ConfigError("finetune.arcface_scale must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
}

Config parse_config(const std::string& text, Config base) {
  std::stringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (key == f.key) field = &f;
    }
    if (!field) throw ConfigError("unknown config key '" + key + "'");
    field->set(base, key, value);
  }
  base.validate();
  return base;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const Config& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace scapv::train
