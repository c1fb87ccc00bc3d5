#include "scapv/train/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/init.hpp"
#include "scapv/numkit/pvt_io.hpp"
#include "scapv/view/view_branch.hpp"

namespace scapv::train {

namespace nk = scapv::numkit;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSplitSalt = 0x5eedULL;
constexpr double kTestFraction = 0.2;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string line_tag(std::size_t n) { return "manifest line " + std::to_string(n) + ": "; }

}  // namespace

std::size_t Manifest::num_classes() const {
  int top = -1;
  for (const auto& e : entries) top = std::max(top, e.label);
  return static_cast<std::size_t>(top + 1);
}

Manifest parse_manifest(const std::string& text, const fs::path& root) {
  Manifest m;
  m.root = root;
  std::stringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> ids;
  std::set<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    if (stripped.rfind("views.precomputed", 0) == 0) {
      const auto eq = stripped.find('=');
      const std::string value = eq == std::string::npos ? "" : trim(stripped.substr(eq + 1));
      if (value != "true" && value != "false") {
        throw ContractError(line_tag(line_no) + "views.precomputed must be true or false");
      }
      m.views_precomputed = value == "true";
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 5) {
      throw ContractError(line_tag(line_no) + "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.object_id = fields[0];
    if (e.object_id.empty()) throw ContractError(line_tag(line_no) + "empty object id");
    try {
      std::size_t used = 0;
      e.label = std::stoi(fields[1], &used);
      if (used != fields[1].size() || e.label < 0) throw std::invalid_argument("label");
    } catch (const std::exception&) {
      throw ContractError(line_tag(line_no) + "bad label '" + fields[1] + "'");
    }
    e.points_path = fields[2];
    e.views_path = fields[3];
    e.split = fields[4];
    if (e.split != "train" && e.split != "test") {
      throw ContractError(line_tag(line_no) + "split must be train or test, got '" + e.split + "'");
    }
    if (!ids.insert(e.object_id).second) {
      throw ContractError(line_tag(line_no) + "duplicate object id '" + e.object_id + "'");
    }
    labels.insert(e.label);
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw ContractError("manifest has no records");
  if (static_cast<std::size_t>(*labels.rbegin()) + 1 != labels.size()) {
    throw ContractError("manifest labels must form a contiguous range 0..K-1");
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  return parse_manifest(nk::read_file_bytes(path), path.parent_path());
}

std::string format_manifest(const Manifest& manifest) {
  std::string out = "# id\tlabel\tpoints\tviews\tsplit\n";
  out += std::string("views.precomputed = ") + (manifest.views_precomputed ? "true" : "false") + "\n";
  for (const auto& e : manifest.entries) {
    out += e.object_id + "\t" + std::to_string(e.label) + "\t" + e.points_path + "\t" + e.views_path + "\t" + e.split +
           "\n";
  }
  return out;
}

const std::vector<Sample>& Corpus::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "test") return test;
  throw ContractError("unknown split '" + name + "'");
}

Corpus load_corpus(const Manifest& manifest, const DataConfig& data) {
  Corpus corpus;
  corpus.views_precomputed = manifest.views_precomputed;
  corpus.num_classes = manifest.num_classes();
  nk::Shape map_shape;
  for (const auto& e : manifest.entries) {
    Sample s;
    s.object_id = e.object_id;
    s.label = e.label;
    const fs::path pts_path = manifest.root / e.points_path;
    Tensor pts = nk::load_pvt(pts_path);
    if (pts.rank() != 2 || pts.dim(1) != 3) {
      throw DimensionError(pts_path.string() + ": point cloud must be n x 3, got " + nk::shape_str(pts.shape()));
    }
    if (pts.dim(0) < data.points) {
      throw ContractError(pts_path.string() + ": " + std::to_string(pts.dim(0)) + " points, data.points is " +
                          std::to_string(data.points));
    }
    point::PointCloud cloud = point::normalize_cloud({pts, e.object_id});
    if (cloud.size() > data.points) {
      const auto keep = point::farthest_point_sample(cloud, data.points);
      cloud = point::normalize_cloud(point::select_points(cloud, keep));
    }
    s.cloud = std::move(cloud);

    const fs::path view_path = manifest.root / e.views_path;
    s.views = nk::load_pvt(view_path);
    const auto& vs = s.views.shape();
    if (vs.size() != 4 || vs[0] != data.views) {
      throw DimensionError(view_path.string() + ": expected " + std::to_string(data.views) + " views, got " +
                           nk::shape_str(vs));
    }
    if (manifest.views_precomputed) {
      if (map_shape.empty()) map_shape = vs;
      if (vs != map_shape) {
        throw DimensionError(view_path.string() + ": feature maps " + nk::shape_str(vs) + " differ from " +
                             nk::shape_str(map_shape));
      }
    } else if (vs[1] != 1 || vs[2] != data.resolution || vs[3] != data.resolution) {
      throw DimensionError(view_path.string() + ": expected " + std::to_string(data.views) + " x 1 x " +
                           std::to_string(data.resolution) + " x " + std::to_string(data.resolution) + ", got " +
                           nk::shape_str(vs));
    }
    (e.split == "train" ? corpus.train : corpus.test).push_back(std::move(s));
  }
  return corpus;
}

std::string primitive_name(Primitive p) {
  switch (p) {
    case Primitive::kSphere:
      return "sphere";
    case Primitive::kBox:
      return "box";
    case Primitive::kCylinder:
      return "cylinder";
    case Primitive::kTorus:
      return "torus";
    case Primitive::kCone:
      return "cone";
  }
  return "unknown";
}

void SyntheticSpec::validate() const {
  if (classes.empty()) throw ConfigError("synthetic corpus needs at least one class");
  if (instances_per_class < 2) throw ConfigError("synthetic corpus needs at least 2 instances per class");
  if (!(jitter_sigma >= 0.0)) throw ConfigError("jitter sigma must be non-negative");
  if (!(scale_range.first > 0.0 && scale_range.first <= scale_range.second)) {
    throw ConfigError("scale range must satisfy 0 < low <= high");
  }
  if (points_n < 2) throw ConfigError("points must be at least 2");
  if (surface_samples < points_n) throw ConfigError("surface samples must be at least the point count");
  if (views_M == 0 || 360 % views_M != 0) throw ConfigError("view count must divide 360");
  if (resolution == 0) throw ConfigError("resolution must be positive");
}

std::vector<Primitive> first_primitives(std::size_t count) {
  const std::vector<Primitive> all = SyntheticSpec{}.classes;
  if (count == 0 || count > all.size()) {
    throw ConfigError("class count must be in [1, " + std::to_string(all.size()) + "], got " + std::to_string(count));
  }
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count)};
}

std::vector<double> sample_surface(Primitive kind, std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> out;
  out.reserve(count * 3);
  auto emit = [&](double x, double y, double z) { out.insert(out.end(), {x, y, z}); };

  switch (kind) {
    case Primitive::kSphere: {
      std::normal_distribution<double> g(0.0, 1.0);
      while (out.size() < count * 3) {
        const double x = g(rng), y = g(rng), z = g(rng);
        const double r = std::sqrt(x * x + y * y + z * z);
        if (r > 1e-12) emit(x / r, y / r, z / r);
      }
      break;
    }
    case Primitive::kBox: {
      const double a = range(0.4, 1.2), b = range(0.4, 1.2), c = range(0.4, 1.2);
      const double areas[3] = {b * c, a * c, a * b};  // faces normal to x, y, z
      const double total = areas[0] + areas[1] + areas[2];
      for (std::size_t i = 0; i < count; ++i) {
        const double pick = u(rng) * total;
        const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
        const double s = range(-1.0, 1.0), t = range(-1.0, 1.0);
        if (pick < areas[0]) {
          emit(sign * a, s * b, t * c);
        } else if (pick < areas[0] + areas[1]) {
          emit(s * a, sign * b, t * c);
        } else {
          emit(s * a, t * b, sign * c);
        }
      }
      break;
    }
    case Primitive::kCylinder: {
      const double r = range(0.3, 0.7), h = range(0.6, 1.2);  // radius, half height
      const double side = two_pi * r * 2.0 * h, caps = 2.0 * std::numbers::pi * r * r;
      for (std::size_t i = 0; i < count; ++i) {
        const double phi = two_pi * u(rng);
        if (u(rng) * (side + caps) < side) {
          emit(r * std::cos(phi), r * std::sin(phi), range(-h, h));
        } else {
          const double rho = r * std::sqrt(u(rng));
          emit(rho * std::cos(phi), rho * std::sin(phi), u(rng) < 0.5 ? -h : h);
        }
      }
      break;
    }
    case Primitive::kTorus: {
      const double big = range(0.7, 1.0), small = range(0.15, 0.35);
      while (out.size() < count * 3) {
        const double theta = two_pi * u(rng), phi = two_pi * u(rng);
        // Area element is proportional to (R + r cos phi).
        if (u(rng) * (big + small) > big + small * std::cos(phi)) continue;
        const double ring = big + small * std::cos(phi);
        emit(ring * std::cos(theta), ring * std::sin(theta), small * std::sin(phi));
      }
      break;
    }
    case Primitive::kCone: {
      const double r = range(0.5, 1.0), h = range(1.0, 2.0);
      const double lateral = std::numbers::pi * r * std::sqrt(r * r + h * h), base = std::numbers::pi * r * r;
      for (std::size_t i = 0; i < count; ++i) {
        const double phi = two_pi * u(rng);
        if (u(rng) * (lateral + base) < lateral) {
          const double t = std::sqrt(u(rng));  // distance from the apex, as a fraction
          emit(r * t * std::cos(phi), r * t * std::sin(phi), h / 2.0 - t * h);
        } else {
          const double rho = r * std::sqrt(u(rng));
          emit(rho * std::cos(phi), rho * std::sin(phi), -h / 2.0);
        }
      }
      break;
    }
  }
  return out;
}

std::vector<std::string> assign_splits(const std::vector<std::string>& ids, double test_fraction) {
  std::vector<std::pair<std::uint64_t, std::size_t>> order;
  for (std::size_t i = 0; i < ids.size(); ++i) order.emplace_back(nk::derive_seed(kSplitSalt, ids[i]), i);
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : ids[a.second] < ids[b.second];
  });
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
  std::vector<std::string> tags(ids.size(), "train");
  for (std::size_t r = 0; r < n_test; ++r) tags[order[r].second] = "test";
  return tags;
}

CorpusSummary generate_synthetic_corpus(const SyntheticSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "points", ec);
  fs::create_directories(out_dir / "views", ec);
  if (ec) throw IoError("cannot create corpus directory " + out_dir.string() + ": " + ec.message());

  Manifest manifest;
  manifest.root = out_dir;
  CorpusSummary summary;
  summary.classes = spec.classes.size();
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const Primitive kind = spec.classes[c];
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < spec.instances_per_class; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "_%04zu", i);
      ids.push_back(primitive_name(kind) + buf);
    }
    const auto tags = assign_splits(ids, kTestFraction);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::mt19937_64 rng(nk::derive_seed(spec.seed, ids[i]));
      std::vector<double> xyz = sample_surface(kind, spec.surface_samples, rng);
      std::uniform_real_distribution<double> scale_dist(spec.scale_range.first, spec.scale_range.second);
      const double scale = scale_dist(rng);
      std::normal_distribution<double> jitter(0.0, 1.0);
      for (double& v : xyz) v = v * scale + spec.jitter_sigma * jitter(rng);

      point::PointCloud dense =
          point::normalize_cloud({Tensor({spec.surface_samples, 3}, std::move(xyz)), ids[i]});
      const auto stack = view::render_views(dense, {spec.views_M, spec.resolution, spec.resolution});
      const auto keep = point::farthest_point_sample(dense, spec.points_n);
      const auto cloud = point::normalize_cloud(point::select_points(dense, keep));

      ManifestEntry e{ids[i], static_cast<int>(c), "points/" + ids[i] + ".pvt", "views/" + ids[i] + ".pvt", tags[i]};
      nk::save_pvt(out_dir / e.points_path, cloud.points);
      nk::save_pvt(out_dir / e.views_path, stack.images);
      (tags[i] == "test" ? summary.test : summary.train) += 1;
      manifest.entries.push_back(std::move(e));
    }
  }
  summary.objects = manifest.entries.size();
  summary.manifest = out_dir / "manifest.tsv";
  nk::write_file_bytes(summary.manifest, format_manifest(manifest));
  return summary;
}

}  // namespace scapv::train
