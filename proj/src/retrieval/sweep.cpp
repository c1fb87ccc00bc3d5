#include "scapv/retrieval/sweep.hpp"

#include <cstdio>

#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/ops.hpp"
#include "scapv/point/point_branch.hpp"
#include "scapv/retrieval/metrics.hpp"

namespace scapv::retrieval {

namespace nk = scapv::numkit;

double micro_map(std::span<const head::DescriptorRecord> db) {
  const auto lists = rank_all(db);
  return aggregate_metrics(lists).micro.map;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "views") return SweepAxis::kViews;
  if (name == "points") return SweepAxis::kPoints;
  throw ConfigError("unknown sweep axis '" + name + "' (expected views or points)");
}

std::string sweep_axis_name(SweepAxis axis) { return axis == SweepAxis::kViews ? "views" : "points"; }

std::vector<std::size_t> default_sweep_grid(SweepAxis axis) {
  if (axis == SweepAxis::kViews) return {2, 4, 6, 8, 10, 12};
  return {128, 256, 384, 512, 640, 768, 896, 1024};
}

namespace {

train::Sample reduce(const train::Sample& s, SweepAxis axis, std::size_t setting) {
  train::Sample out = s;
  if (axis == SweepAxis::kViews) {
    if (setting != s.views.dim(0)) out.views = nk::slice(s.views, 0, 0, setting);
  } else if (setting != s.cloud.points.dim(0)) {
    const auto keep = point::farthest_point_sample(s.cloud, setting);
    out.cloud = point::select_points(s.cloud, keep);
  }
  return out;
}

}  // namespace

std::vector<SweepRow> robustness_sweep(const train::ScaPvNet& model, const std::vector<train::Sample>& samples,
                                       SweepAxis axis, std::span<const std::size_t> grid) {
  if (samples.size() < 2) throw ContractError("sweep needs at least 2 samples");
  if (axis == SweepAxis::kViews && !model.uses_view()) throw ContractError("model variant has no view input");
  if (axis == SweepAxis::kPoints && !model.uses_point()) throw ContractError("model variant has no point input");
  const std::size_t limit =
      axis == SweepAxis::kViews ? samples.front().views.dim(0) : samples.front().cloud.points.dim(0);
  for (auto g : grid) {
    if (g == 0 || g > limit) {
      throw ContractError(sweep_axis_name(axis) + " setting " + std::to_string(g) + " is outside [1, " +
                          std::to_string(limit) + "]");
    }
    if (axis == SweepAxis::kPoints && g < 2) throw ContractError("points setting must be at least 2");
  }
  std::vector<SweepRow> rows;
  for (auto g : grid) {
    std::vector<train::Sample> reduced;
    reduced.reserve(samples.size());
    for (const auto& s : samples) reduced.push_back(reduce(s, axis, g));
    const auto db = train::embed_samples(model, reduced);
    rows.push_back({g, micro_map(db)});
  }
  return rows;
}

std::string format_sweep(SweepAxis axis, std::span<const SweepRow> rows) {
  std::string out = sweep_axis_name(axis) + "\tmAP\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\n", r.setting, r.map);
    out += buf;
  }
  return out;
}

}  // namespace scapv::retrieval
