#pragma once

#include <span>
#include <string>
#include <vector>

#include "scapv/head/head.hpp"
#include "scapv/train/corpus.hpp"
#include "scapv/train/model.hpp"

namespace scapv::retrieval {

// Micro-averaged mAP of a descriptor database.
double micro_map(std::span<const head::DescriptorRecord> db);

enum class SweepAxis { kViews, kPoints };

SweepAxis parse_sweep_axis(const std::string& name);  // "views" or "points"
std::string sweep_axis_name(SweepAxis axis);

// views: 2, 4, ..., 12. points: 128, 256, ..., 1024.
std::vector<std::size_t> default_sweep_grid(SweepAxis axis);

struct SweepRow {
  std::size_t setting = 0;
  double map = 0.0;
};

// Re-embeds `samples` with reduced input and evaluates micro mAP per grid
// value. Fewer views keep the first V in azimuth order; fewer points keep a
// farthest-point subset. A value equal to the training setting leaves the
// input untouched. Values above it, or zero, are a ContractError.
std::vector<SweepRow> robustness_sweep(const train::ScaPvNet& model, const std::vector<train::Sample>& samples,
                                       SweepAxis axis, std::span<const std::size_t> grid);

// Header "<axis>\tmAP", then one "setting\tmAP" line per row, 6 decimals.
std::string format_sweep(SweepAxis axis, std::span<const SweepRow> rows);

}  // namespace scapv::retrieval
