#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "scapv/numkit/tensor.hpp"

namespace scapv::numkit {

struct GradCheckOptions {
  double step = 1e-5;
  double rel_tol = 1e-4;
  double abs_floor = 1e-7;
  // Cap on checked entries per tensor (evenly strided); 0 checks all.
  std::size_t max_entries_per_tensor = 0;
};

struct GradCheckResult {
  bool passed = true;
  std::size_t checked = 0;
  double worst_rel_error = 0.0;  // over entries with |gradient| above abs_floor
  std::string worst_entry;  // "name[index]"
};

// Compares gradients from backward() against central differences of
// `loss_fn` for every entry of every tensor in `wrt`. The tensors must be
// leaves with requires_grad set; their values are perturbed in place and
// restored.
GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Parameter> wrt,
                                const GradCheckOptions& options = {});

}  // namespace scapv::numkit
