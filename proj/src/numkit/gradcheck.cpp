#include "scapv/numkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "scapv/numkit/errors.hpp"

namespace scapv::numkit {

GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Parameter> wrt,
                                const GradCheckOptions& options) {
  for (auto& p : wrt) {
    if (!p.value.requires_grad()) throw ContractError("gradcheck: '" + p.name + "' does not require grad");
    p.value.zero_grad();
  }
  loss_fn().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : wrt) {
    if (p.value.has_grad()) {
      analytic.emplace_back(p.value.grad().begin(), p.value.grad().end());
    } else {
      analytic.emplace_back(p.value.numel(), 0.0);
    }
    p.value.zero_grad();
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t t = 0; t < wrt.size(); ++t) {
    auto values = wrt[t].value.mutable_data();
    const std::size_t n = values.size();
    std::size_t stride = 1;
    if (options.max_entries_per_tensor > 0 && n > options.max_entries_per_tensor) {
      stride = (n + options.max_entries_per_tensor - 1) / options.max_entries_per_tensor;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = loss_fn().item();
      values[i] = saved - options.step;
      const double down = loss_fn().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[t][i];
      const double diff = std::abs(a - numeric);
      const double rel = diff / std::max({std::abs(a), std::abs(numeric), 1e-300});
      const bool ok = diff <= options.abs_floor || rel <= options.rel_tol;
      ++result.checked;
      // Entries whose gradient is itself below the floor have no meaningful
      // relative error and are left out of the worst case.
      const double score = std::max(std::abs(a), std::abs(numeric)) > options.abs_floor ? rel : 0.0;
      if (score > result.worst_rel_error) {
        result.worst_rel_error = score;
        result.worst_entry = wrt[t].name + "[" + std::to_string(i) + "]";
      }
      if (!ok) result.passed = false;
    }
  }
  return result;
}

}  // namespace scapv::numkit
