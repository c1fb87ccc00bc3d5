#pragma once

#include <unordered_map>
#include <vector>

#include "scapv/numkit/tensor.hpp"

namespace scapv::numkit {

struct SgdOptions {
  double momentum = 0.9;
  double weight_decay = 0.0;
};

// SGD with heavy-ball momentum and L2 weight decay:
//   v <- momentum * v + grad + weight_decay * value
//   value <- value - lr * v
// Velocity buffers persist per parameter across steps.
class Sgd {
 public:
  explicit Sgd(SgdOptions options = {}) : options_(options) {}

  // Updates every parameter in `params` and zeroes its gradient. Throws
  // ContractError if any parameter has no gradient buffer.
  void step(ParameterSet& params, double lr);

  const SgdOptions& options() const { return options_; }

 private:
  SgdOptions options_;
  std::unordered_map<const detail::Node*, std::vector<double>> velocity_;
};

}  // namespace scapv::numkit
