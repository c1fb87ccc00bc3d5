#include "scapv/numkit/optim.hpp"

#include <cmath>

#include "scapv/numkit/errors.hpp"

namespace scapv::numkit {

void Sgd::step(ParameterSet& params, double lr) {
  for (auto& p : params) {
    if (!p.value.has_grad()) throw ContractError("sgd step: parameter '" + p.name + "' has no gradient");
  }
  for (auto& p : params) {
    auto value = p.value.mutable_data();
    auto grad = p.value.grad();
    auto& v = velocity_[p.value.id()];
    if (v.empty()) v.assign(value.size(), 0.0);
    for (std::size_t i = 0; i < value.size(); ++i) {
      v[i] = options_.momentum * v[i] + grad[i] + options_.weight_decay * value[i];
      value[i] -= lr * v[i];
      if (!std::isfinite(value[i])) throw NumericError("sgd step produced non-finite value in '" + p.name + "'");
    }
    p.value.zero_grad();
  }
}

}  // namespace scapv::numkit
