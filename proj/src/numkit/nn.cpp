#include "scapv/numkit/nn.hpp"

#include <cmath>

namespace scapv::numkit {

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

Linear make_linear(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                   std::uint64_t seed, bool bias, double sigma) {
  if (sigma <= 0.0) sigma = std::sqrt(2.0 / static_cast<double>(in));
  Linear l;
  const std::string wname = prefix + ".weight";
  auto w = init_param(wname, InitSpec::gaussian({in, out}, sigma), derive_seed(seed, wname));
  l.weight = params.add(w.name, w.value);
  if (bias) {
    auto b = init_param(prefix + ".bias", InitSpec::zeros({out}), 0);
    l.bias = params.add(b.name, b.value);
  }
  return l;
}

Tensor LayerNormAffine::operator()(const Tensor& x) const {
  return add(mul(layer_norm(x, x.rank() - 1), gamma), beta);
}

LayerNormAffine make_layer_norm(ParameterSet& params, const std::string& prefix, std::size_t width) {
  LayerNormAffine ln;
  auto g = init_param(prefix + ".gamma", InitSpec::ones({width}), 0);
  auto b = init_param(prefix + ".beta", InitSpec::zeros({width}), 0);
  ln.gamma = params.add(g.name, g.value);
  ln.beta = params.add(b.name, b.value);
  return ln;
}

}  // namespace scapv::numkit
