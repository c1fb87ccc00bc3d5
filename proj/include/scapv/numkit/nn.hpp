#pragma once

#include <cstdint>
#include <string>

#include "scapv/numkit/init.hpp"
#include "scapv/numkit/ops.hpp"

// Small building blocks shared by the model modules.
namespace scapv::numkit {

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // out, undefined when bias-free

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor operator()(const Tensor& x) const;
};

// Registers `<prefix>.weight` (gaussian, sigma defaults to sqrt(2 / in)) and,
// when requested, a zero `<prefix>.bias`.
Linear make_linear(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                   std::uint64_t seed, bool bias = true, double sigma = 0.0);

struct LayerNormAffine {
  Tensor gamma;
  Tensor beta;
  Tensor operator()(const Tensor& x) const;  // normalizes the last axis
};

LayerNormAffine make_layer_norm(ParameterSet& params, const std::string& prefix, std::size_t width);

}  // namespace scapv::numkit
