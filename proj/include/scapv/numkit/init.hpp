#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "scapv/numkit/tensor.hpp"

namespace scapv::numkit {

struct InitSpec {
  enum class Kind { kGaussian, kZeros, kOnes };
  Shape shape;
  Kind kind = Kind::kZeros;
  double sigma = 0.0;  // gaussian only

  static InitSpec gaussian(Shape s, double sigma) { return {std::move(s), Kind::kGaussian, sigma}; }
  static InitSpec zeros(Shape s) { return {std::move(s), Kind::kZeros, 0.0}; }
  static InitSpec ones(Shape s) { return {std::move(s), Kind::kOnes, 0.0}; }
};

// Same (spec, seed) gives bit-identical values.
Parameter init_param(std::string name, const InitSpec& spec, std::uint64_t seed);

// Per-parameter seed derived from a model seed and the parameter name, so a
// parameter's initial value does not depend on which other parameters exist.
std::uint64_t derive_seed(std::uint64_t base, std::string_view name);

}  // namespace scapv::numkit
