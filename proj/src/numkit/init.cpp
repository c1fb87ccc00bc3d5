#include "scapv/numkit/init.hpp"

#include <random>

namespace scapv::numkit {

Parameter init_param(std::string name, const InitSpec& spec, std::uint64_t seed) {
  const std::size_t n = shape_numel(spec.shape);
  std::vector<double> values(n, 0.0);
  switch (spec.kind) {
    case InitSpec::Kind::kZeros:
      break;
    case InitSpec::Kind::kOnes:
      values.assign(n, 1.0);
      break;
    case InitSpec::Kind::kGaussian: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> dist(0.0, spec.sigma);
      for (auto& v : values) v = dist(rng);
      break;
    }
  }
  return {std::move(name), Tensor(spec.shape, std::move(values), true)};
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view name) {
  // FNV-1a over the name, mixed with the base seed (splitmix64 finalizer).
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = h ^ (base + 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace scapv::numkit
