#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "scapv/numkit/ops.hpp"
#include "scapv/numkit/tensor.hpp"

namespace testing_support {

using scapv::numkit::Shape;
using scapv::numkit::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = false, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(scapv::numkit::shape_numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Scalarizes a tensor with fixed random weights so that every output entry
// carries a distinct gradient.
inline Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = random_tensor(t.shape(), rng);
  return scapv::numkit::sum(scapv::numkit::reshape(scapv::numkit::mul(t, w), {t.numel()}), 0);
}

// n x 3 cloud with coordinates in [-1, 1]; continuous draws make all
// pairwise distances distinct with probability one.
inline Tensor random_cloud(std::size_t n, std::mt19937_64& rng) { return random_tensor({n, 3}, rng); }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("scapv_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
