#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scapv/numkit/nn.hpp"
#include "scapv/numkit/tensor.hpp"

namespace scapv::point {

using numkit::Tensor;

struct PointCloud {
  Tensor points;  // n x 3
  std::string object_id;

  std::size_t size() const { return points.dim(0); }
};

// Translates the centroid to the origin and scales the largest point norm
// to 1. A cloud whose points all coincide is only translated.
PointCloud normalize_cloud(const PointCloud& cloud);

PointCloud select_points(const PointCloud& cloud, std::span<const std::size_t> indices);

// Greedy farthest-point sampling from index 0. Each step appends the point
// whose minimum distance to the selected set is largest, lowest index on
// ties. Returns `k` indices in selection order.
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t k);

struct KnnGraph {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::int64_t> neighbors;  // n x k, nearest first

  std::int64_t at(std::size_t i, std::size_t j) const { return neighbors[i * k + j]; }
};

// k nearest other rows of an n x D feature matrix under Euclidean distance,
// ties broken by ascending index. Requires k < n.
KnnGraph knn_graph(const Tensor& features, std::size_t k);

struct EdgeConvWeights {
  Tensor weight;  // 2 D_in x D_out, acting on concat(x_i, x_j - x_i)
  Tensor bias;    // D_out
};

// out_i = max_j relu(concat(x_i, x_j - x_i) W + b) over the k graph edges of
// point i.
Tensor edgeconv_layer(const Tensor& features, const KnnGraph& graph, const EdgeConvWeights& weights);

struct PointBranchConfig {
  std::vector<std::size_t> widths = {64, 64, 128};
  std::size_t knn_k = 10;
  std::size_t feature_dim = 1024;
};

// EdgeConv stack over dynamic kNN graphs, per-point concatenation of every
// layer output, shared affine map, global max pool over points.
class PointBranch {
 public:
  PointBranch(const PointBranchConfig& config, numkit::ParameterSet& params, std::uint64_t seed,
              const std::string& prefix = "point");

  // cloud: n x 3 (normalized). Returns 1 x feature_dim.
  Tensor forward(const Tensor& cloud) const;

  const PointBranchConfig& config() const { return config_; }
  std::size_t feature_dim() const { return config_.feature_dim; }
  // Graph size used for an n-point cloud: min(knn_k, n - 1).
  std::size_t graph_k(std::size_t n) const;

 private:
  PointBranchConfig config_;
  std::vector<EdgeConvWeights> layers_;
  numkit::Linear projection_;
};

Tensor extract_point_feature(const PointCloud& cloud, const PointBranch& model);

}  // namespace scapv::point
