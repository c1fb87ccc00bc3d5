#include "scapv/point/point_branch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/ops.hpp"

namespace scapv::point {

namespace nk = scapv::numkit;

PointCloud normalize_cloud(const PointCloud& cloud) {
  const auto& s = cloud.points.shape();
  if (s.size() != 2 || s[1] != 3) throw DimensionError("point cloud must be n x 3, got " + nk::shape_str(s));
  const std::size_t n = s[0];
  const auto p = cloud.points.data();
  double c[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) c[d] += p[i * 3 + d];
  }
  for (double& v : c) v /= static_cast<double>(n);
  std::vector<double> out(p.size());
  double radius = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (int d = 0; d < 3; ++d) {
      out[i * 3 + d] = p[i * 3 + d] - c[d];
      r2 += out[i * 3 + d] * out[i * 3 + d];
    }
    radius = std::max(radius, std::sqrt(r2));
  }
  if (radius > 0.0) {
    for (double& v : out) v /= radius;
  }
  return {Tensor({n, 3}, std::move(out)), cloud.object_id};
}

PointCloud select_points(const PointCloud& cloud, std::span<const std::size_t> indices) {
  const auto p = cloud.points.data();
  std::vector<double> out;
  out.reserve(indices.size() * 3);
  for (auto i : indices) {
    if (i >= cloud.size()) throw ContractError("point index out of range");
    out.insert(out.end(), p.begin() + static_cast<std::ptrdiff_t>(i * 3),
               p.begin() + static_cast<std::ptrdiff_t>(i * 3 + 3));
  }
  return {Tensor({indices.size(), 3}, std::move(out)), cloud.object_id};
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t k) {
  const std::size_t n = cloud.size();
  if (k < 1 || k > n) {
    throw ContractError("farthest_point_sample: k = " + std::to_string(k) + " outside [1, " +
                        std::to_string(n) + "]");
  }
  const auto p = cloud.points.data();
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::vector<std::size_t> order;
  order.reserve(k);
  std::size_t current = 0;
  for (std::size_t step = 0; step < k; ++step) {
    order.push_back(current);
    taken[current] = 1;
    if (step + 1 == k) break;
    const double cx = p[current * 3], cy = p[current * 3 + 1], cz = p[current * 3 + 2];
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double dx = p[i * 3] - cx, dy = p[i * 3 + 1] - cy, dz = p[i * 3 + 2] - cz;
      min_d2[i] = std::min(min_d2[i], dx * dx + dy * dy + dz * dz);
      if (min_d2[i] > best_d) {
        best_d = min_d2[i];
        best = i;
      }
    }
    current = best;
  }
  return order;
}

KnnGraph knn_graph(const Tensor& features, std::size_t k) {
  if (features.rank() != 2) throw DimensionError("knn_graph needs n x D features, got " + nk::shape_str(features.shape()));
  const std::size_t n = features.dim(0);
  const std::size_t dim = features.dim(1);
  if (k < 1 || k >= n) {
    throw ContractError("knn_graph: k = " + std::to_string(k) + " must be in [1, n) with n = " +
                        std::to_string(n));
  }
  const auto x = features.data();
  // Feature-major copy so one query's distances to all points vectorize
  // across points while each still sums over features in order.
  std::vector<double> xt(dim * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t d = 0; d < dim; ++d) xt[d * n + j] = x[j * dim + d];
  }
  KnnGraph g{n, k, std::vector<std::int64_t>(n * k)};
  std::vector<double> row(n);
  std::vector<std::pair<double, std::size_t>> best;
  best.reserve(k + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    double* __restrict acc = row.data();
    for (std::size_t d = 0; d < dim; ++d) {
      const double xi = x[i * dim + d];
      const double* __restrict col = xt.data() + d * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double t = xi - col[j];
        acc[j] += t * t;
      }
    }
    best.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const std::pair<double, std::size_t> cand{row[j], j};
      if (best.size() == k && !(cand < best.back())) continue;
      auto pos = std::upper_bound(best.begin(), best.end(), cand);
      best.insert(pos, cand);
      if (best.size() > k) best.pop_back();
    }
    for (std::size_t j = 0; j < k; ++j) g.neighbors[i * k + j] = static_cast<std::int64_t>(best[j].second);
  }
  return g;
}

Tensor edgeconv_layer(const Tensor& features, const KnnGraph& graph, const EdgeConvWeights& weights) {
  if (features.rank() != 2) throw DimensionError("edgeconv features must be 2-D, got " + nk::shape_str(features.shape()));
  const std::size_t n = features.dim(0);
  const std::size_t d_in = features.dim(1);
  if (graph.n != n) {
    throw DimensionError("edgeconv: graph over " + std::to_string(graph.n) + " rows, features " +
                         nk::shape_str(features.shape()));
  }
  if (weights.weight.rank() != 2 || weights.weight.dim(0) != 2 * d_in) {
    throw DimensionError("edgeconv: weight " + nk::shape_str(weights.weight.shape()) +
                         " does not fit features " + nk::shape_str(features.shape()));
  }
  const std::size_t d_out = weights.weight.dim(1);
  const std::size_t k = graph.k;
  // concat(x_i, x_j - x_i) W = x_i (W_top - W_bottom) + x_j W_bottom
  Tensor w_top = nk::slice(weights.weight, 0, 0, d_in);
  Tensor w_bottom = nk::slice(weights.weight, 0, d_in, d_in);
  Tensor center = nk::matmul(features, nk::sub(w_top, w_bottom));
  Tensor neighbor = nk::matmul(features, w_bottom);
  std::vector<std::int64_t> centers(n * k);
  for (std::size_t i = 0; i < n; ++i) std::fill_n(centers.begin() + static_cast<std::ptrdiff_t>(i * k), k, static_cast<std::int64_t>(i));
  Tensor edges = nk::add(nk::add(nk::gather_rows(center, centers), nk::gather_rows(neighbor, graph.neighbors)),
                         weights.bias);
  edges = nk::relu(edges);
  return nk::max(nk::reshape(edges, {n, k, d_out}), 1);
}

PointBranch::PointBranch(const PointBranchConfig& config, nk::ParameterSet& params, std::uint64_t seed,
                         const std::string& prefix)
    : config_(config) {
  if (config_.widths.empty()) throw ConfigError("point branch needs at least one EdgeConv layer");
  std::size_t in = 3;
  std::size_t concat_width = 0;
  for (std::size_t l = 0; l < config_.widths.size(); ++l) {
    auto lin = nk::make_linear(params, prefix + ".edgeconv" + std::to_string(l), 2 * in, config_.widths[l], seed);
    layers_.push_back({lin.weight, lin.bias});
    in = config_.widths[l];
    concat_width += in;
  }
  projection_ = nk::make_linear(params, prefix + ".projection", concat_width, config_.feature_dim, seed, true,
                                std::sqrt(1.0 / static_cast<double>(concat_width)));
}

std::size_t PointBranch::graph_k(std::size_t n) const {
  return n == 0 ? 0 : std::min(config_.knn_k, n - 1);
}

Tensor PointBranch::forward(const Tensor& cloud) const {
  if (cloud.rank() != 2 || cloud.dim(1) != 3) throw DimensionError("point branch input must be n x 3, got " + nk::shape_str(cloud.shape()));
  const std::size_t n = cloud.dim(0);
  const std::size_t k = graph_k(n);
  if (k < 1) throw ContractError("point branch needs at least 2 points, got " + std::to_string(n));
  Tensor x = cloud;
  std::vector<Tensor> outputs;
  for (const auto& layer : layers_) {
    KnnGraph graph = knn_graph(x, k);
    x = edgeconv_layer(x, graph, layer);
    outputs.push_back(x);
  }
  Tensor per_point = projection_(nk::concat(std::span<const Tensor>(outputs), 1));
  return nk::max(per_point, 0, true);
}

Tensor extract_point_feature(const PointCloud& cloud, const PointBranch& model) {
  return model.forward(cloud.points);
}

}  // namespace scapv::point
