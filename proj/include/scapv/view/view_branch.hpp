#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scapv/numkit/nn.hpp"
#include "scapv/numkit/tensor.hpp"
#include "scapv/point/point_branch.hpp"

namespace scapv::view {

using numkit::Tensor;

struct ViewStack {
  Tensor images;                // M x 1 x H0 x W0, values in [0, 1]
  std::vector<double> azimuths;  // degrees, uniform spacing 360 / M

  std::size_t count() const { return images.dim(0); }
};

struct RenderOptions {
  std::size_t views = 12;
  std::size_t height = 32;
  std::size_t width = 32;
};

// Orthographic depth renderer. For azimuth a the cloud is rotated by -a about
// Z and projected along X onto the (Y, Z) plane; each point writes
// 1 - normalized depth into its pixel, keeping the per-pixel maximum, so the
// nearest surface is brightest. Background is 0. Expects a normalized cloud.
ViewStack render_views(const point::PointCloud& cloud, const RenderOptions& options);

// The first `count` views in azimuth order.
ViewStack first_views(const ViewStack& views, std::size_t count);

struct ViewCnnConfig {
  std::vector<std::size_t> widths = {16, 32, 64};
  bool bias = true;
};

// Shared per-view backbone: each block is a 3x3 conv (zero padding), relu,
// then a 2x2 stride-2 max pool. Applied identically to every view.
class ViewCnn {
 public:
  ViewCnn(const ViewCnnConfig& config, numkit::ParameterSet& params, std::uint64_t seed,
          const std::string& prefix = "view");

  // images: M x 1 x H x W. Returns M x C x H' x W'.
  Tensor forward(const Tensor& images) const;

  std::size_t channels() const { return config_.widths.back(); }
  const ViewCnnConfig& config() const { return config_; }

 private:
  ViewCnnConfig config_;
  std::vector<numkit::Linear> convs_;  // weight: (9 * C_in) x C_out, tap-major rows
};

Tensor extract_view_maps(const ViewStack& views, const ViewCnn& model);

// Mean across views, reshaped to HW tokens of width C (row-major over H
// then W): token l is the view-averaged feature at spatial location l.
Tensor inter_view_pool(const Tensor& maps);

// Per-view spatial mean: row j is view j's token.
Tensor intra_view_pool(const Tensor& maps);

struct ViewFeatures {
  Tensor maps;           // M x C x H x W
  Tensor object_tokens;  // HW x C
  Tensor view_tokens;    // M x C
};

ViewFeatures pool_view_features(const Tensor& maps);

}  // namespace scapv::view
