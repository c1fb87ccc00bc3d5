#include "scapv/view/view_branch.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/ops.hpp"

namespace scapv::view {

namespace nk = scapv::numkit;

ViewStack render_views(const point::PointCloud& cloud, const RenderOptions& options) {
  if (!cloud.points.defined() || cloud.size() == 0) throw ContractError("render_views: empty cloud");
  if (options.views == 0 || 360 % options.views != 0) {
    throw ContractError("render_views: view count " + std::to_string(options.views) + " must divide 360");
  }
  if (options.height == 0 || options.width == 0) throw ContractError("render_views: empty resolution");
  const std::size_t m = options.views;
  const std::size_t h = options.height;
  const std::size_t w = options.width;
  const auto p = cloud.points.data();
  const std::size_t n = cloud.size();
  std::vector<double> img(m * h * w, 0.0);
  ViewStack out;
  for (std::size_t v = 0; v < m; ++v) {
    const double az_deg = static_cast<double>(v * (360 / m));
    out.azimuths.push_back(az_deg);
    const double a = az_deg * std::numbers::pi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    double* plane = img.data() + v * h * w;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = p[i * 3], y = p[i * 3 + 1], z = p[i * 3 + 2];
      // rotation by -a about Z
      const double xr = c * x + s * y;
      const double yr = -s * x + c * y;
      const double shade = std::clamp((1.0 + xr) / 2.0, 0.0, 1.0);
      const auto col = static_cast<std::ptrdiff_t>(std::floor((yr + 1.0) / 2.0 * static_cast<double>(w)));
      const auto row = static_cast<std::ptrdiff_t>(std::floor((1.0 - z) / 2.0 * static_cast<double>(h)));
      const auto cc = std::clamp<std::ptrdiff_t>(col, 0, static_cast<std::ptrdiff_t>(w) - 1);
      const auto rr = std::clamp<std::ptrdiff_t>(row, 0, static_cast<std::ptrdiff_t>(h) - 1);
      double& px = plane[static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)];
      px = std::max(px, shade);
    }
  }
  out.images = Tensor({m, 1, h, w}, std::move(img));
  return out;
}

ViewStack first_views(const ViewStack& views, std::size_t count) {
  if (count < 1 || count > views.count()) {
    throw ContractError("first_views: " + std::to_string(count) + " of " + std::to_string(views.count()));
  }
  ViewStack out;
  out.images = nk::slice(views.images, 0, 0, count).detach();
  out.azimuths.assign(views.azimuths.begin(), views.azimuths.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

ViewCnn::ViewCnn(const ViewCnnConfig& config, nk::ParameterSet& params, std::uint64_t seed,
                 const std::string& prefix)
    : config_(config) {
  if (config_.widths.empty()) throw ConfigError("view CNN needs at least one block");
  std::size_t in = 1;
  for (std::size_t b = 0; b < config_.widths.size(); ++b) {
    convs_.push_back(nk::make_linear(params, prefix + ".conv" + std::to_string(b), 9 * in, config_.widths[b],
                                     seed, config_.bias));
    in = config_.widths[b];
  }
}

namespace {

// Row indices that turn an (M*H*W) x C pixel matrix into 3x3 patches
// ((M*H*W*9) x C, tap-major per pixel); -1 marks zero padding.
std::vector<std::int64_t> patch_indices(std::size_t m, std::size_t h, std::size_t w) {
  std::vector<std::int64_t> idx;
  idx.reserve(m * h * w * 9);
  for (std::size_t v = 0; v < m; ++v) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
            const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) || xx >= static_cast<std::ptrdiff_t>(w)) {
              idx.push_back(-1);
            } else {
              idx.push_back(static_cast<std::int64_t>((v * h + static_cast<std::size_t>(yy)) * w +
                                                      static_cast<std::size_t>(xx)));
            }
          }
        }
      }
    }
  }
  return idx;
}

// 2x2 windows, output-pixel major.
std::vector<std::int64_t> pool_indices(std::size_t m, std::size_t h, std::size_t w) {
  std::vector<std::int64_t> idx;
  idx.reserve(m * h * w);
  for (std::size_t v = 0; v < m; ++v) {
    for (std::size_t y = 0; y < h / 2; ++y) {
      for (std::size_t x = 0; x < w / 2; ++x) {
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            idx.push_back(static_cast<std::int64_t>((v * h + 2 * y + dy) * w + 2 * x + dx));
          }
        }
      }
    }
  }
  return idx;
}

}  // namespace

Tensor ViewCnn::forward(const Tensor& images) const {
  const auto& s = images.shape();
  if (s.size() != 4 || s[1] != 1) throw DimensionError("view CNN input must be M x 1 x H x W, got " + nk::shape_str(s));
  const std::size_t m = s[0];
  std::size_t h = s[2], w = s[3];
  const std::size_t factor = std::size_t{1} << convs_.size();
  if (h % factor != 0 || w % factor != 0) {
    throw DimensionError("view resolution " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by " + std::to_string(factor) + " for the conv stack");
  }
  Tensor x = nk::reshape(images, {m * h * w, 1});
  std::size_t c = 1;
  for (const auto& conv : convs_) {
    const auto pidx = patch_indices(m, h, w);
    Tensor patches = nk::reshape(nk::gather_rows(x, pidx), {m * h * w, 9 * c});
    x = nk::relu(conv(patches));
    c = conv.out_features();
    const auto qidx = pool_indices(m, h, w);
    h /= 2;
    w /= 2;
    x = nk::max(nk::reshape(nk::gather_rows(x, qidx), {m * h * w, 4, c}), 1);
  }
  return nk::permute(nk::reshape(x, {m, h, w, c}), {0, 3, 1, 2});
}

Tensor extract_view_maps(const ViewStack& views, const ViewCnn& model) { return model.forward(views.images); }

Tensor inter_view_pool(const Tensor& maps) {
  if (maps.rank() != 4) throw DimensionError("inter_view_pool expects M x C x H x W, got " + nk::shape_str(maps.shape()));
  const std::size_t c = maps.dim(1), hw = maps.dim(2) * maps.dim(3);
  return nk::transpose(nk::reshape(nk::mean(maps, 0), {c, hw}));
}

Tensor intra_view_pool(const Tensor& maps) {
  if (maps.rank() != 4) throw DimensionError("intra_view_pool expects M x C x H x W, got " + nk::shape_str(maps.shape()));
  const std::size_t m = maps.dim(0), c = maps.dim(1), hw = maps.dim(2) * maps.dim(3);
  return nk::mean(nk::reshape(maps, {m, c, hw}), 2);
}

ViewFeatures pool_view_features(const Tensor& maps) {
  return {maps, inter_view_pool(maps), intra_view_pool(maps)};
}

}  // namespace scapv::view
