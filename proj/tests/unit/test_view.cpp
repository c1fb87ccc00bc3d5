#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles/bridge.hpp"
#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/gradcheck.hpp"
#include "scapv/view/view_branch.hpp"
#include "support.hpp"

using namespace scapv;
using namespace scapv::numkit;
using namespace scapv::view;
using testing_support::random_tensor;
using testing_support::weighted_sum;

namespace {

// Fibonacci lattice on the unit sphere.
point::PointCloud sphere_cloud(std::size_t n) {
  std::vector<double> v;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(i);
    v.insert(v.end(), {r * std::cos(phi), r * std::sin(phi), z});
  }
  return {Tensor({n, 3}, v), "sphere"};
}

// Surface grid of the cube [-a, a]^3 with a = 1/sqrt(3), i.e. unit corner radius.
point::PointCloud cube_cloud(std::size_t per_edge) {
  const double a = 1.0 / std::sqrt(3.0);
  std::vector<double> v;
  for (std::size_t i = 0; i < per_edge; ++i) {
    for (std::size_t j = 0; j < per_edge; ++j) {
      const double s = -a + 2 * a * static_cast<double>(i) / static_cast<double>(per_edge - 1);
      const double t = -a + 2 * a * static_cast<double>(j) / static_cast<double>(per_edge - 1);
      for (double face : {-a, a}) {
        v.insert(v.end(), {face, s, t});
        v.insert(v.end(), {s, face, t});
        v.insert(v.end(), {s, t, face});
      }
    }
  }
  return {Tensor({v.size() / 3, 3}, v), "cube"};
}

std::size_t lit_pixels(const Tensor& images, std::size_t view) {
  const std::size_t hw = images.dim(2) * images.dim(3);
  std::size_t count = 0;
  for (std::size_t i = 0; i < hw; ++i) count += images[view * hw + i] > 0.0 ? 1 : 0;
  return count;
}

// 3x3 zero-padded conv, relu, 2x2 max pool, with explicit loops. Input and
// output are channel-first, weights tap-major as in the library.
std::vector<double> conv_block_oracle(const std::vector<double>& in, std::size_t c_in, std::size_t h, std::size_t w,
                                      const oracle::Mat& weight, const std::vector<double>& bias) {
  const std::size_t c_out = weight.cols;
  std::vector<double> conv(c_out * h * w);
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double s = bias.empty() ? 0.0 : bias[o];
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
            const std::size_t tap = static_cast<std::size_t>((dy + 1) * 3 + (dx + 1));
            for (std::size_t c = 0; c < c_in; ++c)
              s += in[(c * h + static_cast<std::size_t>(yy)) * w + static_cast<std::size_t>(xx)] * weight(tap * c_in + c, o);
          }
        conv[(o * h + y) * w + x] = std::max(s, 0.0);
      }
  std::vector<double> out(c_out * (h / 2) * (w / 2));
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t y = 0; y < h / 2; ++y)
      for (std::size_t x = 0; x < w / 2; ++x) {
        double m = conv[(o * h + 2 * y) * w + 2 * x];
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, conv[(o * h + 2 * y + dy) * w + 2 * x + dx]);
        out[(o * (h / 2) + y) * (w / 2) + x] = m;
      }
  return out;
}

Tensor permute_views(const Tensor& maps, const std::vector<std::int64_t>& order) {
  const auto& s = maps.shape();
  Tensor flat = reshape(maps, {s[0], s[1] * s[2] * s[3]});
  return reshape(gather_rows(flat, order), s);
}

}  // namespace

TEST_CASE("twelve views sit at 30 degree steps") {
  auto stack = render_views(sphere_cloud(200), RenderOptions{});
  REQUIRE(stack.azimuths.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK(stack.azimuths[i] == 30.0 * static_cast<double>(i));
  CHECK(stack.images.shape() == Shape{12, 1, 32, 32});
  for (double v : stack.images.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("a densely sampled sphere renders the same from every azimuth") {
  auto stack = render_views(sphere_cloud(40000), RenderOptions{});
  const std::size_t hw = 32 * 32;
  const auto img = stack.images.data();
  const std::size_t base = lit_pixels(stack.images, 0);
  for (std::size_t v = 1; v < 12; ++v) {
    double worst = 0.0;
    for (std::size_t i = 0; i < hw; ++i) worst = std::max(worst, std::abs(img[v * hw + i] - img[i]));
    // Pixel maxima differ only by the sampling density near each pixel.
    CHECK(worst < 0.05);
    CHECK(lit_pixels(stack.images, v) == base);
  }
}

TEST_CASE("cube silhouette widens by sqrt(2) at 45 degrees") {
  auto stack = render_views(cube_cloud(400), RenderOptions{8, 128, 128});
  const double ratio = static_cast<double>(lit_pixels(stack.images, 1)) / static_cast<double>(lit_pixels(stack.images, 0));
  CHECK(std::abs(ratio - std::sqrt(2.0)) < 0.03);
}

TEST_CASE("render rejects bad inputs") {
  CHECK_THROWS_AS(render_views(point::PointCloud{}, RenderOptions{}), ContractError);
  CHECK_THROWS_AS(render_views(sphere_cloud(10), RenderOptions{7, 32, 32}), ContractError);
}

TEST_CASE("first_views keeps the leading azimuths") {
  auto stack = render_views(sphere_cloud(500), RenderOptions{});
  auto two = first_views(stack, 2);
  CHECK(two.images.shape() == Shape{2, 1, 32, 32});
  CHECK(two.azimuths == std::vector<double>{0.0, 30.0});
  CHECK_THROWS_AS(first_views(stack, 13), ContractError);
}

TEST_CASE("default CNN turns 32x32 views into 64 x 4 x 4 maps") {
  ParameterSet params;
  ViewCnn cnn(ViewCnnConfig{}, params, 3);
  auto maps = extract_view_maps(render_views(sphere_cloud(500), RenderOptions{}), cnn);
  CHECK(maps.shape() == Shape{12, 64, 4, 4});
  CHECK(cnn.channels() == 64);
}

TEST_CASE("identical views give identical maps and zero images give zero maps without bias") {
  std::mt19937_64 rng(4);
  ParameterSet params;
  ViewCnn cnn(ViewCnnConfig{{4, 6}, false}, params, 5);
  Tensor one = random_tensor({1, 1, 8, 8}, rng, false, 0.0, 1.0);
  auto maps = cnn.forward(concat({one, one, Tensor::zeros({1, 1, 8, 8})}, 0));
  const std::size_t per = 6 * 2 * 2;
  for (std::size_t i = 0; i < per; ++i) {
    CHECK(maps[i] == maps[per + i]);
    CHECK(maps[2 * per + i] == 0.0);
  }
}

TEST_CASE("CNN rejects resolutions the conv stack cannot halve") {
  ParameterSet params;
  ViewCnn cnn(ViewCnnConfig{}, params, 3);
  CHECK_THROWS_AS(cnn.forward(Tensor::zeros({1, 1, 12, 12})), DimensionError);
}

TEST_CASE("CNN matches a loop-level conv oracle") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    ParameterSet params;
    ViewCnn cnn(ViewCnnConfig{{3, 5}, true}, params, 10 + trial);
    oracle::randomize(params, 20 + trial);
    const std::size_t m = 2, h = 8, w = 8;
    Tensor images = random_tensor({m, 1, h, w}, rng, false, 0.0, 1.0);
    auto got = cnn.forward(images);
    for (std::size_t v = 0; v < m; ++v) {
      std::vector<double> x(images.data().begin() + static_cast<std::ptrdiff_t>(v * h * w),
                            images.data().begin() + static_cast<std::ptrdiff_t>((v + 1) * h * w));
      x = conv_block_oracle(x, 1, h, w, oracle::to_mat(params.get("view.conv0.weight")),
                            oracle::to_vec(params.get("view.conv0.bias")));
      x = conv_block_oracle(x, 3, h / 2, w / 2, oracle::to_mat(params.get("view.conv1.weight")),
                            oracle::to_vec(params.get("view.conv1.bias")));
      for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(got[v * x.size() + i] == doctest::Approx(x[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("CNN gradients match finite differences") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    ParameterSet params;
    ViewCnn cnn(ViewCnnConfig{{2, 3}, true}, params, 30 + trial);
    oracle::randomize(params, 60 + trial);
    Tensor images = random_tensor({2, 1, 4, 4}, rng, false, 0.0, 1.0);
    std::vector<Parameter> wrt(params.begin(), params.end());
    auto r = check_gradients([&] { return weighted_sum(cnn.forward(images), trial); }, wrt);
    INFO("trial " << trial << " worst " << r.worst_entry << " rel " << r.worst_rel_error);
    CHECK(r.passed);
  }
}

TEST_CASE("inter-view pool averages across views") {
  Tensor maps({2, 1, 1, 1}, {2.0, 4.0});
  CHECK(inter_view_pool(maps)[0] == 3.0);
  std::mt19937_64 rng(1);
  Tensor one = random_tensor({1, 3, 2, 2}, rng);
  auto same = inter_view_pool(concat({one, one, one}, 0));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t l = 0; l < 4; ++l) CHECK(same.at(l, c) == doctest::Approx(one[c * 4 + l]).epsilon(1e-15));
}

TEST_CASE("intra-view pool averages each map spatially") {
  Tensor maps({1, 2, 2, 2}, {1, 2, 3, 4, 7, 7, 7, 7});
  auto t = intra_view_pool(maps);
  CHECK(t.shape() == Shape{1, 2});
  CHECK(t[0] == 2.5);
  CHECK(t[1] == 7.0);
  std::mt19937_64 rng(2);
  Tensor unit = random_tensor({3, 4, 1, 1}, rng);
  auto id = intra_view_pool(unit);
  for (std::size_t i = 0; i < 12; ++i) CHECK(id[i] == unit[i]);
}

TEST_CASE("pooled tokens match loop-level mean identities") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 1 + rng() % 6, c = 1 + rng() % 5, h = 1 + rng() % 4, w = 1 + rng() % 4;
    Tensor maps = random_tensor({m, c, h, w}, rng);
    auto f = pool_view_features(maps);
    REQUIRE(f.object_tokens.shape() == Shape{h * w, c});
    REQUIRE(f.view_tokens.shape() == Shape{m, c});
    for (std::size_t l = 0; l < h * w; ++l)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t v = 0; v < m; ++v) s += maps[(v * c + ch) * h * w + l];
        CHECK(std::abs(f.object_tokens.at(l, ch) - s / static_cast<double>(m)) <= 1e-12);
      }
    for (std::size_t v = 0; v < m; ++v)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t l = 0; l < h * w; ++l) s += maps[(v * c + ch) * h * w + l];
        CHECK(std::abs(f.view_tokens.at(v, ch) - s / static_cast<double>(h * w)) <= 1e-12);
      }
  }
}

TEST_CASE("view pooling respects view permutation") {
  std::mt19937_64 rng(7);
  Tensor maps = random_tensor({5, 3, 2, 2}, rng);
  const std::vector<std::int64_t> order = {3, 0, 4, 1, 2};
  Tensor shuffled = permute_views(maps, order);
  auto a = inter_view_pool(maps), b = inter_view_pool(shuffled);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
  auto va = intra_view_pool(maps), vb = intra_view_pool(shuffled);
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(std::abs(vb.at(j, c) - va.at(static_cast<std::size_t>(order[j]), c)) <= 1e-12);
}
