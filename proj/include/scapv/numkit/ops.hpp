#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scapv/numkit/tensor.hpp"

// Differentiable primitives. Every op checks its operand shapes (throwing
// DimensionError with both shapes) and its output for NaN/Inf (throwing
// NumericError naming the op). An op records itself on the graph when graph
// recording is enabled and at least one input requires gradients.
namespace scapv::numkit {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kAcosClamp = 1e-7;

// (m x k) . (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);

// Element-wise. `b` may also match the trailing dimensions of `a`, in which
// case it is broadcast over the leading ones (bias rows, layer-norm affines).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);

Tensor sum(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& a, std::size_t axis, bool keepdim = false);

struct MaxResult {
  Tensor values;
  std::vector<std::uint32_t> argmax;  // position along the reduced axis
};
// Ties resolve to the lowest position.
MaxResult max_with_argmax(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor max(const Tensor& a, std::size_t axis, bool keepdim = false);

Tensor relu(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
// Normalization only; the learnable affine is applied by the caller.
Tensor layer_norm(const Tensor& a, std::size_t axis, double eps = kLayerNormEps);
// Input clamped to [-1 + clamp, 1 - clamp] so the derivative stays finite.
Tensor acos(const Tensor& a, double clamp = kAcosClamp);
Tensor cos(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor l2_normalize(const Tensor& a, std::size_t axis);

// Structural ops.
Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, std::span<const std::size_t> axes);
Tensor permute(const Tensor& a, std::initializer_list<std::size_t> axes);
Tensor transpose(const Tensor& a);  // 2-D only
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
// Rows of a 2-D tensor by index; index -1 yields a zero row.
Tensor gather_rows(const Tensor& a, std::span<const std::int64_t> rows);

}  // namespace scapv::numkit
