#include "scapv/aggregate/aggregate.hpp"

#include <cmath>

#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/init.hpp"
#include "scapv/numkit/ops.hpp"

namespace scapv::aggregate {

namespace nk = scapv::numkit;

namespace {

constexpr double kTokenInitSigma = 0.02;

Tensor add_gaussian(nk::ParameterSet& params, const std::string& name, nk::Shape shape, double sigma,
                    std::uint64_t seed) {
  auto p = nk::init_param(name, nk::InitSpec::gaussian(std::move(shape), sigma), nk::derive_seed(seed, name));
  return params.add(p.name, p.value);
}

}  // namespace

AttentionWeights make_attention(nk::ParameterSet& params, const std::string& prefix, std::size_t dim,
                                std::uint64_t seed) {
  const double sigma = std::sqrt(1.0 / static_cast<double>(dim));
  AttentionWeights w;
  w.wq = add_gaussian(params, prefix + ".wq", {dim, dim}, sigma, seed);
  w.wk = add_gaussian(params, prefix + ".wk", {dim, dim}, sigma, seed);
  w.wv = add_gaussian(params, prefix + ".wv", {dim, dim}, sigma, seed);
  w.out = nk::make_linear(params, prefix + ".out", dim, dim, seed, true, sigma);
  return w;
}

Tensor attention(const Tensor& queries, const Tensor& context, const AttentionWeights& w, std::size_t heads,
                 AttentionTrace* trace) {
  if (queries.rank() != 2 || context.rank() != 2 || queries.dim(1) != context.dim(1)) {
    throw DimensionError("attention: query " + nk::shape_str(queries.shape()) + " vs context " +
                         nk::shape_str(context.shape()));
  }
  const std::size_t dim = queries.dim(1);
  if (heads == 0 || dim % heads != 0) {
    throw ContractError("attention: " + std::to_string(heads) + " heads do not divide width " + std::to_string(dim));
  }
  const std::size_t head_dim = dim / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Tensor q = nk::matmul(queries, w.wq);
  Tensor k = nk::matmul(context, w.wk);
  Tensor v = nk::matmul(context, w.wv);
  if (trace) trace->heads.clear();
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = nk::slice(q, 1, h * head_dim, head_dim);
    Tensor kh = nk::slice(k, 1, h * head_dim, head_dim);
    Tensor vh = nk::slice(v, 1, h * head_dim, head_dim);
    Tensor a = nk::softmax(nk::scale(nk::matmul(qh, nk::transpose(kh)), inv_scale), 1);
    if (trace) trace->heads.push_back(a);
    outs.push_back(nk::matmul(a, vh));
  }
  Tensor merged = heads == 1 ? outs[0] : nk::concat(std::span<const Tensor>(outs), 1);
  return w.out(merged);
}

Tensor multihead_self_attention(const Tensor& tokens, const AttentionWeights& w, std::size_t heads,
                                AttentionTrace* trace) {
  return attention(tokens, tokens, w, heads, trace);
}

Tensor cross_attention(const Tensor& query_vec, const Tensor& kv_tokens, const AttentionWeights& w,
                       std::size_t heads, AttentionTrace* trace) {
  if (query_vec.rank() != 2 || query_vec.dim(0) != 1) {
    throw DimensionError("cross_attention: query must be 1 x D, got " + nk::shape_str(query_vec.shape()));
  }
  return attention(query_vec, kv_tokens, w, heads, trace);
}

EncoderBlockWeights make_encoder_block(nk::ParameterSet& params, const std::string& prefix, std::size_t dim,
                                       std::size_t hidden, std::uint64_t seed) {
  EncoderBlockWeights b;
  b.ln_attn = nk::make_layer_norm(params, prefix + ".ln_attn", dim);
  b.attn = make_attention(params, prefix + ".attn", dim, seed);
  b.ln_mlp = nk::make_layer_norm(params, prefix + ".ln_mlp", dim);
  b.fc1 = nk::make_linear(params, prefix + ".mlp.fc1", dim, hidden, seed);
  b.fc2 = nk::make_linear(params, prefix + ".mlp.fc2", hidden, dim, seed, true,
                          std::sqrt(1.0 / static_cast<double>(hidden)));
  b.ln_out = nk::make_layer_norm(params, prefix + ".ln_out", dim);
  return b;
}

Tensor vit_encoder_block(const Tensor& tokens, const EncoderBlockWeights& w, std::size_t heads,
                         AttentionTrace* trace) {
  Tensor mid = nk::add(multihead_self_attention(w.ln_attn(tokens), w.attn, heads, trace), tokens);
  Tensor mlp = w.fc2(nk::relu(w.fc1(w.ln_mlp(mid))));
  return w.ln_out(nk::add(mlp, mid));
}

Imam::Imam(const ImamConfig& config, nk::ParameterSet& params, std::uint64_t seed, const std::string& prefix)
    : config_(config) {
  if (config_.heads == 0 || config_.dim % config_.heads != 0) {
    throw ConfigError(prefix + ": heads " + std::to_string(config_.heads) + " must divide width " +
                      std::to_string(config_.dim));
  }
  if (config_.max_tokens == 0) throw ConfigError(prefix + ": max_tokens must be positive");
  input_ = nk::make_linear(params, prefix + ".input", config_.input_dim, config_.dim, seed, true,
                           std::sqrt(1.0 / static_cast<double>(config_.input_dim)));
  class_token_ = add_gaussian(params, prefix + ".class_token", {1, config_.dim}, kTokenInitSigma, seed);
  positions_ = add_gaussian(params, prefix + ".position", {config_.max_tokens + 1, config_.dim}, kTokenInitSigma,
                            seed);
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    blocks_.push_back(make_encoder_block(params, prefix + ".block" + std::to_string(b), config_.dim,
                                         config_.mlp_hidden, seed));
  }
}

Tensor Imam::sequence(const Tensor& content) const {
  if (content.rank() != 2 || content.dim(1) != config_.input_dim) {
    throw DimensionError("imam: content " + nk::shape_str(content.shape()) + " does not have width " +
                         std::to_string(config_.input_dim));
  }
  const std::size_t len = content.dim(0);
  if (len > config_.max_tokens) {
    throw ContractError("imam: " + std::to_string(len) + " tokens exceed the position table (" +
                        std::to_string(config_.max_tokens) + ")");
  }
  Tensor z = nk::concat({class_token_, input_(content)}, 0);
  z = nk::add(z, nk::slice(positions_, 0, 0, len + 1));
  for (const auto& block : blocks_) z = vit_encoder_block(z, block, config_.heads);
  return z;
}

Tensor Imam::class_feature(const Tensor& content) const { return nk::slice(sequence(content), 0, 0, 1); }

Tensor Imam::forward(const Tensor& content, bool return_sequence) const {
  return return_sequence ? sequence(content) : class_feature(content);
}

Cmam::Cmam(const CmamConfig& config, nk::ParameterSet& params, std::uint64_t seed, const std::string& prefix,
           const Imam* shared_imam)
    : config_(config), shared_(shared_imam) {
  if (!shared_) own_ = std::make_unique<Imam>(config_.imam, params, seed, prefix + ".imam");
  align_ = nk::make_linear(params, prefix + ".align", config_.point_dim, config_.imam.dim, seed, true,
                           std::sqrt(1.0 / static_cast<double>(config_.point_dim)));
  cross_ = make_attention(params, prefix + ".cross", config_.imam.dim, seed);
}

Tensor Cmam::align(const Tensor& f_point) const {
  if (f_point.rank() != 2 || f_point.dim(0) != 1 || f_point.dim(1) != config_.point_dim) {
    throw DimensionError("cmam: point feature " + nk::shape_str(f_point.shape()) + " does not have width " +
                         std::to_string(config_.point_dim));
  }
  return align_(f_point);
}

Tensor Cmam::forward(const Tensor& content, const Tensor& f_point, AttentionTrace* trace) const {
  Tensor self_attended = imam().sequence(content);
  Tensor query = align(f_point);
  if (query.dim(1) != self_attended.dim(1)) {
    throw DimensionError("cmam: aligned point feature " + nk::shape_str(query.shape()) + " vs tokens " +
                         nk::shape_str(self_attended.shape()));
  }
  Tensor hybrid = nk::concat({query, self_attended}, 0);
  return nk::add(query, cross_attention(query, hybrid, cross_, config_.imam.heads, trace));
}

}  // namespace scapv::aggregate
