#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "scapv/numkit/nn.hpp"
#include "scapv/numkit/tensor.hpp"

// Token-set aggregation: a class-token ViT encoder (in-modality) and a
// point-feature-queried cross-attention over hybrid tokens (cross-modality).
namespace scapv::aggregate {

using numkit::Tensor;

struct AttentionWeights {
  Tensor wq, wk, wv;    // D x D, no bias
  numkit::Linear out;   // D x D output map with bias
};

AttentionWeights make_attention(numkit::ParameterSet& params, const std::string& prefix, std::size_t dim,
                                std::uint64_t seed);

// Per-head attention matrices from the last call, for inspection.
struct AttentionTrace {
  std::vector<Tensor> heads;  // each L_q x L_k
};

// Multi-head attention of `queries` (L_q x D) over `context` (L_k x D):
// per head softmax(q k^T / sqrt(D / h)) v, heads concatenated, then the
// output map.
Tensor attention(const Tensor& queries, const Tensor& context, const AttentionWeights& w, std::size_t heads,
                 AttentionTrace* trace = nullptr);

Tensor multihead_self_attention(const Tensor& tokens, const AttentionWeights& w, std::size_t heads,
                                AttentionTrace* trace = nullptr);

// query_vec: 1 x D; kv_tokens: L x D. Returns 1 x D.
Tensor cross_attention(const Tensor& query_vec, const Tensor& kv_tokens, const AttentionWeights& w,
                       std::size_t heads, AttentionTrace* trace = nullptr);

struct EncoderBlockWeights {
  numkit::LayerNormAffine ln_attn;
  AttentionWeights attn;
  numkit::LayerNormAffine ln_mlp;
  numkit::Linear fc1;  // D -> D_h
  numkit::Linear fc2;  // D_h -> D
  numkit::LayerNormAffine ln_out;
};

EncoderBlockWeights make_encoder_block(numkit::ParameterSet& params, const std::string& prefix, std::size_t dim,
                                       std::size_t hidden, std::uint64_t seed);

// Z'  = MSA(LN(Z)) + Z
// Z*  = LN(MLP(LN(Z')) + Z')
Tensor vit_encoder_block(const Tensor& tokens, const EncoderBlockWeights& w, std::size_t heads,
                         AttentionTrace* trace = nullptr);

struct ImamConfig {
  std::size_t input_dim = 64;
  std::size_t dim = 512;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 128;
  std::size_t blocks = 1;
  std::size_t max_tokens = 16;  // content tokens, class token excluded
};

// In-modality aggregation: project content tokens to D, prepend the learnable
// class token, add position embeddings, run the encoder blocks.
class Imam {
 public:
  Imam(const ImamConfig& config, numkit::ParameterSet& params, std::uint64_t seed, const std::string& prefix);

  // content: L x input_dim. Returns the (L+1) x D sequence, class token first.
  Tensor sequence(const Tensor& content) const;
  // The class-token row of sequence(), 1 x D.
  Tensor class_feature(const Tensor& content) const;
  Tensor forward(const Tensor& content, bool return_sequence) const;

  const ImamConfig& config() const { return config_; }
  const Tensor& class_token() const { return class_token_; }
  const Tensor& position_embeddings() const { return positions_; }
  const std::vector<EncoderBlockWeights>& blocks() const { return blocks_; }

 private:
  ImamConfig config_;
  numkit::Linear input_;
  Tensor class_token_;  // 1 x D
  Tensor positions_;    // (max_tokens + 1) x D
  std::vector<EncoderBlockWeights> blocks_;
};

struct CmamConfig {
  ImamConfig imam;
  std::size_t point_dim = 1024;
};

// Cross-modality aggregation:
//   Z^S = IMAM sequence of the content tokens
//   Z^H = [g(f_point); Z^S]                (g(f_point) is row 0)
//   f^C = g(f_point) + CrossAttn(g(f_point), Z^H)
class Cmam {
 public:
  // With `shared_imam` set, the internal IMAM reuses that module's weights.
  Cmam(const CmamConfig& config, numkit::ParameterSet& params, std::uint64_t seed, const std::string& prefix,
       const Imam* shared_imam = nullptr);

  // content: L x input_dim; f_point: 1 x point_dim. Returns 1 x D.
  Tensor forward(const Tensor& content, const Tensor& f_point, AttentionTrace* trace = nullptr) const;
  Tensor align(const Tensor& f_point) const;  // g(.)

  const CmamConfig& config() const { return config_; }
  const Imam& imam() const { return shared_ ? *shared_ : *own_; }
  const AttentionWeights& cross_weights() const { return cross_; }

 private:
  CmamConfig config_;
  std::unique_ptr<Imam> own_;
  const Imam* shared_ = nullptr;
  numkit::Linear align_;
  AttentionWeights cross_;
};

}  // namespace scapv::aggregate
