#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scapv/numkit/nn.hpp"
#include "scapv/numkit/tensor.hpp"

namespace scapv::head {

using numkit::Tensor;

// affine -> relu -> affine over the concatenated aggregated features.
struct FusionMlp {
  numkit::Linear fc1;
  numkit::Linear fc2;

  std::size_t input_dim() const { return fc1.in_features(); }
  std::size_t output_dim() const { return fc2.out_features(); }
};

FusionMlp make_fusion_mlp(numkit::ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                          std::size_t hidden_dim, std::size_t output_dim, std::uint64_t seed);

// Concatenates `features` (each 1 x d_i) in the given order and runs the MLP.
// The full model passes (fS_obj, fS_view, fC_obj, fC_view).
Tensor fuse_descriptor(std::span<const Tensor> features, const FusionMlp& mlp);

// Mean negative log-softmax of `logits` (N x K) at `labels`.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

struct ArcFaceHead {
  Tensor weight;  // D x K; columns are L2-normalized at every use
  double margin = 0.5;
  double scale = 64.0;
};

ArcFaceHead make_arcface_head(numkit::ParameterSet& params, const std::string& prefix, std::size_t dim,
                              std::size_t classes, double margin, double scale, std::uint64_t seed);

// Logits s*cos(theta_y + m) at the true class and s*cos(theta_k) elsewhere,
// theta_k = arccos(W_k^T f), with unit-norm descriptor rows f.
Tensor arcface_logits(const Tensor& descriptors, std::span<const int> labels, const ArcFaceHead& head);

// Mean ArcFace loss. Descriptor rows must have unit norm (within 1e-6) and
// labels must lie in [0, K).
Tensor arcface_loss(const Tensor& descriptors, std::span<const int> labels, const ArcFaceHead& head);

// Plain affine classifier loss used to pretrain the backbones.
Tensor cross_entropy_head(const Tensor& features, std::span<const int> labels, const numkit::Linear& classifier);

struct DescriptorRecord {
  std::string object_id;
  int label = 0;
  std::vector<double> vector;  // unit L2 norm
};

// PVD1: "PVD1" | u32 count | u32 D | per record: u16 id length, UTF-8 id,
// u32 label, D x fp64 little-endian.
std::string encode_pvd(std::span<const DescriptorRecord> records);
// Throws IoError naming the byte offset of the first malformed field.
std::vector<DescriptorRecord> decode_pvd(const std::string& bytes);

void save_pvd(const std::filesystem::path& path, std::span<const DescriptorRecord> records);
std::vector<DescriptorRecord> load_pvd(const std::filesystem::path& path);

}  // namespace scapv::head
