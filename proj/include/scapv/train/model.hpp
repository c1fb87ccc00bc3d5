#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "scapv/aggregate/aggregate.hpp"
#include "scapv/head/head.hpp"
#include "scapv/point/point_branch.hpp"
#include "scapv/train/config.hpp"
#include "scapv/train/corpus.hpp"
#include "scapv/view/view_branch.hpp"

namespace scapv::train {

// Data-dependent sizes the model is built for.
struct ModelShape {
  std::size_t num_classes = 0;
  std::size_t views = 12;
  bool views_precomputed = false;
  std::size_t view_channels = 64;  // C of the per-view maps
  std::size_t view_tokens = 16;    // H x W of the per-view maps
};

// Sizes for a raw-view corpus follow from the CNN; precomputed maps supply
// their own channel and spatial extents.
ModelShape infer_shape(const Config& config, const Corpus& corpus);

struct BackboneFeatures {
  Tensor f_point;  // 1 x D_p, undefined without the point modality
  Tensor maps;     // M x C x H x W, undefined without the view modality
};

// The assembled retrieval model for one ablation variant. Parameter names:
//   point.*                      point branch
//   view.*                       view CNN (absent for precomputed maps)
//   agg.{object,view}_{imam,cmam}.*
//   fusion.*                     descriptor MLP
//   arcface.weight               training-only classifier
class ScaPvNet {
 public:
  ScaPvNet(const Config& config, const ModelShape& shape, std::uint64_t seed);

  numkit::ParameterSet& params() { return params_; }
  const numkit::ParameterSet& params() const { return params_; }
  const ModelShape& shape() const { return shape_; }
  const AblationFlags& ablation() const { return ablation_; }

  bool uses_point() const { return ablation_.use_point; }
  bool uses_view() const { return ablation_.use_view; }
  bool has_view_cnn() const { return view_cnn_ != nullptr; }
  const point::PointBranch* point_branch() const { return point_.get(); }
  const view::ViewCnn* view_cnn() const { return view_cnn_.get(); }

  Tensor point_feature(const Tensor& cloud) const;
  // Raw images go through the CNN; precomputed maps pass through.
  Tensor view_maps(const Tensor& views) const;
  BackboneFeatures backbone(const Sample& sample) const;

  // Unnormalized f_global (1 x D_desc).
  Tensor descriptor(const BackboneFeatures& features) const;
  Tensor unit_descriptor(const BackboneFeatures& features) const;
  Tensor loss(const BackboneFeatures& features, int label) const;

  // Width of the concatenated descriptor-MLP input.
  std::size_t fusion_input_dim() const { return fusion_input_; }
  // Scalars of everything used at retrieval time (the ArcFace weight is
  // training-only and excluded).
  std::size_t parameter_count() const;

  static bool is_backbone(const std::string& name);

 private:
  AblationFlags ablation_;
  ModelShape shape_;
  numkit::ParameterSet params_;
  std::unique_ptr<point::PointBranch> point_;
  std::unique_ptr<view::ViewCnn> view_cnn_;
  std::unique_ptr<aggregate::Imam> object_imam_, view_imam_;
  std::unique_ptr<aggregate::Cmam> object_cmam_, view_cmam_;
  std::size_t fusion_input_ = 0;
  head::FusionMlp fusion_;
  head::ArcFaceHead arcface_;
};

// Unit descriptors for `samples`, in order, evaluated without a tape.
std::vector<head::DescriptorRecord> embed_samples(const ScaPvNet& model, const std::vector<Sample>& samples);

}  // namespace scapv::train
