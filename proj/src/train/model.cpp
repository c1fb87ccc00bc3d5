#include "scapv/train/model.hpp"

#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/ops.hpp"

namespace scapv::train {

namespace nk = scapv::numkit;

ModelShape infer_shape(const Config& config, const Corpus& corpus) {
  ModelShape s;
  s.num_classes = corpus.num_classes;
  s.views = config.data.views;
  s.views_precomputed = corpus.views_precomputed;
  if (corpus.views_precomputed) {
    const Sample* any = !corpus.train.empty() ? &corpus.train.front() : corpus.test.empty() ? nullptr : &corpus.test.front();
    if (!any) throw ContractError("cannot infer feature-map shape from an empty corpus");
    s.view_channels = any->views.dim(1);
    s.view_tokens = any->views.dim(2) * any->views.dim(3);
  } else {
    const std::size_t factor = std::size_t{1} << config.model.view_widths.size();
    if (config.data.resolution % factor != 0) {
      throw ConfigError("data.resolution " + std::to_string(config.data.resolution) + " is not divisible by " +
                        std::to_string(factor) + " for the view CNN");
    }
    const std::size_t side = config.data.resolution / factor;
    s.view_channels = config.model.view_widths.back();
    s.view_tokens = side * side;
  }
  return s;
}

ScaPvNet::ScaPvNet(const Config& config, const ModelShape& shape, std::uint64_t seed)
    : ablation_(config.model.ablation), shape_(shape) {
  ablation_.validate();
  if (shape_.num_classes < 2) throw ContractError("model needs at least 2 classes");
  const auto& m = config.model;
  if (ablation_.use_point) {
    point_ = std::make_unique<point::PointBranch>(point::PointBranchConfig{m.edgeconv_widths, m.knn_k, m.point_dim},
                                                  params_, seed, "point");
  }
  if (ablation_.use_view && !shape_.views_precomputed) {
    view_cnn_ = std::make_unique<view::ViewCnn>(view::ViewCnnConfig{m.view_widths, true}, params_, seed, "view");
  }

  std::vector<std::size_t> widths;
  const bool aggregate = ablation_.use_point && ablation_.use_view && !ablation_.direct_concat;
  if (aggregate) {
    const aggregate::ImamConfig object_cfg{shape_.view_channels, m.dim, m.heads, m.mlp_hidden, m.blocks,
                                           shape_.view_tokens};
    const aggregate::ImamConfig view_cfg{shape_.view_channels, m.dim, m.heads, m.mlp_hidden, m.blocks, shape_.views};
    if (ablation_.use_object_branch) {
      object_imam_ = std::make_unique<aggregate::Imam>(object_cfg, params_, seed, "agg.object_imam");
      object_cmam_ = std::make_unique<aggregate::Cmam>(aggregate::CmamConfig{object_cfg, m.point_dim}, params_, seed,
                                                       "agg.object_cmam",
                                                       m.share_cmam_imam ? object_imam_.get() : nullptr);
    }
    if (ablation_.use_view_branch) {
      view_imam_ = std::make_unique<aggregate::Imam>(view_cfg, params_, seed, "agg.view_imam");
      view_cmam_ = std::make_unique<aggregate::Cmam>(aggregate::CmamConfig{view_cfg, m.point_dim}, params_, seed,
                                                     "agg.view_cmam", m.share_cmam_imam ? view_imam_.get() : nullptr);
    }
    // Order (fS_obj, fS_view, fC_obj, fC_view), skipping disabled branches.
    if (object_imam_) widths.push_back(m.dim);
    if (view_imam_) widths.push_back(m.dim);
    if (object_cmam_) widths.push_back(m.dim);
    if (view_cmam_) widths.push_back(m.dim);
  } else {
    if (ablation_.use_point) widths.push_back(m.point_dim);
    if (ablation_.use_view) widths.push_back(shape_.view_channels);
  }
  for (auto w : widths) fusion_input_ += w;
  fusion_ = head::make_fusion_mlp(params_, "fusion", fusion_input_, m.fusion_hidden, m.descriptor_dim, seed);
  arcface_ = head::make_arcface_head(params_, "arcface", m.descriptor_dim, shape_.num_classes,
                                     config.finetune.arcface_margin, config.finetune.arcface_scale, seed);
}

bool ScaPvNet::is_backbone(const std::string& name) {
  return name.rfind("point.", 0) == 0 || name.rfind("view.", 0) == 0;
}

std::size_t ScaPvNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.name.rfind("arcface.", 0) != 0) n += p.value.numel();
  }
  return n;
}

Tensor ScaPvNet::point_feature(const Tensor& cloud) const {
  if (!point_) throw ContractError("model variant has no point branch");
  return point_->forward(cloud);
}

Tensor ScaPvNet::view_maps(const Tensor& views) const {
  if (!ablation_.use_view) throw ContractError("model variant has no view branch");
  if (!view_cnn_) {
    if (views.rank() != 4 || views.dim(1) != shape_.view_channels ||
        views.dim(2) * views.dim(3) != shape_.view_tokens) {
      throw DimensionError("precomputed feature maps " + nk::shape_str(views.shape()) + " do not match the model");
    }
    return views;
  }
  return view_cnn_->forward(views);
}

BackboneFeatures ScaPvNet::backbone(const Sample& sample) const {
  BackboneFeatures f;
  if (ablation_.use_point) f.f_point = point_feature(sample.cloud.points);
  if (ablation_.use_view) f.maps = view_maps(sample.views);
  return f;
}

Tensor ScaPvNet::descriptor(const BackboneFeatures& features) const {
  std::vector<Tensor> parts;
  if (object_imam_ || view_imam_) {
    const auto pooled = view::pool_view_features(features.maps);
    std::vector<Tensor> cross;
    if (object_imam_) parts.push_back(object_imam_->class_feature(pooled.object_tokens));
    if (view_imam_) parts.push_back(view_imam_->class_feature(pooled.view_tokens));
    if (object_cmam_) cross.push_back(object_cmam_->forward(pooled.object_tokens, features.f_point));
    if (view_cmam_) cross.push_back(view_cmam_->forward(pooled.view_tokens, features.f_point));
    parts.insert(parts.end(), cross.begin(), cross.end());
  } else {
    if (ablation_.use_point) parts.push_back(features.f_point);
    if (ablation_.use_view) parts.push_back(nk::mean(view::intra_view_pool(features.maps), 0, true));
  }
  return head::fuse_descriptor(parts, fusion_);
}

Tensor ScaPvNet::unit_descriptor(const BackboneFeatures& features) const {
  return nk::l2_normalize(descriptor(features), 1);
}

Tensor ScaPvNet::loss(const BackboneFeatures& features, int label) const {
  const int labels[1] = {label};
  return head::arcface_loss(unit_descriptor(features), labels, arcface_);
}

std::vector<head::DescriptorRecord> embed_samples(const ScaPvNet& model, const std::vector<Sample>& samples) {
  nk::NoGradGuard no_grad;
  std::vector<head::DescriptorRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const Tensor d = model.unit_descriptor(model.backbone(s));
    const auto v = d.data();
    out.push_back({s.object_id, s.label, std::vector<double>(v.begin(), v.end())});
  }
  return out;
}

}  // namespace scapv::train
