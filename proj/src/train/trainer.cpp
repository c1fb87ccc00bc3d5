#include "scapv/train/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "scapv/head/head.hpp"
#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/init.hpp"
#include "scapv/numkit/optim.hpp"
#include "scapv/numkit/pvt_io.hpp"
#include "scapv/train/checkpoint.hpp"
#include "scapv/train/model.hpp"
#include "scapv/view/view_branch.hpp"

namespace scapv::train {

namespace nk = scapv::numkit;
namespace fs = std::filesystem;

std::string format_log_line(const EpochLog& e) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu\t%s\t%.10f\t%.6g", e.epoch, phase_name(e.phase).c_str(), e.loss, e.lr);
  return buf;
}

namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const nk::ParameterSet& params) {
  Snapshot s;
  for (const auto& p : params) s.emplace_back(p.value.data().begin(), p.value.data().end());
  return s;
}

void restore(nk::ParameterSet& params, const Snapshot& s) {
  std::size_t i = 0;
  for (auto& p : params) std::ranges::copy(s[i++], p.value.mutable_data().begin());
}

// One phase's epoch loop. `prepare` runs at the start of each epoch and
// returns the parameters the optimizer may touch; `sample_loss` builds the
// loss graph for the i-th training sample.
struct Loop {
  Phase phase;
  const PhaseConfig& phase_config;
  double momentum;
  std::uint64_t seed;
  std::size_t samples;
  std::function<nk::ParameterSet(std::size_t epoch)> prepare;
  std::function<Tensor(std::size_t index)> sample_loss;
  std::function<void()> save;
};

class LogWriter {
 public:
  LogWriter(fs::path path, std::ostream* echo) : path_(std::move(path)), echo_(echo) {}

  void add(const EpochLog& e) {
    entries_.push_back(e);
    const auto line = format_log_line(e);
    text_ += line + "\n";
    if (echo_) *echo_ << line << '\n' << std::flush;
    nk::write_file_bytes(path_, text_);
  }
  void touch() { nk::write_file_bytes(path_, text_); }
  const std::vector<EpochLog>& entries() const { return entries_; }

 private:
  fs::path path_;
  std::ostream* echo_;
  std::string text_;
  std::vector<EpochLog> entries_;
};

void run_loop(const Loop& loop, nk::ParameterSet& all_params, LogWriter& log, const TrainHooks& hooks) {
  if (loop.samples == 0) throw ContractError("training split is empty");
  const auto& pc = loop.phase_config;
  nk::Sgd sgd({loop.momentum, pc.weight_decay});
  Snapshot good = snapshot(all_params);
  std::vector<std::size_t> order(loop.samples);
  for (std::size_t epoch = 0; epoch < pc.epochs; ++epoch) {
    const double lr = pc.lr_schedule.at(epoch);
    try {
      nk::ParameterSet trainable = loop.prepare(epoch);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(nk::derive_seed(loop.seed, phase_name(loop.phase) + ".epoch" + std::to_string(epoch)));
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      for (std::size_t start = 0; start < order.size(); start += pc.batch_size) {
        const std::size_t end = std::min(order.size(), start + pc.batch_size);
        const double weight = 1.0 / static_cast<double>(end - start);
        all_params.zero_grad();
        for (std::size_t b = start; b < end; ++b) {
          const Tensor loss = loop.sample_loss(order[b]);
          total += loss.item();
          nk::scale(loss, weight).backward();
        }
        sgd.step(trainable, lr);
        if (hooks.after_step) hooks.after_step(epoch, all_params);
      }
      all_params.zero_grad();
      log.add({epoch, loop.phase, total / static_cast<double>(order.size()), lr});
      good = snapshot(all_params);
    } catch (const NumericError&) {
      restore(all_params, good);
      all_params.zero_grad();
      loop.save();
      log.touch();
      throw;
    }
  }
  loop.save();
}

TrainResult make_result(const fs::path& out_dir) {
  TrainResult r;
  r.checkpoint_dir = out_dir / "checkpoint";
  r.log_path = out_dir / "log.tsv";
  fs::create_directories(out_dir);
  return r;
}

}  // namespace

TrainResult pretrain(const Config& config, const Corpus& corpus, Phase phase, const fs::path& out_dir,
                     const TrainHooks& hooks) {
  config.validate();
  if (phase == Phase::kFinetune) throw ContractError("pretrain() needs a pretrain phase");
  if (phase == Phase::kPretrainView && corpus.views_precomputed) {
    throw ContractError("view pretraining needs raw view images, the corpus has precomputed feature maps");
  }
  const ModelShape shape = infer_shape(config, corpus);
  const auto& m = config.model;

  nk::ParameterSet params;
  std::unique_ptr<point::PointBranch> point_branch;
  std::unique_ptr<view::ViewCnn> cnn;
  nk::Linear classifier;
  if (phase == Phase::kPretrainPoint) {
    point_branch = std::make_unique<point::PointBranch>(
        point::PointBranchConfig{m.edgeconv_widths, m.knn_k, m.point_dim}, params, config.seed, "point");
    classifier = nk::make_linear(params, "pretrain.point_head", m.point_dim, corpus.num_classes, config.seed);
  } else {
    cnn = std::make_unique<view::ViewCnn>(view::ViewCnnConfig{m.view_widths, true}, params, config.seed, "view");
    classifier = nk::make_linear(params, "pretrain.view_head", cnn->channels(), corpus.num_classes, config.seed);
  }

  TrainResult result = make_result(out_dir);
  LogWriter log(result.log_path, hooks.log_stream);
  log.touch();
  const auto& train = corpus.train;
  Loop loop{phase, config.pretrain, config.momentum, config.seed, train.size(),
            [&](std::size_t) { return params; },
            [&](std::size_t i) {
              const int label[1] = {train[i].label};
              const Tensor feature = point_branch
                                         ? point_branch->forward(train[i].cloud.points)
                                         : nk::mean(view::intra_view_pool(cnn->forward(train[i].views)), 0, true);
              return head::cross_entropy_head(feature, label, classifier);
            },
            [&] { save_checkpoint(result.checkpoint_dir, params, config, shape); }};
  run_loop(loop, params, log, hooks);
  result.log = log.entries();
  return result;
}

TrainResult finetune(const Config& config, const Corpus& corpus, const PretrainedBackbones& backbones,
                     const fs::path& out_dir, const TrainHooks& hooks) {
  config.validate();
  const ModelShape shape = infer_shape(config, corpus);
  ScaPvNet model(config, shape, config.seed);
  auto& params = model.params();

  const auto load_backbone = [&](const fs::path& dir, const std::string& prefix, const char* what) {
    if (dir.empty()) throw ContractError(std::string("finetuning this variant needs a pretrained ") + what +
                                         " checkpoint");
    const Checkpoint ck = load_checkpoint(dir);
    copy_parameters(params, ck.params, prefix);
  };
  if (model.uses_point()) load_backbone(backbones.point, "point.", "point");
  if (model.has_view_cnn()) load_backbone(backbones.view, "view.", "view");

  nk::ParameterSet head_params, all = params;
  for (const auto& p : params) {
    if (!ScaPvNet::is_backbone(p.name)) head_params.add(p.name, p.value);
  }
  nk::ParameterSet backbone_params;
  for (const auto& p : params) {
    if (ScaPvNet::is_backbone(p.name)) backbone_params.add(p.name, p.value);
  }

  TrainResult result = make_result(out_dir);
  LogWriter log(result.log_path, hooks.log_stream);
  log.touch();
  const auto& train = corpus.train;
  const std::size_t freeze_until = config.finetune.freeze_backbones_until;

  // Backbones cannot change while frozen, so their outputs are computed once.
  std::vector<BackboneFeatures> cached;
  bool frozen = false;
  Loop loop{Phase::kFinetune, config.finetune, config.momentum, config.seed, train.size(),
            [&](std::size_t epoch) {
              frozen = epoch < freeze_until;
              backbone_params.set_requires_grad(!frozen);
              if (!frozen) {
                cached.clear();
                return all;
              }
              if (cached.empty()) {
                nk::NoGradGuard no_grad;
                cached.reserve(train.size());
                for (const auto& s : train) cached.push_back(model.backbone(s));
              }
              return head_params;
            },
            [&](std::size_t i) {
              return frozen ? model.loss(cached[i], train[i].label) : model.loss(model.backbone(train[i]), train[i].label);
            },
            [&] {
              backbone_params.set_requires_grad(true);
              save_checkpoint(result.checkpoint_dir, params, config, shape);
            }};
  run_loop(loop, params, log, hooks);
  backbone_params.set_requires_grad(true);
  result.log = log.entries();
  return result;
}

}  // namespace scapv::train
