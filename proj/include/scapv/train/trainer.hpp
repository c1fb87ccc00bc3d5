#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "scapv/numkit/tensor.hpp"
#include "scapv/train/config.hpp"
#include "scapv/train/corpus.hpp"

namespace scapv::train {

struct EpochLog {
  std::size_t epoch = 0;
  Phase phase = Phase::kPretrainPoint;
  double loss = 0.0;  // mean training loss over the epoch
  double lr = 0.0;
};

// "epoch <TAB> phase <TAB> loss <TAB> lr"
std::string format_log_line(const EpochLog& entry);

struct TrainHooks {
  // Echo of every log line as it is produced.
  std::ostream* log_stream = nullptr;
  // Called after every optimizer step with the 0-based epoch.
  std::function<void(std::size_t epoch, const numkit::ParameterSet& params)> after_step;
};

struct TrainResult {
  std::filesystem::path checkpoint_dir;  // <out>/checkpoint
  std::filesystem::path log_path;        // <out>/log.tsv
  std::vector<EpochLog> log;
};

// Cross-entropy pretraining of one backbone. The point branch is trained on
// f_point, the view CNN on the mean of its per-view tokens, each through a
// throwaway linear classifier stored as pretrain.{point,view}_head.*. On a
// non-finite loss the last good parameters are written before rethrowing.
TrainResult pretrain(const Config& config, const Corpus& corpus, Phase phase, const std::filesystem::path& out_dir,
                     const TrainHooks& hooks = {});

struct PretrainedBackbones {
  std::filesystem::path point;  // required when the variant uses points
  std::filesystem::path view;   // required when the variant runs the view CNN
};

// ArcFace fine-tuning of the variant selected by config.model.ablation.
// Epochs before finetune.freeze_backbones_until leave point.* and view.*
// untouched; afterwards every parameter is updated.
TrainResult finetune(const Config& config, const Corpus& corpus, const PretrainedBackbones& backbones,
                     const std::filesystem::path& out_dir, const TrainHooks& hooks = {});

}  // namespace scapv::train
