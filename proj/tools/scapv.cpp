#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "scapv/head/head.hpp"
#include "scapv/numkit/allocator.hpp"
#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/pvt_io.hpp"
#include "scapv/retrieval/metrics.hpp"
#include "scapv/retrieval/sweep.hpp"
#include "scapv/train/checkpoint.hpp"
#include "scapv/train/config.hpp"
#include "scapv/train/corpus.hpp"
#include "scapv/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace scapv;

namespace {

constexpr int kUsageExit = 2;
constexpr int kRuntimeExit = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

train::Config resolve_config(const Globals& g) {
  train::Config c = g.config.empty() ? train::Config() : train::load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

fs::path require_out(const Globals& g, const char* command) {
  if (g.out.empty()) throw ConfigError(std::string(command) + ": --out is required");
  return g.out;
}

struct GenArgs {
  std::size_t classes = 5;
  std::size_t per_class = 40;
  std::size_t points = 1024;
  std::size_t views = 12;
  std::size_t resolution = 32;
  std::size_t surface_samples = 8192;
  double jitter = 0.01;
};

int run_gen(const Globals& g, const GenArgs& a) {
  train::SyntheticSpec spec;
  spec.classes = train::first_primitives(a.classes);
  spec.instances_per_class = a.per_class;
  spec.points_n = a.points;
  spec.views_M = a.views;
  spec.resolution = a.resolution;
  spec.surface_samples = a.surface_samples;
  spec.jitter_sigma = a.jitter;
  spec.seed = g.seed.value_or(0);
  const auto s = train::generate_synthetic_corpus(spec, require_out(g, "gen"));
  std::cout << "manifest\t" << s.manifest.string() << "\n"
            << "objects\t" << s.objects << "\ntrain\t" << s.train << "\ntest\t" << s.test << "\nclasses\t"
            << s.classes << "\n";
  return 0;
}

struct TrainArgs {
  std::string manifest;
  std::string phase;
  std::string ablate;
  std::string point_checkpoint;
  std::string view_checkpoint;
};

int run_train(const Globals& g, const TrainArgs& a) {
  train::Config config = resolve_config(g);
  if (!a.ablate.empty()) config.model.ablation = train::AblationFlags::from_name(a.ablate);
  const train::Phase phase = train::parse_phase(a.phase);
  const auto corpus = train::load_corpus(train::load_manifest(a.manifest), config.data);
  const fs::path out = require_out(g, "train");
  train::TrainHooks hooks;
  hooks.log_stream = &std::cout;
  const auto result = phase == train::Phase::kFinetune
                          ? train::finetune(config, corpus, {a.point_checkpoint, a.view_checkpoint}, out, hooks)
                          : train::pretrain(config, corpus, phase, out, hooks);
  std::cout << "checkpoint\t" << result.checkpoint_dir.string() << "\n";
  return 0;
}

struct EmbedArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
};

int run_embed(const Globals& g, const EmbedArgs& a) {
  const train::Checkpoint ck = train::load_checkpoint(a.checkpoint);
  const train::ScaPvNet model = train::restore_model(ck);
  const auto corpus = train::load_corpus(train::load_manifest(a.manifest), ck.config.data);
  const auto records = train::embed_samples(model, corpus.split(a.split));
  const fs::path out = require_out(g, "embed");
  head::save_pvd(out, records);
  std::cout << "descriptors\t" << out.string() << "\nrecords\t" << records.size() << "\n";
  return 0;
}

struct EvalArgs {
  std::string db;
  std::string export_path;
  std::string sweep;
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::vector<std::size_t> grid;
};

std::string export_text(const std::vector<head::DescriptorRecord>& records) {
  std::string out;
  char buf[40];
  for (const auto& r : records) {
    out += r.object_id + "\t" + std::to_string(r.label);
    for (double v : r.vector) {
      std::snprintf(buf, sizeof buf, "\t%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

int run_eval(const Globals& g, const EvalArgs& a) {
  if (!a.sweep.empty()) {
    if (a.checkpoint.empty() || a.manifest.empty()) {
      throw ConfigError("eval --sweep needs --checkpoint and --manifest");
    }
    const auto axis = retrieval::parse_sweep_axis(a.sweep);
    const train::Checkpoint ck = train::load_checkpoint(a.checkpoint);
    const train::ScaPvNet model = train::restore_model(ck);
    const auto corpus = train::load_corpus(train::load_manifest(a.manifest), ck.config.data);
    const auto grid = a.grid.empty() ? retrieval::default_sweep_grid(axis) : a.grid;
    const auto rows = retrieval::robustness_sweep(model, corpus.split(a.split), axis, grid);
    const auto text = retrieval::format_sweep(axis, rows);
    std::cout << text;
    if (!g.out.empty()) numkit::write_file_bytes(g.out, text);
    return 0;
  }
  if (a.db.empty()) throw ConfigError("eval needs --db");
  const auto records = head::load_pvd(a.db);
  const auto lists = retrieval::rank_all(records);
  const auto report = retrieval::format_report(retrieval::aggregate_metrics(lists));
  std::cout << report;
  const fs::path out = g.out.empty() ? fs::path(a.db + ".report.tsv") : fs::path(g.out);
  numkit::write_file_bytes(out, report);
  if (!a.export_path.empty()) numkit::write_file_bytes(a.export_path, export_text(records));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  numkit::keep_large_buffers_on_heap();
  CLI::App app{"Point/multi-view retrieval: corpus generation, training, embedding and evaluation"};
  app.require_subcommand(1);
  Globals globals;
  std::uint64_t seed = 0;
  app.add_option("--config", globals.config, "key = value configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "seed overriding train.seed (and the corpus seed for gen)");
  app.add_option("--out", globals.out, "output directory or file");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic primitive corpus");
  gen_cmd->add_option("--classes", gen.classes, "number of primitive classes (1-5)");
  gen_cmd->add_option("--per-class", gen.per_class, "instances per class");
  gen_cmd->add_option("--points", gen.points, "points per cloud");
  gen_cmd->add_option("--views", gen.views, "rendered views per object");
  gen_cmd->add_option("--resolution", gen.resolution, "view side length in pixels");
  gen_cmd->add_option("--surface-samples", gen.surface_samples, "dense surface sample before FPS");
  gen_cmd->add_option("--jitter", gen.jitter, "gaussian jitter sigma");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "pretrain a backbone or fine-tune the full model");
  train_cmd->add_option("--manifest", tr.manifest, "corpus manifest")->required();
  train_cmd->add_option("--phase", tr.phase, "pretrain_point, pretrain_view or finetune")->required();
  train_cmd->add_option("--ablate", tr.ablate, "model variant (full, point_only, view_only, direct_concat, ...)");
  train_cmd->add_option("--point-checkpoint", tr.point_checkpoint, "pretrained point backbone (finetune)");
  train_cmd->add_option("--view-checkpoint", tr.view_checkpoint, "pretrained view backbone (finetune)");

  EmbedArgs em;
  auto* embed_cmd = app.add_subcommand("embed", "write unit descriptors of one split as PVD1");
  embed_cmd->add_option("--checkpoint", em.checkpoint, "fine-tuned checkpoint directory")->required();
  embed_cmd->add_option("--manifest", em.manifest, "corpus manifest")->required();
  embed_cmd->add_option("--split", em.split, "train or test");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "retrieval metrics of a descriptor database");
  eval_cmd->add_option("--db", ev.db, "PVD1 descriptor database");
  eval_cmd->add_option("--export-embeddings", ev.export_path, "write id, label and vector as TSV");
  eval_cmd->add_option("--sweep", ev.sweep, "robustness sweep axis: views or points");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint for --sweep");
  eval_cmd->add_option("--manifest", ev.manifest, "manifest for --sweep");
  eval_cmd->add_option("--split", ev.split, "split for --sweep");
  eval_cmd->add_option("--grid", ev.grid, "sweep settings")->delimiter(',');

  for (auto* sub : {gen_cmd, train_cmd, embed_cmd, eval_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }
  if (*seed_opt) globals.seed = seed;

  try {
    if (*gen_cmd) return run_gen(globals, gen);
    if (*train_cmd) return run_train(globals, tr);
    if (*embed_cmd) return run_embed(globals, em);
    return run_eval(globals, ev);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kRuntimeExit;
  } catch (const DimensionError& e) {
    std::cerr << "shape mismatch: " << e.what() << "\n";
    return kRuntimeExit;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
}
