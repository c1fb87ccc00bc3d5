#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "scapv/numkit/tensor.hpp"
#include "scapv/point/point_branch.hpp"
#include "scapv/train/config.hpp"

namespace scapv::train {

using numkit::Tensor;

// One manifest record. Paths are relative to the manifest's directory.
struct ManifestEntry {
  std::string object_id;
  int label = 0;
  std::string points_path;
  std::string views_path;
  std::string split;  // "train" or "test"
};

// Text format:
//   # comment
//   views.precomputed = true|false        (optional, default false)
//   id <TAB> label <TAB> points <TAB> views <TAB> split
struct Manifest {
  bool views_precomputed = false;
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;

  std::size_t num_classes() const;
};

// Checks unique ids, contiguous labels 0..K-1 and split tags. ContractError
// naming the offending line otherwise.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& root);
Manifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const Manifest& manifest);

struct Sample {
  std::string object_id;
  int label = 0;
  point::PointCloud cloud;  // normalized, data.points points
  Tensor views;             // M x 1 x H x W images, or M x C x H x W precomputed maps
};

struct Corpus {
  bool views_precomputed = false;
  std::size_t num_classes = 0;
  std::vector<Sample> train;
  std::vector<Sample> test;

  const std::vector<Sample>& split(const std::string& name) const;
};

// Reads every referenced PVT1 file. Clouds larger than data.points are
// reduced by farthest-point sampling; smaller ones are a ContractError. Raw
// view stacks must match data.views and data.resolution.
Corpus load_corpus(const Manifest& manifest, const DataConfig& data);

enum class Primitive { kSphere, kBox, kCylinder, kTorus, kCone };

std::string primitive_name(Primitive p);

struct SyntheticSpec {
  std::vector<Primitive> classes = {Primitive::kSphere, Primitive::kBox, Primitive::kCylinder, Primitive::kTorus,
                                    Primitive::kCone};
  std::size_t instances_per_class = 40;
  double jitter_sigma = 0.01;
  std::pair<double, double> scale_range = {0.8, 1.2};
  std::size_t points_n = 1024;
  std::size_t views_M = 12;
  std::size_t resolution = 32;
  // Dense surface sample that views are rendered from before FPS.
  std::size_t surface_samples = 8192;
  std::uint64_t seed = 0;

  void validate() const;
};

// The first `count` primitive kinds in declaration order; ConfigError past 5.
std::vector<Primitive> first_primitives(std::size_t count);

// `count` points on the surface of a randomly proportioned primitive,
// area-weighted, before scaling, jitter and normalization.
std::vector<double> sample_surface(Primitive kind, std::size_t count, std::mt19937_64& rng);

// Per class, instances are ordered by a hash of their id and the first
// round(test_fraction * count) go to test.
std::vector<std::string> assign_splits(const std::vector<std::string>& ids, double test_fraction);

struct CorpusSummary {
  std::filesystem::path manifest;
  std::size_t objects = 0;
  std::size_t train = 0;
  std::size_t test = 0;
  std::size_t classes = 0;
};

// Writes points/<id>.pvt, views/<id>.pvt and manifest.tsv under `out_dir`.
CorpusSummary generate_synthetic_corpus(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace scapv::train
