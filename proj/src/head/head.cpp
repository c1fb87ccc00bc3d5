#include "scapv/head/head.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "scapv/numkit/errors.hpp"
#include "scapv/numkit/init.hpp"
#include "scapv/numkit/ops.hpp"
#include "scapv/numkit/pvt_io.hpp"

namespace scapv::head {

namespace nk = scapv::numkit;

namespace {

constexpr double kUnitNormTolerance = 1e-6;

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes, const char* who) {
  if (labels.size() != rows) {
    throw ContractError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ContractError(std::string(who) + ": label " + std::to_string(y) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
  }
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  std::vector<double> v(labels.size() * classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) v[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  return Tensor({labels.size(), classes}, std::move(v));
}

}  // namespace

FusionMlp make_fusion_mlp(nk::ParameterSet& params, const std::string& prefix, std::size_t input_dim,
                          std::size_t hidden_dim, std::size_t output_dim, std::uint64_t seed) {
  return {nk::make_linear(params, prefix + ".fc1", input_dim, hidden_dim, seed),
          nk::make_linear(params, prefix + ".fc2", hidden_dim, output_dim, seed, true,
                          std::sqrt(1.0 / static_cast<double>(hidden_dim)))};
}

Tensor fuse_descriptor(std::span<const Tensor> features, const FusionMlp& mlp) {
  if (features.empty()) throw ContractError("fuse_descriptor: no features");
  Tensor joined = features.size() == 1 ? features[0] : nk::concat(features, 1);
  if (joined.rank() != 2 || joined.dim(1) != mlp.input_dim()) {
    throw DimensionError("fuse_descriptor: concatenated width " + nk::shape_str(joined.shape()) +
                         " does not match MLP input " + std::to_string(mlp.input_dim()));
  }
  return mlp.fc2(nk::relu(mlp.fc1(joined)));
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw DimensionError("cross entropy expects N x K logits, got " + nk::shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  check_labels(labels, n, k, "cross entropy");
  Tensor picked = nk::mul(nk::log(nk::softmax(logits, 1)), one_hot(labels, k));
  Tensor per_row = nk::sum(picked, 1);
  return nk::scale(nk::mean(per_row, 0), -1.0);
}

ArcFaceHead make_arcface_head(nk::ParameterSet& params, const std::string& prefix, std::size_t dim,
                              std::size_t classes, double margin, double scale, std::uint64_t seed) {
  if (!(margin >= 0.0 && margin < std::numbers::pi / 2.0)) throw ConfigError("arcface margin must lie in [0, pi/2)");
  if (!(scale > 0.0)) throw ConfigError("arcface scale must be positive");
  const std::string name = prefix + ".weight";
  auto w = nk::init_param(name, nk::InitSpec::gaussian({dim, classes}, 1.0), nk::derive_seed(seed, name));
  return {params.add(w.name, w.value), margin, scale};
}

Tensor arcface_logits(const Tensor& descriptors, std::span<const int> labels, const ArcFaceHead& head) {
  if (descriptors.rank() != 2 || descriptors.dim(1) != head.weight.dim(0)) {
    throw DimensionError("arcface: descriptors " + nk::shape_str(descriptors.shape()) + " vs weight " +
                         nk::shape_str(head.weight.shape()));
  }
  const std::size_t n = descriptors.dim(0), d = descriptors.dim(1), k = head.weight.dim(1);
  check_labels(labels, n, k, "arcface");
  const auto f = descriptors.data();
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += f[i * d + j] * f[i * d + j];
    if (std::abs(std::sqrt(ss) - 1.0) > kUnitNormTolerance) {
      throw ContractError("arcface: descriptor row " + std::to_string(i) + " has norm " +
                          std::to_string(std::sqrt(ss)) + ", expected 1");
    }
  }
  Tensor cosine = nk::matmul(descriptors, nk::l2_normalize(head.weight, 0));
  Tensor theta = nk::acos(cosine);
  Tensor shifted = nk::add(theta, nk::scale(one_hot(labels, k), head.margin));
  return nk::scale(nk::cos(shifted), head.scale);
}

Tensor arcface_loss(const Tensor& descriptors, std::span<const int> labels, const ArcFaceHead& head) {
  return softmax_cross_entropy(arcface_logits(descriptors, labels, head), labels);
}

Tensor cross_entropy_head(const Tensor& features, std::span<const int> labels, const nk::Linear& classifier) {
  return softmax_cross_entropy(classifier(features), labels);
}

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos, const char* what) {
  if (pos + sizeof(T) > in.size()) {
    throw IoError(std::string("PVD1: truncated ") + what + " at byte offset " + std::to_string(pos));
  }
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string encode_pvd(std::span<const DescriptorRecord> records) {
  const std::size_t d = records.empty() ? 0 : records.front().vector.size();
  std::string out = "PVD1";
  put<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (const auto& r : records) {
    if (r.vector.size() != d) throw DimensionError("PVD1: mixed descriptor widths");
    if (r.object_id.size() > 0xFFFF) throw ContractError("PVD1: object id too long");
    if (r.label < 0) throw ContractError("PVD1: negative label");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(r.object_id.size()));
    out += r.object_id;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.label));
    out.append(reinterpret_cast<const char*>(r.vector.data()), d * sizeof(double));
  }
  return out;
}

std::vector<DescriptorRecord> decode_pvd(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "PVD1") != 0) throw IoError("PVD1: bad magic at byte offset 0");
  std::size_t pos = 4;
  const auto count = take<std::uint32_t>(bytes, pos, "count");
  const auto d = take<std::uint32_t>(bytes, pos, "dimension");
  std::vector<DescriptorRecord> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    DescriptorRecord r;
    const auto len = take<std::uint16_t>(bytes, pos, "id length");
    if (pos + len > bytes.size()) throw IoError("PVD1: truncated id at byte offset " + std::to_string(pos));
    r.object_id = bytes.substr(pos, len);
    pos += len;
    const std::size_t label_at = pos;
    const auto label = take<std::uint32_t>(bytes, pos, "label");
    if (label > 0x7FFFFFFF) throw IoError("PVD1: label out of range at byte offset " + std::to_string(label_at));
    r.label = static_cast<int>(label);
    if (pos + std::size_t{d} * sizeof(double) > bytes.size()) {
      throw IoError("PVD1: truncated vector at byte offset " + std::to_string(pos));
    }
    r.vector.resize(d);
    std::memcpy(r.vector.data(), bytes.data() + pos, std::size_t{d} * sizeof(double));
    pos += std::size_t{d} * sizeof(double);
    out.push_back(std::move(r));
  }
  if (pos != bytes.size()) throw IoError("PVD1: trailing bytes at byte offset " + std::to_string(pos));
  return out;
}

void save_pvd(const std::filesystem::path& path, std::span<const DescriptorRecord> records) {
  nk::write_file_bytes(path, encode_pvd(records));
}

std::vector<DescriptorRecord> load_pvd(const std::filesystem::path& path) {
  return decode_pvd(nk::read_file_bytes(path));
}

}  // namespace scapv::head
