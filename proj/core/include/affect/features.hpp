#pragma once

#include <filesystem>
#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affect/image.hpp"

namespace affect {

/// One (backend, layer) source of raw features and its output length.
struct BackendSpec {
  std::string backend;
  std::string layer;
  std::size_t dim = 0;

  /// "backend/layer:dim"
  std::string to_string() const;
  bool operator==(const BackendSpec&) const = default;
};

/// Ordered list of backend specs defining a feature space. Vectors are only
/// comparable within one signature.
struct FeatureSignature {
  std::vector<BackendSpec> specs;

  /// Parses "alexnet/fc7:4096+googlenet/pool5:1024". The ":dim" suffix may
  /// be omitted, leaving dim = 0 until a registry resolves it.
  static FeatureSignature parse(std::string_view text);

  std::size_t dim() const;
  bool resolved() const;
  std::string to_string() const;
  /// Filesystem-safe form used to key sidecar directories.
  std::string dir_key() const;

  bool operator==(const FeatureSignature&) const = default;
};

struct FeaturePart {
  std::string backend;
  std::string layer;
  std::vector<float> values;  // unit L2 norm unless `zero`
  bool zero = false;          // raw output was all zeros; stored as zeros
  bool operator==(const FeaturePart&) const = default;
};

struct FeatureVector {
  std::vector<FeaturePart> parts;

  std::size_t dim() const;
  FeatureSignature signature() const;
  bool operator==(const FeatureVector&) const = default;
};

/// Divides by the L2 norm in double precision. Returns false (leaving the
/// values untouched) when the input is all zeros.
bool l2_normalize(std::span<float> values);
double l2_norm(std::span<const float> values);

class FeatureBackend {
 public:
  virtual ~FeatureBackend() = default;
  virtual std::string id() const = 0;
  /// 0 if this backend does not provide `layer`.
  virtual std::size_t output_dim(std::string_view layer) const = 0;
  /// Raw (unnormalized) output for `layer`. `image_id` is only consulted by
  /// lookup-style backends.
  virtual std::vector<float> compute(const RgbImage& image, std::string_view layer,
                                     std::string_view image_id) const = 0;
};

inline constexpr int kDefaultFallbackGrid = 4;
inline constexpr int kFallbackHueBins = 64;

/// Deterministic hand-crafted descriptor: mean Lab color of each cell of a
/// grid x grid partition (row-major, each cell as L/100, a/128, b/128)
/// followed by a 64-bin global hue histogram holding pixel fractions.
/// Achromatic pixels count toward hue bin 0. Length grid*grid*3 + 64.
std::vector<double> fallback_descriptor(const RgbImage& image, int grid = kDefaultFallbackGrid);

/// Serves fallback_descriptor under backend id "fallback", layer "grid<g>".
class FallbackBackend final : public FeatureBackend {
 public:
  std::string id() const override { return "fallback"; }
  std::size_t output_dim(std::string_view layer) const override;
  std::vector<float> compute(const RgbImage& image, std::string_view layer, std::string_view image_id) const override;

  static std::string layer_name(int grid) { return "grid" + std::to_string(grid); }
};

/// Vectors computed elsewhere (for example by a network in another runtime),
/// looked up by image id.
class PrecomputedBackend final : public FeatureBackend {
 public:
  explicit PrecomputedBackend(std::string backend_id) : id_(std::move(backend_id)) {}

  void add(std::string image_id, std::string layer, std::vector<float> raw);
  /// Imports every part of every vector in a feature sidecar whose backend
  /// id matches this backend.
  void add_sidecar(const std::filesystem::path& sidecar);

  std::string id() const override { return id_; }
  std::size_t output_dim(std::string_view layer) const override;
  std::vector<float> compute(const RgbImage& image, std::string_view layer, std::string_view image_id) const override;

 private:
  std::string id_;
  std::map<std::string, std::size_t, std::less<>> dims_;
  std::map<std::string, std::map<std::string, std::vector<float>, std::less<>>, std::less<>> table_;  // layer -> id -> raw
};

struct ModelLayer {
  std::string output;  // network blob name
  std::size_t dim = 0;
};

struct ModelConfig {
  std::filesystem::path model;  // ONNX file
  int input_width = 224;
  int input_height = 224;
  double scale = 1.0 / 255.0;
  std::array<double, 3> mean{0.0, 0.0, 0.0};  // subtracted before scaling, in network channel order
  bool swap_rb = true;                         // feed RGB instead of BGR
  std::map<std::string, ModelLayer, std::less<>> layers;
};

/// Network inference through OpenCV's dnn module. The network is loaded on
/// first use; forward passes are serialized by an internal mutex.
class ModelBackend final : public FeatureBackend {
 public:
  ModelBackend(std::string backend_id, ModelConfig config);
  ~ModelBackend() override;

  std::string id() const override { return id_; }
  std::size_t output_dim(std::string_view layer) const override;
  std::vector<float> compute(const RgbImage& image, std::string_view layer, std::string_view image_id) const override;

 private:
  std::string id_;
  ModelConfig config_;
  struct Network;
  mutable std::mutex mutex_;
  mutable std::unique_ptr<Network> net_;
};

class BackendRegistry {
 public:
  /// Registry holding only the fallback descriptor backend.
  static BackendRegistry with_defaults();

  void add(std::shared_ptr<const FeatureBackend> backend);
  std::shared_ptr<const FeatureBackend> find(std::string_view id) const;

  /// Adds backends described by a JSON config file:
  ///   {"backends": [{"id": "alexnet", "type": "onnx", "model": "...", "layers": {"fc7": {"output": "...", "dim": 4096}}},
  ///                 {"id": "alexnet", "type": "precomputed", "sidecar": "features.jsonl"}]}
  /// Relative paths resolve against the config file's directory.
  void load_config(const std::filesystem::path& config);

  /// Fills in missing dims and checks every spec against its backend.
  FeatureSignature resolve(std::string_view signature) const;
  FeatureSignature resolve(FeatureSignature signature) const;

 private:
  std::map<std::string, std::shared_ptr<const FeatureBackend>, std::less<>> backends_;
};

/// Raw output of each spec, L2-normalized per part and concatenated in spec order.
FeatureVector extract(const RgbImage& image, const FeatureSignature& signature, const BackendRegistry& registry,
                      std::string_view image_id = {});

struct FeatureRecord {
  std::string id;
  FeatureVector vector;
};

struct PrecomputedFeatures {
  std::map<std::string, FeatureVector> vectors;
  std::vector<std::string> warnings;
};

/// Line-delimited JSON, one record per line:
///   {"id": "...", "signature": "fallback/grid4:112", "parts": [{"backend": "...", "layer": "...", "values": [...]}]}
void save_precomputed(const std::filesystem::path& path, std::span<const FeatureRecord> records);
std::string feature_record_line(const FeatureRecord& record);

/// Parts off unit norm by more than 1e-6 are renormalized; deviations beyond
/// 1e-3 are reported in `warnings`.
PrecomputedFeatures load_precomputed(const std::filesystem::path& path, const FeatureSignature& expected);

}  // namespace affect
