#include "affect/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <opencv2/dnn.hpp>
#include <opencv2/imgproc.hpp>

#include <nlohmann/json.hpp>

#include "affect/color.hpp"
#include "affect/error.hpp"

namespace affect {

using nlohmann::json;

std::string BackendSpec::to_string() const {
  std::string s = backend + "/" + layer;
  if (dim > 0) s += ":" + std::to_string(dim);
  return s;
}

FeatureSignature FeatureSignature::parse(std::string_view text) {
  FeatureSignature sig;
  while (!text.empty()) {
    const auto plus = text.find('+');
    const std::string_view item = text.substr(0, plus);
    text = plus == std::string_view::npos ? std::string_view{} : text.substr(plus + 1);

    const auto slash = item.find('/');
    if (slash == std::string_view::npos || slash == 0) {
      throw Error(ErrorKind::InvalidArgument, "feature spec '" + std::string(item) + "' is not backend/layer[:dim]");
    }
    BackendSpec spec;
    spec.backend = std::string(item.substr(0, slash));
    std::string_view rest = item.substr(slash + 1);
    if (const auto colon = rest.find(':'); colon != std::string_view::npos) {
      const std::string digits(rest.substr(colon + 1));
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
        throw Error(ErrorKind::InvalidArgument, "bad dimension in feature spec '" + std::string(item) + "'");
      }
      spec.dim = std::stoul(digits);
      if (spec.dim == 0) throw Error(ErrorKind::InvalidArgument, "feature dimension must be > 0");
      rest = rest.substr(0, colon);
    }
    if (rest.empty()) throw Error(ErrorKind::InvalidArgument, "empty layer in feature spec '" + std::string(item) + "'");
    spec.layer = std::string(rest);
    sig.specs.push_back(std::move(spec));
  }
  if (sig.specs.empty()) throw Error(ErrorKind::InvalidArgument, "empty feature signature");
  return sig;
}

std::size_t FeatureSignature::dim() const {
  std::size_t d = 0;
  for (const auto& s : specs) d += s.dim;
  return d;
}

bool FeatureSignature::resolved() const {
  return !specs.empty() && std::all_of(specs.begin(), specs.end(), [](const auto& s) { return s.dim > 0; });
}

std::string FeatureSignature::to_string() const {
  std::string out;
  for (const auto& s : specs) {
    if (!out.empty()) out += "+";
    out += s.to_string();
  }
  return out;
}

std::string FeatureSignature::dir_key() const {
  std::string out = to_string();
  for (char& c : out) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '+';
    if (c == '/') {
      c = '-';
    } else if (c == ':') {
      c = '_';
    } else if (!safe) {
      c = '_';
    }
  }
  return out;
}

std::size_t FeatureVector::dim() const {
  std::size_t d = 0;
  for (const auto& p : parts) d += p.values.size();
  return d;
}

FeatureSignature FeatureVector::signature() const {
  FeatureSignature sig;
  for (const auto& p : parts) sig.specs.push_back({p.backend, p.layer, p.values.size()});
  return sig;
}

double l2_norm(std::span<const float> values) {
  double sum = 0.0;
  for (float v : values) sum += static_cast<double>(v) * v;
  return std::sqrt(sum);
}

bool l2_normalize(std::span<float> values) {
  const double norm = l2_norm(values);
  if (norm == 0.0) return false;
  for (float& v : values) v = static_cast<float>(v / norm);
  return true;
}

// ---------------------------------------------------------------------------
// Fallback descriptor

std::vector<double> fallback_descriptor(const RgbImage& image, int grid) {
  if (grid < 1) throw Error(ErrorKind::InvalidArgument, "fallback grid must be >= 1");
  if (image.empty()) throw Error(ErrorKind::InvalidArgument, "cannot describe an empty image");

  const auto cells = static_cast<std::size_t>(grid) * grid;
  std::vector<double> out(cells * 3 + kFallbackHueBins, 0.0);
  std::vector<std::size_t> cell_count(cells, 0);
  const double n = static_cast<double>(image.pixel_count());

  for (int y = 0; y < image.height; ++y) {
    const int row = static_cast<int>(static_cast<long long>(y) * grid / image.height);
    for (int x = 0; x < image.width; ++x) {
      const int col = static_cast<int>(static_cast<long long>(x) * grid / image.width);
      const std::uint8_t* px = image.at(x, y);
      const Lab lab = srgb_to_lab(px[0], px[1], px[2]);
      const std::size_t cell = static_cast<std::size_t>(row) * grid + col;
      out[3 * cell + 0] += lab.L / 100.0;
      out[3 * cell + 1] += lab.a / 128.0;
      out[3 * cell + 2] += lab.b / 128.0;
      ++cell_count[cell];

      const int r = px[0], g = px[1], b = px[2];
      const int mx = std::max({r, g, b});
      const int mn = std::min({r, g, b});
      double hue = 0.0;
      if (mx != mn) {
        const double d = mx - mn;
        if (mx == r) {
          hue = 60.0 * std::fmod((g - b) / d + 6.0, 6.0);
        } else if (mx == g) {
          hue = 60.0 * ((b - r) / d + 2.0);
        } else {
          hue = 60.0 * ((r - g) / d + 4.0);
        }
      }
      const int bin = std::min(static_cast<int>(hue / 360.0 * kFallbackHueBins), kFallbackHueBins - 1);
      out[cells * 3 + static_cast<std::size_t>(bin)] += 1.0 / n;
    }
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (cell_count[c] == 0) continue;
    for (int k = 0; k < 3; ++k) out[3 * c + k] /= static_cast<double>(cell_count[c]);
  }
  return out;
}

namespace {

int parse_grid_layer(std::string_view layer) {
  if (!layer.starts_with("grid") || layer.size() == 4) return 0;
  const std::string digits(layer.substr(4));
  if (digits.find_first_not_of("0123456789") != std::string::npos || digits.size() > 3) return 0;
  return std::stoi(digits);
}

}  // namespace

std::size_t FallbackBackend::output_dim(std::string_view layer) const {
  const int g = parse_grid_layer(layer);
  if (g < 1) return 0;
  return static_cast<std::size_t>(g) * g * 3 + kFallbackHueBins;
}

std::vector<float> FallbackBackend::compute(const RgbImage& image, std::string_view layer, std::string_view) const {
  const int g = parse_grid_layer(layer);
  if (g < 1) throw Error(ErrorKind::UnknownBackend, "fallback backend has no layer '" + std::string(layer) + "'");
  const auto raw = fallback_descriptor(image, g);
  return {raw.begin(), raw.end()};
}

// ---------------------------------------------------------------------------
// Sidecar records

namespace {

FeatureRecord parse_record(const std::string& line, std::string* declared_signature) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed feature record: ") + e.what());
  }
  try {
    FeatureRecord rec;
    rec.id = j.at("id").get<std::string>();
    for (const auto& p : j.at("parts")) {
      FeaturePart part;
      part.backend = p.at("backend").get<std::string>();
      part.layer = p.at("layer").get<std::string>();
      part.values = p.at("values").get<std::vector<float>>();
      rec.vector.parts.push_back(std::move(part));
    }
    if (declared_signature) *declared_signature = j.at("signature").get<std::string>();
    return rec;
  } catch (const json::exception& e) {
    std::string id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "?";
    throw Error(ErrorKind::ParseError, "feature record '" + id + "': " + e.what());
  }
}

}  // namespace

std::string feature_record_line(const FeatureRecord& record) {
  json j;
  j["id"] = record.id;
  j["signature"] = record.vector.signature().to_string();
  json parts = json::array();
  for (const auto& p : record.vector.parts) {
    parts.push_back({{"backend", p.backend}, {"layer", p.layer}, {"values", p.values}});
  }
  j["parts"] = std::move(parts);
  return j.dump();
}

void save_precomputed(const std::filesystem::path& path, std::span<const FeatureRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& r : records) out << feature_record_line(r) << '\n';
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

PrecomputedFeatures load_precomputed(const std::filesystem::path& path, const FeatureSignature& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open feature sidecar " + path.string());

  PrecomputedFeatures result;
  const std::string expected_text = expected.to_string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string declared;
    FeatureRecord rec;
    try {
      rec = parse_record(line, &declared);
    } catch (const Error& e) {
      throw Error(ErrorKind::ParseError, path.filename().string() + ":" + std::to_string(line_no) + ": " + e.detail());
    }
    if (declared != expected_text || !(rec.vector.signature() == expected)) {
      throw Error(ErrorKind::SignatureMismatch, "record '" + rec.id + "' has signature " + declared +
                                                    ", expected " + expected_text);
    }
    for (auto& part : rec.vector.parts) {
      const double norm = l2_norm(part.values);
      if (norm == 0.0) {
        part.zero = true;
        continue;
      }
      const double off = std::abs(norm - 1.0);
      if (off > 1e-6) l2_normalize(part.values);
      if (off > 1e-3) {
        result.warnings.push_back("record '" + rec.id + "' part " + part.backend + "/" + part.layer +
                                  " had norm " + std::to_string(norm) + "; renormalized");
      }
    }
    if (!result.vectors.emplace(rec.id, std::move(rec.vector)).second) {
      throw Error(ErrorKind::ParseError, "duplicate feature record '" + rec.id + "'");
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Precomputed backend

void PrecomputedBackend::add(std::string image_id, std::string layer, std::vector<float> raw) {
  if (raw.empty()) throw Error(ErrorKind::InvalidArgument, "empty precomputed vector for '" + image_id + "'");
  auto [it, inserted] = dims_.emplace(layer, raw.size());
  if (!inserted && it->second != raw.size()) {
    throw Error(ErrorKind::InvalidArgument, "precomputed vectors for layer '" + layer + "' differ in length");
  }
  table_[layer][std::move(image_id)] = std::move(raw);
}

void PrecomputedBackend::add_sidecar(const std::filesystem::path& sidecar) {
  std::ifstream in(sidecar, std::ios::binary);
  if (!in) throw Error(ErrorKind::BackendFailure, "cannot open precomputed sidecar " + sidecar.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FeatureRecord rec = parse_record(line, nullptr);
    for (auto& part : rec.vector.parts) {
      if (part.backend == id_) add(rec.id, part.layer, std::move(part.values));
    }
  }
}

std::size_t PrecomputedBackend::output_dim(std::string_view layer) const {
  const auto it = dims_.find(layer);
  return it == dims_.end() ? 0 : it->second;
}

std::vector<float> PrecomputedBackend::compute(const RgbImage&, std::string_view layer,
                                               std::string_view image_id) const {
  const auto layer_it = table_.find(layer);
  if (layer_it == table_.end()) {
    throw Error(ErrorKind::UnknownBackend, "precomputed backend '" + id_ + "' has no layer '" + std::string(layer) + "'");
  }
  const auto it = layer_it->second.find(image_id);
  if (it == layer_it->second.end()) {
    throw Error(ErrorKind::BackendFailure, "precomputed backend '" + id_ + "' has no vector for image '" +
                                               std::string(image_id) + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Model backend

struct ModelBackend::Network {
  cv::dnn::Net net;
};

ModelBackend::ModelBackend(std::string backend_id, ModelConfig config)
    : id_(std::move(backend_id)), config_(std::move(config)) {}

ModelBackend::~ModelBackend() = default;

std::size_t ModelBackend::output_dim(std::string_view layer) const {
  const auto it = config_.layers.find(layer);
  return it == config_.layers.end() ? 0 : it->second.dim;
}

std::vector<float> ModelBackend::compute(const RgbImage& image, std::string_view layer, std::string_view) const {
  const auto layer_it = config_.layers.find(layer);
  if (layer_it == config_.layers.end()) {
    throw Error(ErrorKind::UnknownBackend, "model backend '" + id_ + "' has no layer '" + std::string(layer) + "'");
  }
  if (image.empty()) throw Error(ErrorKind::InvalidArgument, "cannot run inference on an empty image");

  std::lock_guard lock(mutex_);
  if (!net_) {
    if (!std::filesystem::exists(config_.model)) {
      throw Error(ErrorKind::BackendFailure, "model file not found: " + config_.model.string());
    }
    auto network = std::make_unique<Network>();
    try {
      network->net = cv::dnn::readNetFromONNX(config_.model.string());
    } catch (const cv::Exception& e) {
      throw Error(ErrorKind::BackendFailure, "cannot load model " + config_.model.string() + ": " + e.what());
    }
    if (network->net.empty()) throw Error(ErrorKind::BackendFailure, "empty network: " + config_.model.string());
    net_ = std::move(network);
  }

  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  // blobFromImage subtracts the mean after channel swapping, then scales.
  const cv::Mat blob = cv::dnn::blobFromImage(bgr, config_.scale, cv::Size(config_.input_width, config_.input_height),
                                              cv::Scalar(config_.mean[0], config_.mean[1], config_.mean[2]),
                                              config_.swap_rb, false, CV_32F);
  cv::Mat output;
  try {
    net_->net.setInput(blob);
    output = net_->net.forward(layer_it->second.output);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::BackendFailure, "inference failed for " + id_ + "/" + std::string(layer) + ": " + e.what());
  }
  const cv::Mat flat = output.reshape(1, 1);
  std::vector<float> values(flat.begin<float>(), flat.end<float>());
  if (values.size() != layer_it->second.dim) {
    throw Error(ErrorKind::BackendFailure, id_ + "/" + std::string(layer) + " produced " + std::to_string(values.size()) +
                                               " values, expected " + std::to_string(layer_it->second.dim));
  }
  return values;
}

// ---------------------------------------------------------------------------
// Registry and extraction

BackendRegistry BackendRegistry::with_defaults() {
  BackendRegistry r;
  r.add(std::make_shared<FallbackBackend>());
  return r;
}

void BackendRegistry::add(std::shared_ptr<const FeatureBackend> backend) {
  if (!backend) throw Error(ErrorKind::InvalidArgument, "null backend");
  backends_[backend->id()] = std::move(backend);
}

std::shared_ptr<const FeatureBackend> BackendRegistry::find(std::string_view id) const {
  const auto it = backends_.find(id);
  return it == backends_.end() ? nullptr : it->second;
}

void BackendRegistry::load_config(const std::filesystem::path& config) {
  std::ifstream in(config);
  if (!in) throw Error(ErrorKind::IoError, "cannot open backend config " + config.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "backend config " + config.string() + ": " + e.what());
  }
  const auto base = config.parent_path();
  const auto resolve_path = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  try {
    for (const auto& b : j.at("backends")) {
      const auto id = b.at("id").get<std::string>();
      const auto type = b.at("type").get<std::string>();
      if (type == "onnx") {
        ModelConfig mc;
        mc.model = resolve_path(b.at("model").get<std::string>());
        if (b.contains("input_size")) {
          mc.input_width = b["input_size"].at(0).get<int>();
          mc.input_height = b["input_size"].at(1).get<int>();
        }
        mc.scale = b.value("scale", mc.scale);
        if (b.contains("mean")) mc.mean = b["mean"].get<std::array<double, 3>>();
        mc.swap_rb = b.value("swap_rb", mc.swap_rb);
        for (const auto& [name, spec] : b.at("layers").items()) {
          mc.layers[name] = ModelLayer{spec.at("output").get<std::string>(), spec.at("dim").get<std::size_t>()};
        }
        add(std::make_shared<ModelBackend>(id, std::move(mc)));
      } else if (type == "precomputed") {
        auto backend = std::make_shared<PrecomputedBackend>(id);
        backend->add_sidecar(resolve_path(b.at("sidecar").get<std::string>()));
        add(std::move(backend));
      } else {
        throw Error(ErrorKind::ParseError, "unknown backend type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "backend config " + config.string() + ": " + e.what());
  }
}

FeatureSignature BackendRegistry::resolve(std::string_view signature) const {
  return resolve(FeatureSignature::parse(signature));
}

FeatureSignature BackendRegistry::resolve(FeatureSignature signature) const {
  for (auto& spec : signature.specs) {
    const auto backend = find(spec.backend);
    if (!backend) throw Error(ErrorKind::UnknownBackend, "no backend registered as '" + spec.backend + "'");
    const std::size_t dim = backend->output_dim(spec.layer);
    if (dim == 0) {
      throw Error(ErrorKind::UnknownBackend, "backend '" + spec.backend + "' has no layer '" + spec.layer + "'");
    }
    if (spec.dim != 0 && spec.dim != dim) {
      throw Error(ErrorKind::SignatureMismatch, spec.to_string() + " does not match backend output dim " +
                                                    std::to_string(dim));
    }
    spec.dim = dim;
  }
  return signature;
}

FeatureVector extract(const RgbImage& image, const FeatureSignature& signature, const BackendRegistry& registry,
                      std::string_view image_id) {
  if (image.empty()) throw Error(ErrorKind::InvalidArgument, "cannot extract features from an empty image");
  FeatureVector fv;
  for (const auto& spec : signature.specs) {
    const auto backend = registry.find(spec.backend);
    if (!backend) throw Error(ErrorKind::UnknownBackend, "no backend registered as '" + spec.backend + "'");
    FeaturePart part{spec.backend, spec.layer, backend->compute(image, spec.layer, image_id), false};
    if (spec.dim != 0 && part.values.size() != spec.dim) {
      throw Error(ErrorKind::BackendFailure, spec.to_string() + " produced " + std::to_string(part.values.size()) +
                                                 " values");
    }
    part.zero = !l2_normalize(part.values);
    fv.parts.push_back(std::move(part));
  }
  return fv;
}

}  // namespace affect
