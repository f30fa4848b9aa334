#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "affect/error.hpp"
#include "affect/features.hpp"
#include "fixtures.hpp"

using namespace affect;
using affect::testing::TempDir;

namespace {

// Returns fixed raw vectors per layer, ignoring the image.
class StubBackend final : public FeatureBackend {
 public:
  StubBackend(std::string id, std::map<std::string, std::vector<float>, std::less<>> layers)
      : id_(std::move(id)), layers_(std::move(layers)) {}
  std::string id() const override { return id_; }
  std::size_t output_dim(std::string_view layer) const override {
    const auto it = layers_.find(layer);
    return it == layers_.end() ? 0 : it->second.size();
  }
  std::vector<float> compute(const RgbImage&, std::string_view layer, std::string_view) const override {
    return layers_.find(layer)->second;
  }

 private:
  std::string id_;
  std::map<std::string, std::vector<float>, std::less<>> layers_;
};

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an affect::Error");
  return ErrorKind::IoError;
}

std::filesystem::path data_dir() { return std::filesystem::path(AFFECT_TEST_DATA_DIR); }

}  // namespace

TEST_CASE("signature parsing and formatting") {
  const auto sig = FeatureSignature::parse("alexnet/fc7:4096+googlenet/pool5:1024");
  REQUIRE(sig.specs.size() == 2);
  CHECK(sig.specs[1] == BackendSpec{"googlenet", "pool5", 1024});
  CHECK(sig.dim() == 5120);
  CHECK(sig.resolved());
  CHECK(sig.to_string() == "alexnet/fc7:4096+googlenet/pool5:1024");
  CHECK(sig.dir_key() == "alexnet-fc7_4096+googlenet-pool5_1024");
  CHECK_FALSE(FeatureSignature::parse("alexnet/fc6").resolved());
  CHECK(kind_of([] { FeatureSignature::parse("alexnet"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { FeatureSignature::parse("alexnet/fc7:x"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { FeatureSignature::parse(""); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("parts are normalized independently and concatenated in order") {
  BackendRegistry reg;
  reg.add(std::make_shared<StubBackend>("stub", std::map<std::string, std::vector<float>, std::less<>>{
                                                    {"pair", {3.0f, 4.0f}}, {"zero", {0.0f, 0.0f, 0.0f}}}));
  std::vector<float> big(4096), small(1024);
  std::mt19937_64 rng(1);
  for (auto& v : big) v = static_cast<float>(affect::testing::unit(rng) * 10);
  for (auto& v : small) v = static_cast<float>(affect::testing::unit(rng));
  reg.add(std::make_shared<StubBackend>("alexnet", std::map<std::string, std::vector<float>, std::less<>>{{"fc7", big}}));
  reg.add(std::make_shared<StubBackend>("googlenet",
                                        std::map<std::string, std::vector<float>, std::less<>>{{"pool5", small}}));
  const RgbImage img = affect::testing::solid(4, 4, 1, 2, 3);

  const auto pair = extract(img, reg.resolve("stub/pair"), reg);
  REQUIRE(pair.parts.size() == 1);
  CHECK(pair.parts[0].values[0] == doctest::Approx(0.6));
  CHECK(pair.parts[0].values[1] == doctest::Approx(0.8));

  const auto two = extract(img, reg.resolve("alexnet/fc7+googlenet/pool5"), reg);
  CHECK(two.dim() == 5120);
  CHECK(two.signature().to_string() == "alexnet/fc7:4096+googlenet/pool5:1024");
  for (const auto& part : two.parts) CHECK(l2_norm(part.values) == doctest::Approx(1.0).epsilon(1e-6));

  const auto swapped = extract(img, reg.resolve("googlenet/pool5+alexnet/fc7"), reg);
  CHECK(swapped.parts[0] == two.parts[1]);
  CHECK(swapped.parts[1] == two.parts[0]);

  const auto zero = extract(img, reg.resolve("stub/zero"), reg);
  CHECK(zero.parts[0].zero);
  for (float v : zero.parts[0].values) CHECK(v == 0.0f);
}

TEST_CASE("registry resolution errors") {
  auto reg = BackendRegistry::with_defaults();
  CHECK(reg.resolve("fallback/grid4").to_string() == "fallback/grid4:112");
  CHECK(reg.resolve("fallback/grid2:76").dim() == 76);
  CHECK(kind_of([&] { reg.resolve("alexnet/fc7"); }) == ErrorKind::UnknownBackend);
  CHECK(kind_of([&] { reg.resolve("fallback/fc7"); }) == ErrorKind::UnknownBackend);
  CHECK(kind_of([&] { reg.resolve("fallback/grid4:100"); }) == ErrorKind::SignatureMismatch);
}

TEST_CASE("fallback descriptor of uniform gray") {
  const RgbImage gray = affect::testing::solid(10, 6, 128, 128, 128);
  const auto d = fallback_descriptor(gray, 1);
  REQUIRE(d.size() == 3 + 64);
  const double s = 128.0 / 255.0;
  const double Y = std::pow((s + 0.055) / 1.055, 2.4);
  const double L = 116.0 * std::cbrt(Y) - 16.0;
  CHECK(d[0] == doctest::Approx(L / 100.0).epsilon(1e-6));
  CHECK(std::abs(d[1]) < 1e-6);
  CHECK(std::abs(d[2]) < 1e-6);
  CHECK(d[3] == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 4; i < d.size(); ++i) CHECK(d[i] == 0.0);

  const auto fv = extract(gray, FeatureSignature::parse("fallback/grid1:67"), BackendRegistry::with_defaults());
  const double norm = std::sqrt(L * L / 1e4 + 1.0);
  CHECK(fv.parts[0].values[0] == doctest::Approx(L / 100.0 / norm).epsilon(1e-6));
  CHECK(fv.parts[0].values[3] == doctest::Approx(1.0 / norm).epsilon(1e-6));
  CHECK(l2_norm(fv.parts[0].values) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("fallback descriptor is deterministic and sees layout") {
  RgbImage img(8, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) {
      auto* px = img.at(x, y);
      px[0] = x < 4 ? 220 : 20;
      px[1] = 30;
      px[2] = x < 4 ? 20 : 220;
    }
  }
  RgbImage mirrored(8, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) std::copy_n(img.at(7 - x, y), 3, mirrored.at(x, y));
  }
  const auto a = fallback_descriptor(img, 2);
  const auto b = fallback_descriptor(mirrored, 2);
  CHECK(a == fallback_descriptor(img, 2));
  CHECK(a != b);
  // cells are row-major: swapping columns swaps cells 0<->1 and 2<->3
  for (int k = 0; k < 3; ++k) {
    CHECK(a[0 * 3 + k] == b[1 * 3 + k]);
    CHECK(a[2 * 3 + k] == b[3 * 3 + k]);
  }
  // hue histograms agree
  for (std::size_t i = 12; i < a.size(); ++i) CHECK(a[i] == b[i]);
  // red at hue 0 and blue at 240 degrees
  CHECK(a[12 + 0] == doctest::Approx(0.5));
  CHECK(a[12 + 44] + a[12 + 42] + a[12 + 43] == doctest::Approx(0.5));
  CHECK(kind_of([&] { fallback_descriptor(img, 0); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("sidecar round trip and validation") {
  TempDir tmp;
  const auto sig = FeatureSignature::parse("alexnet/fc6:3");
  std::vector<FeatureRecord> recs;
  FeatureVector v;
  v.parts.push_back({"alexnet", "fc6", {0.6f, 0.0f, 0.8f}, false});
  recs.push_back({"a", v});
  v.parts[0].values = {0.0f, 1.0f, 0.0f};
  recs.push_back({"b", v});
  const auto path = tmp.path() / "features.jsonl";
  save_precomputed(path, recs);

  const auto loaded = load_precomputed(path, sig);
  CHECK(loaded.warnings.empty());
  REQUIRE(loaded.vectors.size() == 2);
  CHECK(loaded.vectors.at("a") == recs[0].vector);
  CHECK(loaded.vectors.at("b") == recs[1].vector);

  CHECK(kind_of([&] { load_precomputed(path, FeatureSignature::parse("alexnet/fc7:3")); }) ==
        ErrorKind::SignatureMismatch);

  // off-norm vector: renormalized with a warning
  {
    std::ofstream out(path);
    out << R"({"id":"c","signature":"alexnet/fc6:3","parts":[{"backend":"alexnet","layer":"fc6","values":[1.01,0,0]}]})"
        << "\n";
  }
  const auto fixed = load_precomputed(path, sig);
  REQUIRE(fixed.warnings.size() == 1);
  CHECK(fixed.vectors.at("c").parts[0].values[0] == doctest::Approx(1.0));

  {
    std::ofstream out(path);
    out << R"({"id":"c","signature":"alexnet/fc6:3","parts":[{"backend":"alexnet","layer":"fc6","values":[1,0,0]}]})"
        << "\n{not json\n";
  }
  try {
    load_precomputed(path, sig);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).find("features.jsonl:2") != std::string::npos);
  }
}

TEST_CASE("precomputed backend serves vectors by image id") {
  TempDir tmp;
  const auto path = tmp.path() / "vectors.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"img1","signature":"alexnet/fc6:2","parts":[{"backend":"alexnet","layer":"fc6","values":[3,4]}]})"
        << "\n";
  }
  const auto config = tmp.path() / "backends.json";
  {
    std::ofstream out(config);
    out << R"({"backends":[{"id":"alexnet","type":"precomputed","sidecar":"vectors.jsonl"}]})";
  }
  BackendRegistry reg;
  reg.load_config(config);
  const auto sig = reg.resolve("alexnet/fc6");
  CHECK(sig.to_string() == "alexnet/fc6:2");
  const RgbImage img = affect::testing::solid(2, 2, 0, 0, 0);
  const auto fv = extract(img, sig, reg, "img1");
  CHECK(fv.parts[0].values[0] == doctest::Approx(0.6));
  CHECK(kind_of([&] { extract(img, sig, reg, "missing"); }) == ErrorKind::BackendFailure);
}

TEST_CASE("model backend runs an ONNX network") {
  const auto config = nlohmann::json::parse(R"({"backends":[{"id":"tiny","type":"onnx","model":"tiny_model.onnx",
      "input_size":[16,16],"scale":0.00392156862745098,"mean":[0,0,0],"swap_rb":true,
      "layers":{"pool":{"output":"pool","dim":8},"embed":{"output":"embed","dim":4},"bad":{"output":"embed","dim":5}}}]})");
  TempDir tmp;
  std::filesystem::copy_file(data_dir() / "tiny_model.onnx", tmp.path() / "tiny_model.onnx");
  {
    std::ofstream out(tmp.path() / "backends.json");
    out << config.dump();
  }
  auto reg = BackendRegistry::with_defaults();
  reg.load_config(tmp.path() / "backends.json");
  const auto backend = reg.find("tiny");
  REQUIRE(backend);

  RgbImage pattern(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      auto* px = pattern.at(x, y);
      px[0] = static_cast<std::uint8_t>(16 * x);
      px[1] = static_cast<std::uint8_t>(16 * y);
      px[2] = static_cast<std::uint8_t>(8 * (x + y));
    }
  }
  std::ifstream in(data_dir() / "tiny_model_expected.json");
  const auto expected = nlohmann::json::parse(in);
  for (const char* layer : {"pool", "embed"}) {
    const auto raw = backend->compute(pattern, layer, {});
    const auto want = expected.at(layer).get<std::vector<double>>();
    REQUIRE(raw.size() == want.size());
    for (std::size_t i = 0; i < raw.size(); ++i) CHECK(raw[i] == doctest::Approx(want[i]).epsilon(1e-4));
  }
  CHECK(kind_of([&] { backend->compute(pattern, "bad", {}); }) == ErrorKind::BackendFailure);

  // differently sized images are resized to the network input
  const auto fv = extract(affect::testing::noise_image(40, 30, 1), reg.resolve("tiny/embed+fallback/grid2"), reg);
  CHECK(fv.signature().to_string() == "tiny/embed:4+fallback/grid2:76");
}

TEST_CASE("model backend without its model file") {
  ModelConfig mc;
  mc.model = "/nonexistent/model.onnx";
  mc.layers["fc7"] = {"fc7", 4096};
  const ModelBackend backend("alexnet", mc);
  CHECK(backend.output_dim("fc7") == 4096);
  CHECK(kind_of([&] { backend.compute(affect::testing::solid(4, 4, 0, 0, 0), "fc7", {}); }) ==
        ErrorKind::BackendFailure);
}
