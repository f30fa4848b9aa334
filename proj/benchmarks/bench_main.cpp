// Microbenchmarks for the hot paths: candidate filtering, exact KNN, color
// conversion and histogram transfer.

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "affect/color.hpp"
#include "affect/emotion.hpp"
#include "affect/retrieval.hpp"
#include "affect/transfer.hpp"

using namespace affect;

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

EmotionDistribution random_distribution(std::mt19937_64& rng) {
  std::array<double, kEmotionCount> p{};
  double sum = 0.0;
  for (auto& v : p) sum += v = unit(rng) + 1e-3;
  for (auto& v : p) v /= sum;
  return EmotionDistribution(p);
}

RgbImage noise(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RgbImage img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      auto* px = img.at(x, y);
      for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>((x * 3 + y * (c + 1) + rng() % 64) & 0xff);
    }
  }
  return img;
}

void BM_SelectCandidates(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::vector<LabeledDistribution> db;
  for (std::int64_t i = 0; i < state.range(0); ++i) db.push_back({"r" + std::to_string(i), random_distribution(rng)});
  const auto target = random_distribution(rng);
  for (auto _ : state) benchmark::DoNotOptimize(select_candidates(db, target, 1.5, kDefaultK));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SelectCandidates)->Arg(1980)->Arg(20000);

void BM_KnnSelect(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(2);
  const auto make = [&] {
    FeaturePart part{"b", "l", std::vector<float>(dim), false};
    for (auto& v : part.values) v = static_cast<float>(unit(rng));
    l2_normalize(part.values);
    FeatureVector f;
    f.parts.push_back(std::move(part));
    return f;
  };
  const FeatureVector source = make();
  std::vector<FeatureVector> vectors;
  for (std::size_t i = 0; i < n; ++i) vectors.push_back(make());
  std::vector<RetrievalCandidate> cands;
  for (std::size_t i = 0; i < n; ++i) cands.push_back({"c" + std::to_string(i), &vectors[i], 0.0});
  for (auto _ : state) benchmark::DoNotOptimize(knn_select(source, cands, kDefaultK));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KnnSelect)->Args({300, 112})->Args({300, 5120})->Args({2000, 5120});

void BM_RgbToLab(benchmark::State& state) {
  const RgbImage img = noise(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(rgb_to_lab(img));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_RgbToLab)->Arg(256)->Arg(1024);

void BM_Transfer(benchmark::State& state) {
  const LabImage src = rgb_to_lab(noise(static_cast<int>(state.range(0)), 4));
  const auto target = compute_histogram(rgb_to_lab(noise(128, 5)), Binning::lab_default());
  for (auto _ : state) benchmark::DoNotOptimize(transfer_colors(src, target, TransferParams{}));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_Transfer)->Arg(256)->Arg(1024);

}  // namespace
BENCHMARK_MAIN();
