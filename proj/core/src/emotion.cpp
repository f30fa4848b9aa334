#include "affect/emotion.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>

#include "affect/error.hpp"

namespace affect {

std::optional<Emotion> emotion_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    if (kEmotionNames[i] == name) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

EmotionDistribution::EmotionDistribution(const std::array<double, kEmotionCount>& probabilities) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    const double v = probabilities[i];
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::InvalidArgument,
                  "emotion '" + std::string(kEmotionNames[i]) + "' is not finite");
    }
    if (v < 0.0) {
      throw Error(ErrorKind::DistributionNegative,
                  "emotion '" + std::string(kEmotionNames[i]) + "' is negative");
    }
    sum += v;
  }
  if (sum < kSumLow || sum > kSumHigh) {
    throw Error(ErrorKind::DistributionSumOutOfRange,
                "probabilities sum to " + std::to_string(sum) + ", expected 1 (accepted window [0.99, 1.01])");
  }
  // Already normalized input is kept bit for bit, so stored distributions
  // survive a save/load round trip unchanged.
  const bool normalized = std::abs(sum - 1.0) <= 1e-12;
  for (std::size_t i = 0; i < kEmotionCount; ++i) p_[i] = normalized ? probabilities[i] : probabilities[i] / sum;
}

EmotionDistribution EmotionDistribution::one_hot(Emotion e) {
  std::array<double, kEmotionCount> p{};
  p[static_cast<std::size_t>(e)] = 1.0;
  return EmotionDistribution(p);
}

EmotionDistribution EmotionDistribution::uniform() {
  std::array<double, kEmotionCount> p;
  p.fill(1.0 / kEmotionCount);
  return EmotionDistribution(p);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

EmotionDistribution EmotionDistribution::parse(std::string_view assignments) {
  std::array<double, kEmotionCount> p{};
  std::array<bool, kEmotionCount> seen{};
  bool any = false;
  while (!assignments.empty()) {
    const auto comma = assignments.find(',');
    std::string_view item = trim(assignments.substr(0, comma));
    assignments = comma == std::string_view::npos ? std::string_view{} : assignments.substr(comma + 1);
    if (item.empty()) continue;

    std::string_view name = item;
    double value = 1.0;
    if (const auto eq = item.find('='); eq != std::string_view::npos) {
      name = trim(item.substr(0, eq));
      const std::string_view number = trim(item.substr(eq + 1));
      const auto [end, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
      if (ec != std::errc{} || end != number.data() + number.size()) {
        throw Error(ErrorKind::InvalidArgument, "cannot parse value for '" + std::string(name) + "'");
      }
    }
    const auto emotion = emotion_from_name(name);
    if (!emotion) throw Error(ErrorKind::InvalidArgument, "unknown emotion '" + std::string(name) + "'");
    const auto idx = static_cast<std::size_t>(*emotion);
    if (seen[idx]) throw Error(ErrorKind::InvalidArgument, "emotion '" + std::string(name) + "' given twice");
    seen[idx] = true;
    p[idx] = value;
    any = true;
  }
  if (!any) throw Error(ErrorKind::InvalidArgument, "empty emotion assignment");
  return EmotionDistribution(p);
}

double bhattacharyya(const EmotionDistribution& a, const EmotionDistribution& b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < kEmotionCount; ++k) sum += std::sqrt(a[k] * b[k]);
  // Rounding can push identical distributions a few ulps past 1.
  return std::min(sum, 1.0);
}

CandidateSet select_candidates(std::span<const LabeledDistribution> database,
                               const EmotionDistribution& target, double omega_multiplier,
                               std::size_t min_size) {
  if (database.empty()) throw Error(ErrorKind::EmptyDatabase, "no database records to select from");
  if (!(omega_multiplier > 0.0)) throw Error(ErrorKind::InvalidArgument, "omega multiplier must be > 0");
  if (min_size == 0) throw Error(ErrorKind::InvalidArgument, "minimum candidate count must be >= 1");

  std::vector<Candidate> all;
  all.reserve(database.size());
  double sum = 0.0;
  for (const auto& record : database) {
    const double bc = bhattacharyya(target, record.distribution);
    sum += bc;
    all.push_back({record.id, bc});
  }

  CandidateSet result;
  result.database_size = database.size();
  result.mean_bc = sum / static_cast<double>(database.size());
  result.omega = omega_multiplier * result.mean_bc;

  const auto by_similarity = [](const Candidate& x, const Candidate& y) {
    if (x.bc != y.bc) return x.bc > y.bc;
    return x.id < y.id;
  };

  for (const auto& c : all) {
    if (c.bc > result.omega) result.entries.push_back(c);
  }
  if (result.entries.size() < min_size) {
    const std::size_t keep = std::min(min_size, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), by_similarity);
    all.resize(keep);
    result.entries = std::move(all);
    result.fallback_used = true;
  } else {
    std::sort(result.entries.begin(), result.entries.end(), by_similarity);
  }
  return result;
}

}  // namespace affect
