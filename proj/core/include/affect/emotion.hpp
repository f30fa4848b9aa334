#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace affect {

inline constexpr std::size_t kEmotionCount = 7;

/// Channel order shared by every interface and file format.
enum class Emotion : std::size_t { Anger, Disgust, Fear, Joy, Sadness, Surprise, Neutral };

inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "anger", "disgust", "fear", "joy", "sadness", "surprise", "neutral"};

std::optional<Emotion> emotion_from_name(std::string_view name);

/// Probabilities over the seven emotion channels. Always non-negative and
/// summing to one; construction renormalizes inputs whose sum lies within
/// [0.99, 1.01] and rejects everything else. Sums within 1e-12 of one are
/// kept as given.
class EmotionDistribution {
 public:
  static constexpr double kSumLow = 0.99;
  static constexpr double kSumHigh = 1.01;

  explicit EmotionDistribution(const std::array<double, kEmotionCount>& probabilities);

  static EmotionDistribution one_hot(Emotion e);
  static EmotionDistribution uniform();

  /// Parses "anger=0.5,sadness=0.3,fear=0.2". Unnamed channels are zero;
  /// a bare name ("joy") means name=1.
  static EmotionDistribution parse(std::string_view assignments);

  double operator[](Emotion e) const { return p_[static_cast<std::size_t>(e)]; }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::array<double, kEmotionCount>& values() const { return p_; }

  bool operator==(const EmotionDistribution&) const = default;

 private:
  std::array<double, kEmotionCount> p_{};
};

/// Bhattacharyya coefficient: sum over channels of sqrt(a_k * b_k).
double bhattacharyya(const EmotionDistribution& a, const EmotionDistribution& b);

struct LabeledDistribution {
  std::string id;
  EmotionDistribution distribution;
};

struct Candidate {
  std::string id;
  double bc = 0.0;
};

struct CandidateSet {
  std::vector<Candidate> entries;  // bc descending, id ascending on ties
  double omega = 0.0;
  double mean_bc = 0.0;
  std::size_t database_size = 0;
  bool fallback_used = false;
};

inline constexpr double kDefaultOmegaMultiplier = 1.5;

/// Keeps database entries whose similarity to `target` strictly exceeds
/// omega_multiplier * mean similarity. When fewer than `min_size` survive,
/// the top `min_size` by similarity are returned instead and the set is
/// flagged as a fallback.
CandidateSet select_candidates(std::span<const LabeledDistribution> database,
                               const EmotionDistribution& target,
                               double omega_multiplier = kDefaultOmegaMultiplier,
                               std::size_t min_size = 1);

}  // namespace affect
