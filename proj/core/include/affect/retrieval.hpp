#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "affect/features.hpp"

namespace affect {

inline constexpr std::size_t kDefaultK = 10;

struct RetrievalCandidate {
  std::string id;
  const FeatureVector* features = nullptr;
  double bc = 0.0;
};

struct SelectedTarget {
  std::string id;
  double distance = 0.0;
  double bc = 0.0;
  bool operator==(const SelectedTarget&) const = default;
};

struct TargetSelection {
  std::vector<SelectedTarget> targets;  // distance ascending, id ascending on ties
  std::size_t k_requested = 0;
  std::size_t k_returned = 0;
};

/// Euclidean distance accumulated in double precision. Signatures must match.
double feature_distance(const FeatureVector& a, const FeatureVector& b);

/// Exact k-nearest neighbours of `source` among `candidates`.
TargetSelection knn_select(const FeatureVector& source, std::span<const RetrievalCandidate> candidates,
                           std::size_t k = kDefaultK);

}  // namespace affect
