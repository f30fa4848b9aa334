#include "affect/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "affect/error.hpp"

namespace affect {

namespace {

bool same_layout(const FeatureVector& a, const FeatureVector& b) {
  if (a.parts.size() != b.parts.size()) return false;
  for (std::size_t i = 0; i < a.parts.size(); ++i) {
    const auto& x = a.parts[i];
    const auto& y = b.parts[i];
    if (x.backend != y.backend || x.layer != y.layer || x.values.size() != y.values.size()) return false;
  }
  return true;
}

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.parts.size(); ++i) {
    const auto& x = a.parts[i].values;
    const auto& y = b.parts[i].values;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = static_cast<double>(x[j]) - static_cast<double>(y[j]);
      sum += d * d;
    }
  }
  return sum;
}

}  // namespace

double feature_distance(const FeatureVector& a, const FeatureVector& b) {
  if (!same_layout(a, b)) {
    throw Error(ErrorKind::SignatureMismatch, "feature signatures differ: " + a.signature().to_string() + " vs " +
                                                  b.signature().to_string());
  }
  return std::sqrt(squared_distance(a, b));
}

TargetSelection knn_select(const FeatureVector& source, std::span<const RetrievalCandidate> candidates,
                           std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (candidates.empty()) throw Error(ErrorKind::EmptyCandidates, "no candidates to select targets from");

  std::vector<SelectedTarget> scored;
  scored.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c.features == nullptr) throw Error(ErrorKind::InvalidArgument, "candidate '" + c.id + "' has no features");
    if (!same_layout(source, *c.features)) {
      throw Error(ErrorKind::SignatureMismatch, "candidate '" + c.id + "' has signature " +
                                                    c.features->signature().to_string() + ", source has " +
                                                    source.signature().to_string());
    }
    scored.push_back({c.id, std::sqrt(squared_distance(source, *c.features)), c.bc});
  }

  const auto closer = [](const SelectedTarget& x, const SelectedTarget& y) {
    if (x.distance != y.distance) return x.distance < y.distance;
    return x.id < y.id;
  };
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), closer);
  scored.resize(keep);

  TargetSelection result;
  result.targets = std::move(scored);
  result.k_requested = k;
  result.k_returned = keep;
  return result;
}

}  // namespace affect
