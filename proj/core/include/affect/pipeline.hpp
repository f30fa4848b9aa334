#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "affect/color.hpp"
#include "affect/datastore.hpp"
#include "affect/emotion.hpp"
#include "affect/features.hpp"
#include "affect/image.hpp"
#include "affect/retrieval.hpp"
#include "affect/transfer.hpp"

namespace affect {

inline constexpr const char* kPlanSchema = "affect.plan/1";

struct PipelineParams {
  std::size_t k = kDefaultK;
  double omega_multiplier = kDefaultOmegaMultiplier;
  TransferParams transfer;

  void validate() const;
};

struct SourceImage {
  std::string id;    // consulted by lookup-style feature backends
  std::string path;  // provenance only
  RgbImage pixels;
};

struct PlannedTarget {
  std::string id;
  std::string path;
  double distance = 0.0;
  double bc = 0.0;
  double weight = 0.0;  // bc normalized over the selected targets
};

/// Everything resolved before any pixel is touched: which database images
/// drive the recoloring and with what weight.
struct TransferPlan {
  std::string source_id;
  std::string source_path;
  EmotionDistribution target_distribution = EmotionDistribution::uniform();
  std::size_t database_size = 0;
  std::string database_digest;
  std::size_t candidate_count = 0;
  double omega = 0.0;
  double mean_bc = 0.0;
  bool fallback_used = false;
  std::size_t k_requested = 0;
  std::size_t k_returned = 0;
  std::vector<PlannedTarget> targets;
  std::string histogram_digest;
  PipelineParams params;
  std::string feature_signature;

  nlohmann::json to_json() const;
  /// Sorted keys, no whitespace, floats fixed at 9 decimals.
  std::string canonical() const;
};

struct StageTiming {
  std::string stage;
  double milliseconds = 0.0;
};

struct TransformResult {
  RgbImage output;
  TransferPlan plan;
  std::vector<StageTiming> timings;
};

/// Plan plus the blended histogram it describes.
struct PlanWithHistogram {
  TransferPlan plan;
  ColorHistogram histogram;
  std::vector<StageTiming> timings;
};

/// Emotion filtering, nearest-neighbour selection and histogram blending.
/// Errors are rethrown tagged with the stage they came from.
PlanWithHistogram plan_transfer(const SourceImage& source, const EmotionDistribution& target, const Database& db,
                                const BackendRegistry& registry, const PipelineParams& params);

TransferPlan preview_targets(const SourceImage& source, const EmotionDistribution& target, const Database& db,
                             const BackendRegistry& registry, const PipelineParams& params);

TransformResult transform(const SourceImage& source, const EmotionDistribution& target, const Database& db,
                          const BackendRegistry& registry, const PipelineParams& params);

}  // namespace affect
