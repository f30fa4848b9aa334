#include "affect/pipeline.hpp"

#include <chrono>

#include "affect/error.hpp"
#include "affect/util.hpp"

namespace affect {

using nlohmann::json;

void PipelineParams::validate() const {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (!(omega_multiplier > 0.0)) throw Error(ErrorKind::InvalidArgument, "omega multiplier must be > 0");
  transfer.validate();
}

json TransferPlan::to_json() const {
  json dist = json::object();
  for (std::size_t i = 0; i < kEmotionCount; ++i) dist[std::string(kEmotionNames[i])] = target_distribution[i];

  json targets_json = json::array();
  for (const auto& t : targets) {
    targets_json.push_back({{"id", t.id},
                            {"path", t.path},
                            {"distance", t.distance},
                            {"bc", t.bc},
                            {"weight", t.weight},
                            {"thumbnail", "thumbnails/" + thumbnail_name(t.id)}});
  }

  return {
      {"schema", kPlanSchema},
      {"source", {{"id", source_id}, {"path", source_path}}},
      {"target_distribution", std::move(dist)},
      {"database", {{"size", database_size}, {"digest", database_digest}}},
      {"candidates", {{"count", candidate_count}, {"omega", omega}, {"mean_bc", mean_bc}, {"fallback_used", fallback_used}}},
      {"k_requested", k_requested},
      {"k_returned", k_returned},
      {"targets", std::move(targets_json)},
      {"histogram_digest", histogram_digest},
      {"params",
       {{"k", params.k},
        {"omega_multiplier", params.omega_multiplier},
        {"strength", params.transfer.strength},
        {"smoothing_passes", params.transfer.smoothing_passes},
        {"binning", params.transfer.binning.key()}}},
      {"feature_signature", feature_signature},
  };
}

std::string TransferPlan::canonical() const { return canonical_dump(to_json(), 9); }

namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <typename F>
  auto run(const char* stage, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        record(stage, start);
      } else {
        auto result = f();
        record(stage, start);
        return result;
      }
    } catch (const Error& e) {
      if (!e.stage().empty()) throw;
      throw e.with_stage(stage);
    }
  }

 private:
  void record(const char* stage, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
    sink_.push_back({stage, elapsed.count()});
  }

  std::vector<StageTiming>& sink_;
};

}  // namespace

PlanWithHistogram plan_transfer(const SourceImage& source, const EmotionDistribution& target, const Database& db,
                                const BackendRegistry& registry, const PipelineParams& params) {
  PlanWithHistogram out;
  StageClock clock(out.timings);

  clock.run("validate", [&] {
    params.validate();
    if (source.pixels.empty()) throw Error(ErrorKind::InvalidArgument, "source image is empty");
    if (db.empty()) throw Error(ErrorKind::EmptyDatabase, "database has no records");
    if (!(db.binning() == params.transfer.binning)) {
      throw Error(ErrorKind::BinningMismatch, "database binning " + db.binning().key() + " differs from " +
                                                  params.transfer.binning.key());
    }
  });

  const FeatureVector source_features = clock.run("features", [&] {
    const FeatureSignature signature = registry.resolve(db.signature());
    if (!(signature == db.signature())) {
      throw Error(ErrorKind::SignatureMismatch, "registry resolves " + signature.to_string() + ", database uses " +
                                                    db.signature().to_string());
    }
    return extract(source.pixels, signature, registry, source.id);
  });

  // Candidate fallback keeps at least K images available to the K-NN step.
  const CandidateSet candidates = clock.run("emotion", [&] {
    return select_candidates(db.distributions(), target, params.omega_multiplier, params.k);
  });

  const TargetSelection selection = clock.run("retrieval", [&] {
    std::vector<RetrievalCandidate> pool;
    pool.reserve(candidates.entries.size());
    for (const auto& c : candidates.entries) {
      const ImageRecord* rec = db.find(c.id);
      pool.push_back({c.id, &*rec->features, c.bc});
    }
    return knn_select(source_features, pool, params.k);
  });

  TransferPlan& plan = out.plan;
  clock.run("blend", [&] {
    std::vector<ColorHistogram> histograms;
    std::vector<double> weights;
    double total = 0.0;
    for (const auto& t : selection.targets) {
      histograms.push_back(*db.find(t.id)->histogram);
      weights.push_back(t.bc);
      total += t.bc;
    }
    out.histogram = blend_histograms(histograms, weights);
    for (const auto& t : selection.targets) {
      plan.targets.push_back({t.id, db.find(t.id)->path.generic_string(), t.distance, t.bc, t.bc / total});
    }
  });

  plan.source_id = source.id;
  plan.source_path = source.path;
  plan.target_distribution = target;
  plan.database_size = db.size();
  plan.database_digest = db.digest();
  plan.candidate_count = candidates.entries.size();
  plan.omega = candidates.omega;
  plan.mean_bc = candidates.mean_bc;
  plan.fallback_used = candidates.fallback_used;
  plan.k_requested = selection.k_requested;
  plan.k_returned = selection.k_returned;
  plan.histogram_digest = histogram_digest(out.histogram);
  plan.params = params;
  plan.feature_signature = db.signature().to_string();
  return out;
}

TransferPlan preview_targets(const SourceImage& source, const EmotionDistribution& target, const Database& db,
                             const BackendRegistry& registry, const PipelineParams& params) {
  return plan_transfer(source, target, db, registry, params).plan;
}

TransformResult transform(const SourceImage& source, const EmotionDistribution& target, const Database& db,
                          const BackendRegistry& registry, const PipelineParams& params) {
  PlanWithHistogram planned = plan_transfer(source, target, db, registry, params);
  TransformResult result;
  result.timings = std::move(planned.timings);
  StageClock clock(result.timings);
  result.output = clock.run("transfer", [&] {
    const LabImage lab = rgb_to_lab(source.pixels);
    return lab_to_rgb(transfer_colors(lab, planned.histogram, params.transfer));
  });
  result.plan = std::move(planned.plan);
  return result;
}

}  // namespace affect
