#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "affect/color.hpp"
#include "affect/emotion.hpp"
#include "affect/error.hpp"
#include "affect/features.hpp"

namespace affect {

inline constexpr int kDatabaseSchemaVersion = 1;
inline constexpr int kDefaultThumbnailSide = 128;

struct ImageRecord {
  std::string id;
  std::filesystem::path path;  // relative to the image root
  EmotionDistribution distribution = EmotionDistribution::uniform();
  std::optional<FeatureVector> features;
  std::optional<ColorHistogram> histogram;
};

/// Header names of the manifest columns. An empty `id` (or an id column
/// absent from the header) derives ids from the path without extension.
struct ManifestColumns {
  std::string id = "id";
  std::string path = "path";
  std::array<std::string, kEmotionCount> emotions{"anger", "disgust", "fear", "joy", "sadness", "surprise", "neutral"};
};

struct DatastoreConfig {
  FeatureSignature signature;  // must be resolved
  Binning binning = Binning::lab_default();
  ManifestColumns columns;
  int thumbnail_side = kDefaultThumbnailSide;
};

struct RowRejection {
  std::size_t line = 0;
  std::string id;
  std::string reason;  // error kind name, e.g. "DistributionSumOutOfRange"
  std::string detail;
};

struct IngestReport {
  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::vector<RowRejection> rejected;
  std::size_t extracted = 0;  // records whose features and histogram were computed in this run
  std::size_t reused = 0;     // records served from existing sidecars
  std::string digest;
  std::filesystem::path sidecar_dir;
};

/// Immutable in-memory database. Every record carries features and a
/// histogram matching the database signature and binning.
class Database {
 public:
  Database(std::vector<ImageRecord> records, FeatureSignature signature, Binning binning,
           std::filesystem::path image_root, std::filesystem::path sidecar_dir);

  const std::vector<ImageRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const FeatureSignature& signature() const { return signature_; }
  const Binning& binning() const { return binning_; }
  const std::string& digest() const { return digest_; }
  const std::filesystem::path& image_root() const { return image_root_; }
  const std::filesystem::path& sidecar_dir() const { return sidecar_dir_; }
  std::filesystem::path thumbnail_dir() const { return sidecar_dir_ / "thumbnails"; }

  const ImageRecord* find(std::string_view id) const;
  const std::vector<LabeledDistribution>& distributions() const { return distributions_; }

  /// Copy without the listed records (digest recomputed).
  Database without(const std::vector<std::string>& ids) const;

 private:
  std::vector<ImageRecord> records_;
  FeatureSignature signature_;
  Binning binning_;
  std::filesystem::path image_root_;
  std::filesystem::path sidecar_dir_;
  std::string digest_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<LabeledDistribution> distributions_;
};

/// SHA-256 (lowercase hex) over the canonical serialization of the records
/// sorted by id, together with the signature and binning.
std::string database_digest(const std::vector<ImageRecord>& records, const FeatureSignature& signature,
                            const Binning& binning);

/// <manifest dir>/<manifest stem>.affect/<signature key>__<binning key>
std::filesystem::path sidecar_directory(const std::filesystem::path& manifest, const FeatureSignature& signature,
                                        const Binning& binning);

/// File name of a record's thumbnail inside Database::thumbnail_dir().
std::string thumbnail_name(std::string_view id);

/// Builds or refreshes the sidecars for a manifest. Rows failing validation
/// are reported, never fatal; an unreadable or malformed manifest throws
/// ManifestParseError. An empty `image_root` means the manifest directory.
IngestReport ingest(const std::filesystem::path& manifest, const std::filesystem::path& image_root,
                    const DatastoreConfig& config, const BackendRegistry& registry);

/// Loads a previously ingested database, validating every record.
std::shared_ptr<const Database> load_database(const std::filesystem::path& manifest, const DatastoreConfig& config);

}  // namespace affect
