#include "affect/datastore.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "affect/image.hpp"
#include "affect/util.hpp"

namespace affect {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kDatabaseFile = "database.json";
constexpr const char* kFeaturesFile = "features.jsonl";
constexpr const char* kHistogramsFile = "histograms.jsonl";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view line, char delimiter) {
  std::vector<std::string> out;
  while (true) {
    const auto pos = line.find(delimiter);
    out.emplace_back(trim(line.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    line.remove_prefix(pos + 1);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorKind::IoError, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct ManifestRow {
  std::size_t line = 0;
  std::string id;
  std::string path;
  std::optional<EmotionDistribution> distribution;
};

struct ParsedManifest {
  std::size_t rows = 0;
  std::vector<ManifestRow> valid;
  std::vector<RowRejection> rejected;
};

ParsedManifest parse_manifest(const fs::path& manifest, const ManifestColumns& columns) {
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw Error(ErrorKind::ManifestParseError, "cannot open manifest " + manifest.string());

  ParsedManifest parsed;
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  char delimiter = ',';
  std::map<std::string, std::size_t> column_index;
  std::size_t path_col = 0;
  std::optional<std::size_t> id_col;
  std::array<std::size_t, kEmotionCount> emotion_cols{};
  std::set<std::string> seen_ids;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    const std::string_view content = trim(line);
    if (content.empty() || content.front() == '#') continue;

    if (header.empty()) {
      delimiter = content.find('\t') != std::string_view::npos ? '\t' : ',';
      header = split(content, delimiter);
      for (std::size_t i = 0; i < header.size(); ++i) column_index.emplace(header[i], i);
      const auto require = [&](const std::string& name) {
        const auto it = column_index.find(name);
        if (it == column_index.end()) {
          throw Error(ErrorKind::ManifestParseError, manifest.string() + ": header lacks column '" + name + "'");
        }
        return it->second;
      };
      path_col = require(columns.path);
      for (std::size_t k = 0; k < kEmotionCount; ++k) emotion_cols[k] = require(columns.emotions[k]);
      if (!columns.id.empty()) {
        if (const auto it = column_index.find(columns.id); it != column_index.end()) id_col = it->second;
      }
      continue;
    }

    ++parsed.rows;
    const auto fields = split(content, delimiter);
    ManifestRow row;
    row.line = line_no;
    const auto reject = [&](ErrorKind kind, std::string detail) {
      parsed.rejected.push_back({line_no, row.id, std::string(to_string(kind)), std::move(detail)});
    };
    if (fields.size() != header.size()) {
      row.id = id_col && *id_col < fields.size() ? fields[*id_col] : "";
      reject(ErrorKind::ParseError, "expected " + std::to_string(header.size()) + " columns, found " +
                                        std::to_string(fields.size()));
      continue;
    }
    row.path = fields[path_col];
    if (id_col) {
      row.id = fields[*id_col];
    } else {
      row.id = fs::path(row.path).replace_extension().generic_string();
    }
    if (row.id.empty()) {
      reject(ErrorKind::ParseError, "empty image id");
      continue;
    }
    if (row.path.empty()) {
      reject(ErrorKind::ParseError, "empty image path");
      continue;
    }

    std::array<double, kEmotionCount> p{};
    bool numbers_ok = true;
    for (std::size_t k = 0; k < kEmotionCount && numbers_ok; ++k) {
      const std::string& f = fields[emotion_cols[k]];
      const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), p[k]);
      if (ec != std::errc{} || end != f.data() + f.size()) {
        reject(ErrorKind::ParseError, "column '" + columns.emotions[k] + "' is not a number: '" + f + "'");
        numbers_ok = false;
      }
    }
    if (!numbers_ok) continue;
    try {
      row.distribution = EmotionDistribution(p);
    } catch (const Error& e) {
      reject(e.kind(), e.detail());
      continue;
    }
    if (!seen_ids.insert(row.id).second) {
      reject(ErrorKind::InvalidArgument, "duplicate image id");
      continue;
    }
    parsed.valid.push_back(std::move(row));
  }
  if (header.empty()) throw Error(ErrorKind::ManifestParseError, manifest.string() + ": missing header row");
  return parsed;
}

json binning_json(const Binning& b) {
  json j = json::object();
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& ch = b.channels[c];
    j[kLabChannelNames[c]] = {{"bins", ch.bins}, {"lo", ch.lo}, {"hi", ch.hi}};
  }
  return j;
}

Binning binning_from_json(const json& j) {
  Binning b;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& ch = j.at(kLabChannelNames[c]);
    b.channels[c] = {ch.at("bins").get<int>(), ch.at("lo").get<double>(), ch.at("hi").get<double>()};
  }
  return b;
}

std::string histogram_line(const std::string& id, const ColorHistogram& h) {
  json j;
  j["id"] = id;
  j["binning"] = h.binning.key();
  for (std::size_t c = 0; c < 3; ++c) j[kLabChannelNames[c]] = h.density[c];
  return j.dump();
}

struct HistogramSidecar {
  std::map<std::string, ColorHistogram> histograms;
};

// Reads the histogram sidecar. `expected_ids` names the record expected on
// each line so parse failures can point at it.
HistogramSidecar read_histograms(const fs::path& path, const Binning& binning,
                                 const std::vector<std::string>& expected_ids, bool strict) {
  HistogramSidecar out;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (strict) throw Error(ErrorKind::MissingSidecar, "histogram sidecar missing: " + path.string());
    return out;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string expected = line_no <= expected_ids.size() ? expected_ids[line_no - 1] : "?";
    try {
      const json j = json::parse(line);
      ColorHistogram h;
      h.binning = binning;
      if (j.at("binning").get<std::string>() != binning.key()) {
        throw Error(ErrorKind::BinningMismatch, "histogram binning " + j.at("binning").get<std::string>() +
                                                    " differs from " + binning.key());
      }
      for (std::size_t c = 0; c < 3; ++c) h.density[c] = j.at(kLabChannelNames[c]).get<std::vector<double>>();
      h.validate();
      out.histograms[j.at("id").get<std::string>()] = std::move(h);
    } catch (const json::exception& e) {
      if (strict) {
        throw Error(ErrorKind::ParseError, path.filename().string() + ":" + std::to_string(line_no) + " (record '" +
                                               expected + "'): " + e.what());
      }
    } catch (const Error& e) {
      if (strict) {
        throw Error(e.kind() == ErrorKind::BinningMismatch ? e.kind() : ErrorKind::ParseError,
                    path.filename().string() + ":" + std::to_string(line_no) + " (record '" + expected +
                        "'): " + e.detail());
      }
    }
  }
  return out;
}

std::map<std::string, FeatureVector> read_features(const fs::path& path, const FeatureSignature& signature,
                                                   const std::vector<std::string>& expected_ids, bool strict) {
  if (!fs::exists(path)) {
    if (strict) throw Error(ErrorKind::MissingSidecar, "feature sidecar missing: " + path.string());
    return {};
  }
  try {
    return load_precomputed(path, signature).vectors;
  } catch (const Error& e) {
    if (!strict) return {};
    // Name the record expected on the failing line.
    std::string detail = e.detail();
    const auto colon = detail.find(':');
    if (e.kind() == ErrorKind::ParseError && colon != std::string::npos) {
      const auto rest = detail.substr(colon + 1);
      std::size_t line_no = 0;
      std::from_chars(rest.data(), rest.data() + rest.size(), line_no);
      if (line_no >= 1 && line_no <= expected_ids.size()) {
        detail = "record '" + expected_ids[line_no - 1] + "': " + detail;
      }
    }
    throw Error(e.kind(), detail);
  }
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  Sha256 sha;
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const auto n = static_cast<std::size_t>(in.gcount());
    if (n) sha.update(std::string_view(buffer.data(), n));
  }
  return sha.hex_digest();
}

void check_record(const ImageRecord& r, const FeatureSignature& signature, const Binning& binning) {
  if (!r.features) throw Error(ErrorKind::MissingSidecar, "record '" + r.id + "' has no features");
  if (!r.histogram) throw Error(ErrorKind::MissingSidecar, "record '" + r.id + "' has no color histogram");
  if (!(r.features->signature() == signature)) {
    throw Error(ErrorKind::SignatureMismatch, "record '" + r.id + "' features have signature " +
                                                  r.features->signature().to_string());
  }
  for (const auto& part : r.features->parts) {
    const double norm = l2_norm(part.values);
    if (part.zero ? norm != 0.0 : std::abs(norm - 1.0) > 1e-6) {
      throw Error(ErrorKind::ParseError, "record '" + r.id + "' part " + part.backend + "/" + part.layer +
                                             " is not unit length");
    }
  }
  if (!(r.histogram->binning == binning)) {
    throw Error(ErrorKind::BinningMismatch, "record '" + r.id + "' histogram binning differs");
  }
  r.histogram->validate();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string database_digest(const std::vector<ImageRecord>& records, const FeatureSignature& signature,
                            const Binning& binning) {
  std::vector<const ImageRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

  Sha256 sha;
  sha.update("affect-db/" + std::to_string(kDatabaseSchemaVersion) + "\n");
  for (auto name : kEmotionNames) sha.update(std::string(name) + ",");
  sha.update("\n" + signature.to_string() + "\n" + binning.key() + "\n");
  char buf[48];
  for (const ImageRecord* r : sorted) {
    sha.update("record\t" + r->id + "\t" + r->path.generic_string() + "\n");
    for (double p : r->distribution.values()) {
      std::snprintf(buf, sizeof buf, "%.17g,", p);
      sha.update(std::string_view(buf));
    }
    if (r->features) {
      for (const auto& part : r->features->parts) {
        sha.update("\n" + part.backend + "/" + part.layer + ":");
        for (float v : part.values) {
          std::snprintf(buf, sizeof buf, "%.9g,", static_cast<double>(v));
          sha.update(std::string_view(buf));
        }
      }
    }
    if (r->histogram) {
      for (std::size_t c = 0; c < 3; ++c) {
        sha.update(std::string("\n") + kLabChannelNames[c] + ":");
        for (double d : r->histogram->density[c]) {
          std::snprintf(buf, sizeof buf, "%.17g,", d);
          sha.update(std::string_view(buf));
        }
      }
    }
    sha.update("\n");
  }
  return sha.hex_digest();
}

Database::Database(std::vector<ImageRecord> records, FeatureSignature signature, Binning binning,
                   fs::path image_root, fs::path sidecar_dir)
    : records_(std::move(records)),
      signature_(std::move(signature)),
      binning_(std::move(binning)),
      image_root_(std::move(image_root)),
      sidecar_dir_(std::move(sidecar_dir)) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    check_record(records_[i], signature_, binning_);
    if (!index_.emplace(records_[i].id, i).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate record id '" + records_[i].id + "'");
    }
    distributions_.push_back({records_[i].id, records_[i].distribution});
  }
  digest_ = database_digest(records_, signature_, binning_);
}

const ImageRecord* Database::find(std::string_view id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

Database Database::without(const std::vector<std::string>& ids) const {
  std::vector<ImageRecord> kept;
  for (const auto& r : records_) {
    if (std::find(ids.begin(), ids.end(), r.id) == ids.end()) kept.push_back(r);
  }
  return Database(std::move(kept), signature_, binning_, image_root_, sidecar_dir_);
}

fs::path sidecar_directory(const fs::path& manifest, const FeatureSignature& signature, const Binning& binning) {
  const fs::path base = manifest.parent_path() / (manifest.stem().string() + ".affect");
  return base / (signature.dir_key() + "__" + binning.key());
}

std::string thumbnail_name(std::string_view id) { return sha256_hex(id).substr(0, 20) + ".png"; }

IngestReport ingest(const fs::path& manifest, const fs::path& image_root_arg, const DatastoreConfig& config,
                    const BackendRegistry& registry) {
  if (!config.signature.resolved()) throw Error(ErrorKind::InvalidArgument, "feature signature is not resolved");
  if (!fs::exists(manifest)) throw Error(ErrorKind::ManifestParseError, "manifest not found: " + manifest.string());
  const fs::path image_root = image_root_arg.empty() ? manifest.parent_path() : image_root_arg;

  ParsedManifest parsed = parse_manifest(manifest, config.columns);
  IngestReport report;
  report.rows = parsed.rows;
  report.rejected = std::move(parsed.rejected);

  const fs::path dir = sidecar_directory(manifest, config.signature, config.binning);
  report.sidecar_dir = dir;
  fs::create_directories(dir / "thumbnails");

  // Previous run, if any: reuse records whose image bytes are unchanged, but
  // only when the old sidecars still hash to the digest recorded with them.
  std::map<std::string, std::string> previous_sha;
  std::vector<ImageRecord> previous_records;
  std::string previous_digest;
  if (fs::exists(dir / kDatabaseFile)) {
    try {
      const json prev = json::parse(read_file(dir / kDatabaseFile));
      previous_digest = prev.at("digest").get<std::string>();
      for (const auto& r : prev.at("records")) {
        ImageRecord rec;
        rec.id = r.at("id").get<std::string>();
        rec.path = fs::path(r.at("path").get<std::string>());
        rec.distribution = EmotionDistribution(r.at("distribution").get<std::array<double, kEmotionCount>>());
        previous_sha[rec.id] = r.value("image_sha256", "");
        previous_records.push_back(std::move(rec));
      }
    } catch (const std::exception&) {
      previous_sha.clear();
      previous_records.clear();
    }
  }
  auto previous_features = read_features(dir / kFeaturesFile, config.signature, {}, false);
  auto previous_histograms = read_histograms(dir / kHistogramsFile, config.binning, {}, false).histograms;
  {
    for (auto& rec : previous_records) {
      const auto f = previous_features.find(rec.id);
      const auto h = previous_histograms.find(rec.id);
      if (f != previous_features.end()) rec.features = f->second;
      if (h != previous_histograms.end()) rec.histogram = h->second;
    }
    if (database_digest(previous_records, config.signature, config.binning) != previous_digest) previous_sha.clear();
  }

  struct Work {
    ManifestRow row;
    fs::path image_path;
    std::string image_sha;
    ImageRecord record;
    bool reuse = false;
    std::optional<RowRejection> rejection;
  };
  std::vector<Work> work;
  work.reserve(parsed.valid.size());
  for (auto& row : parsed.valid) {
    Work w;
    w.image_path = image_root / row.path;
    w.record.id = row.id;
    w.record.path = fs::path(row.path);
    w.record.distribution = *row.distribution;
    w.row = std::move(row);
    if (!fs::is_regular_file(w.image_path)) {
      w.rejection = RowRejection{w.row.line, w.row.id, "ImageNotFound", "image not found: " + w.image_path.string()};
    } else {
      w.image_sha = file_sha256(w.image_path);
      const auto f = previous_features.find(w.row.id);
      const auto h = previous_histograms.find(w.row.id);
      const auto s = previous_sha.find(w.row.id);
      if (f != previous_features.end() && h != previous_histograms.end() && s != previous_sha.end() &&
          s->second == w.image_sha) {
        w.record.features = std::move(f->second);
        w.record.histogram = std::move(h->second);
        w.reuse = true;
      }
    }
    work.push_back(std::move(w));
  }

  const auto process = [&](Work& w) {
    if (w.rejection) return;
    const fs::path thumb = dir / "thumbnails" / thumbnail_name(w.record.id);
    if (w.reuse && fs::exists(thumb)) return;
    try {
      const RgbImage image = read_image(w.image_path);
      if (!w.reuse) {
        w.record.features = extract(image, config.signature, registry, w.record.id);
        w.record.histogram = compute_histogram(rgb_to_lab(image), config.binning);
      }
      write_png(thumb, make_thumbnail(image, config.thumbnail_side));
    } catch (const Error& e) {
      w.rejection = RowRejection{w.row.line, w.row.id, std::string(to_string(e.kind())), e.detail()};
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 8u));
  if (workers == 1 || work.size() < 2) {
    for (auto& w : work) process(w);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < work.size(); i = next++) process(work[i]);
      });
    }
  }

  std::vector<ImageRecord> accepted;
  std::vector<std::string> image_shas;
  for (auto& w : work) {
    if (w.rejection) {
      report.rejected.push_back(std::move(*w.rejection));
      continue;
    }
    (w.reuse ? report.reused : report.extracted) += 1;
    image_shas.push_back(w.image_sha);
    accepted.push_back(std::move(w.record));
  }
  std::sort(report.rejected.begin(), report.rejected.end(),
            [](const RowRejection& a, const RowRejection& b) { return a.line < b.line; });
  report.accepted = accepted.size();
  report.digest = database_digest(accepted, config.signature, config.binning);

  std::string features_text;
  std::string histograms_text;
  json records = json::array();
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    const auto& r = accepted[i];
    features_text += feature_record_line({r.id, *r.features}) + "\n";
    histograms_text += histogram_line(r.id, *r.histogram) + "\n";
    json dist = json::array();
    for (double p : r.distribution.values()) dist.push_back(p);
    records.push_back({{"id", r.id},
                       {"path", r.path.generic_string()},
                       {"distribution", std::move(dist)},
                       {"image_sha256", image_shas[i]}});
  }

  std::error_code ec;
  fs::path root_rel = fs::relative(image_root, manifest.parent_path(), ec);
  if (ec || root_rel.empty()) root_rel = fs::absolute(image_root);

  json db;
  db["schema_version"] = kDatabaseSchemaVersion;
  db["channel_order"] = json(std::vector<std::string>(kEmotionNames.begin(), kEmotionNames.end()));
  db["feature_signature"] = config.signature.to_string();
  db["binning"] = binning_json(config.binning);
  db["image_root"] = root_rel.generic_string();
  db["digest"] = report.digest;
  db["records"] = std::move(records);

  write_file(dir / kFeaturesFile, features_text);
  write_file(dir / kHistogramsFile, histograms_text);
  write_file(dir / kDatabaseFile, db.dump(2) + "\n");
  return report;
}

std::shared_ptr<const Database> load_database(const fs::path& manifest, const DatastoreConfig& config) {
  if (!config.signature.resolved()) throw Error(ErrorKind::InvalidArgument, "feature signature is not resolved");
  const fs::path dir = sidecar_directory(manifest, config.signature, config.binning);

  if (!fs::exists(dir / kDatabaseFile)) {
    // Distinguish a changed configuration from a database never ingested.
    const fs::path base = dir.parent_path();
    const std::string sig_prefix = config.signature.dir_key() + "__";
    bool other_binning = false;
    bool any = false;
    if (fs::is_directory(base)) {
      for (const auto& entry : fs::directory_iterator(base)) {
        if (!fs::exists(entry.path() / kDatabaseFile)) continue;
        any = true;
        if (entry.path().filename().string().starts_with(sig_prefix)) other_binning = true;
      }
    }
    if (other_binning) {
      throw Error(ErrorKind::BinningMismatch, "database was ingested with a different binning than " +
                                                  config.binning.key() + " for " + config.signature.to_string());
    }
    if (any) {
      throw Error(ErrorKind::SignatureMismatch, "no sidecars for feature signature " + config.signature.to_string() +
                                                    " (ingest with this signature first)");
    }
    throw Error(ErrorKind::MissingSidecar, "database not ingested for " + manifest.string() + " with signature " +
                                               config.signature.to_string());
  }

  json db;
  try {
    db = json::parse(read_file(dir / kDatabaseFile));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, (dir / kDatabaseFile).string() + ": " + e.what());
  }

  std::vector<ImageRecord> records;
  std::vector<std::string> ids;
  fs::path image_root;
  std::string stored_digest;
  try {
    if (db.at("schema_version").get<int>() != kDatabaseSchemaVersion) {
      throw Error(ErrorKind::ParseError, "unsupported database schema version");
    }
    const auto order = db.at("channel_order").get<std::vector<std::string>>();
    if (order != std::vector<std::string>(kEmotionNames.begin(), kEmotionNames.end())) {
      throw Error(ErrorKind::ParseError, "database channel order differs from anger,disgust,fear,joy,sadness,surprise,neutral");
    }
    if (db.at("feature_signature").get<std::string>() != config.signature.to_string()) {
      throw Error(ErrorKind::SignatureMismatch, "database signature " + db["feature_signature"].get<std::string>() +
                                                    " differs from " + config.signature.to_string());
    }
    if (!(binning_from_json(db.at("binning")) == config.binning)) {
      throw Error(ErrorKind::BinningMismatch, "database binning differs from " + config.binning.key());
    }
    const fs::path root(db.at("image_root").get<std::string>());
    image_root = root.is_absolute() ? root : manifest.parent_path() / root;
    stored_digest = db.at("digest").get<std::string>();
    for (const auto& r : db.at("records")) {
      ImageRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.path = fs::path(r.at("path").get<std::string>());
      const auto p = r.at("distribution").get<std::vector<double>>();
      if (p.size() != kEmotionCount) throw Error(ErrorKind::ParseError, "record '" + rec.id + "' distribution is not 7 values");
      std::array<double, kEmotionCount> arr{};
      std::copy(p.begin(), p.end(), arr.begin());
      rec.distribution = EmotionDistribution(arr);
      ids.push_back(rec.id);
      records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, (dir / kDatabaseFile).string() + ": " + e.what());
  }

  auto features = read_features(dir / kFeaturesFile, config.signature, ids, true);
  auto histograms = read_histograms(dir / kHistogramsFile, config.binning, ids, true).histograms;
  for (auto& rec : records) {
    auto f = features.find(rec.id);
    if (f == features.end()) throw Error(ErrorKind::MissingSidecar, "no features stored for record '" + rec.id + "'");
    auto h = histograms.find(rec.id);
    if (h == histograms.end()) throw Error(ErrorKind::MissingSidecar, "no histogram stored for record '" + rec.id + "'");
    rec.features = std::move(f->second);
    rec.histogram = std::move(h->second);
  }

  auto database = std::make_shared<const Database>(std::move(records), config.signature, config.binning,
                                                    image_root, dir);
  if (database->digest() != stored_digest) {
    throw Error(ErrorKind::ParseError, "database digest mismatch: sidecars were modified after ingest");
  }
  return database;
}

}  // namespace affect
