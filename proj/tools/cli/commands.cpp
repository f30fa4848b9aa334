#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>

#include "affect/datastore.hpp"
#include "affect/error.hpp"
#include "affect/pipeline.hpp"
#include "affect/service.hpp"
#include "affect/util.hpp"

namespace affect::cli {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string db;
  std::string features = "fallback/grid4";
  std::string backends;
  int bins = 256;
};

struct Failure {
  int code;
  std::string message;
};

bool is_validation(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::DistributionNegative:
    case ErrorKind::DistributionSumOutOfRange:
    case ErrorKind::ManifestParseError:
    case ErrorKind::ImageDecodeError:
      return true;
    default:
      return false;
  }
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

void add_common(CLI::App& cmd, CommonOptions& opts) {
  cmd.add_option("--db", opts.db, "Database manifest (default: $" + std::string(kDatabaseEnv) + ")");
  cmd.add_option("--features", opts.features, "Feature signature, e.g. fallback/grid4 or alexnet/fc7+googlenet/pool5")
      ->capture_default_str();
  cmd.add_option("--backends", opts.backends, "JSON file describing model or precomputed feature backends");
  cmd.add_option("--bins", opts.bins, "Histogram bins per Lab channel")->capture_default_str()->check(CLI::Range(2, 4096));
}

std::string database_path(const CommonOptions& opts) {
  if (!opts.db.empty()) return opts.db;
  if (const char* env = std::getenv(kDatabaseEnv); env != nullptr && *env != '\0') return env;
  throw Failure{kExitValidation, "no database given: pass --db or set " + std::string(kDatabaseEnv)};
}

std::shared_ptr<BackendRegistry> make_registry(const CommonOptions& opts) {
  auto registry = std::make_shared<BackendRegistry>(BackendRegistry::with_defaults());
  if (!opts.backends.empty()) registry->load_config(opts.backends);
  return registry;
}

DatastoreConfig make_config(const CommonOptions& opts, const BackendRegistry& registry, const std::string& signature) {
  DatastoreConfig config;
  config.signature = registry.resolve(signature);
  config.binning = Binning::lab_default(opts.bins);
  return config;
}

std::shared_ptr<const Database> open_database(const CommonOptions& opts, const BackendRegistry& registry,
                                              const std::string& signature) {
  const std::string path = database_path(opts);
  DatastoreConfig config;
  try {
    config = make_config(opts, registry, signature);
  } catch (const Error& e) {
    throw Failure{kExitValidation, "feature signature " + signature + ": " + std::string(e.what())};
  }
  try {
    return load_database(path, config);
  } catch (const Error& e) {
    throw Failure{kExitPipeline, "stage load: signature " + config.signature.to_string() + ": " + e.what()};
  }
}

EmotionDistribution parse_emotion_arg(const std::string& text) {
  try {
    return EmotionDistribution::parse(text);
  } catch (const Error& e) {
    throw Failure{kExitValidation, "--emotion: " + std::string(e.what())};
  }
}

SourceImage load_source(const std::string& path, const std::string& id_override) {
  SourceImage source;
  source.path = path;
  source.id = id_override.empty() ? fs::path(path).stem().string() : id_override;
  try {
    source.pixels = read_image(path);
  } catch (const Error& e) {
    throw Failure{kExitValidation, "source image: " + std::string(e.what())};
  }
  return source;
}

std::string describe_distribution(const EmotionDistribution& d) {
  std::string out;
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    if (d[i] == 0.0) continue;
    if (!out.empty()) out += ",";
    out += std::string(kEmotionNames[i]) + "=" + format_fixed(d[i], 4);
  }
  return out;
}

void print_gallery(const TransferPlan& plan, std::ostream& out) {
  out << "target gallery: " << plan.k_returned << " of " << plan.k_requested << " requested, " << plan.candidate_count
      << " candidates of " << plan.database_size << ", omega " << format_fixed(plan.omega, 6)
      << (plan.fallback_used ? ", fallback used" : "") << "\n";
  out << pad("rank", 6) << pad("id", 24) << pad("bc", 12) << pad("distance", 12) << "weight\n";
  for (std::size_t i = 0; i < plan.targets.size(); ++i) {
    const auto& t = plan.targets[i];
    out << pad(std::to_string(i + 1), 6) << pad(t.id, 24) << pad(format_fixed(t.bc, 6), 12)
        << pad(format_fixed(t.distance, 6), 12) << format_fixed(t.weight, 6) << "\n";
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw Failure{kExitOutput, "cannot write " + path.string()};
}

// --------------------------------------------------------------------------

struct IngestArgs {
  CommonOptions common;
  std::string image_root;
  std::string id_column = "id";
  std::string path_column = "path";
  std::vector<std::string> emotion_columns;
};

int cmd_ingest(const IngestArgs& args, std::ostream& out) {
  const std::string manifest = database_path(args.common);
  auto registry = make_registry(args.common);
  DatastoreConfig config;
  try {
    config = make_config(args.common, *registry, args.common.features);
  } catch (const Error& e) {
    throw Failure{kExitValidation, e.what()};
  }
  config.columns.id = args.id_column;
  config.columns.path = args.path_column;
  if (!args.emotion_columns.empty()) {
    if (args.emotion_columns.size() != kEmotionCount) {
      throw Failure{kExitValidation, "--emotion-columns needs 7 names (anger, disgust, fear, joy, sadness, surprise, neutral order)"};
    }
    std::copy(args.emotion_columns.begin(), args.emotion_columns.end(), config.columns.emotions.begin());
  }

  IngestReport report;
  try {
    report = ingest(manifest, args.image_root, config, *registry);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ManifestParseError) throw Failure{kExitValidation, e.what()};
    throw Failure{kExitPipeline, e.what()};
  }

  out << "manifest:   " << manifest << "\n";
  out << "signature:  " << config.signature.to_string() << "\n";
  out << "binning:    " << config.binning.key() << "\n";
  out << "rows:       " << report.rows << "\n";
  out << "accepted:   " << report.accepted << "\n";
  out << "rejected:   " << report.rejected.size() << "\n";
  out << "extracted:  " << report.extracted << "\n";
  out << "reused:     " << report.reused << "\n";
  out << "digest:     " << report.digest << "\n";
  for (const auto& r : report.rejected) {
    out << "  line " << r.line << " id '" << r.id << "': " << r.reason << ": " << r.detail << "\n";
  }
  if (report.accepted == 0) throw Failure{kExitValidation, "no records accepted"};
  return kExitOk;
}

// --------------------------------------------------------------------------

struct TransformArgs {
  CommonOptions common;
  std::string source;
  std::string source_id;
  std::string emotion;
  std::string output;
  std::size_t k = kDefaultK;
  double omega_multiplier = kDefaultOmegaMultiplier;
  double strength = 1.0;
  int passes = 0;
  std::string format = "table";
};

PipelineParams params_from(std::size_t k, double omega, double strength, int passes, int bins) {
  PipelineParams p;
  p.k = k;
  p.omega_multiplier = omega;
  p.transfer.strength = strength;
  p.transfer.smoothing_passes = passes;
  p.transfer.binning = Binning::lab_default(bins);
  return p;
}

int cmd_transform(const TransformArgs& args, std::ostream& out) {
  const EmotionDistribution target = parse_emotion_arg(args.emotion);
  const PipelineParams params = params_from(args.k, args.omega_multiplier, args.strength, args.passes, args.common.bins);
  SourceImage source = load_source(args.source, args.source_id);
  auto registry = make_registry(args.common);
  const auto db = open_database(args.common, *registry, args.common.features);

  TransformResult result;
  try {
    result = transform(source, target, *db, *registry, params);
  } catch (const Error& e) {
    const std::string stage = e.stage().empty() ? "pipeline" : e.stage();
    throw Failure{is_validation(e.kind()) && e.stage() == "validate" ? kExitValidation : kExitPipeline,
                  "stage " + stage + ": " + std::string(to_string(e.kind())) + ": " + e.detail()};
  }

  const fs::path output(args.output);
  const fs::path plan_path = output.string() + ".plan.json";
  try {
    write_png(output, result.output);
  } catch (const Error& e) {
    throw Failure{kExitOutput, e.what()};
  }
  write_text(plan_path, result.plan.canonical() + "\n");

  if (args.format == "json") {
    out << result.plan.canonical() << "\n";
  } else {
    out << "emotion: " << describe_distribution(target) << "\n";
    print_gallery(result.plan, out);
    out << "wrote " << output.string() << " and " << plan_path.string() << "\n";
  }
  return kExitOk;
}

// --------------------------------------------------------------------------

struct AblateArgs {
  CommonOptions common;
  std::vector<std::string> sources;
  std::vector<std::string> signatures;
  std::string emotion;
  std::string out_dir;
  bool render = false;
  std::size_t k = kDefaultK;
  double omega_multiplier = kDefaultOmegaMultiplier;
  double strength = 1.0;
  int passes = 0;
};

int cmd_ablate(const AblateArgs& args, std::ostream& out) {
  const EmotionDistribution target = parse_emotion_arg(args.emotion);
  const PipelineParams params = params_from(args.k, args.omega_multiplier, args.strength, args.passes, args.common.bins);
  auto registry = make_registry(args.common);

  std::vector<SourceImage> sources;
  for (const auto& s : args.sources) sources.push_back(load_source(s, ""));

  // Open every database up front so a missing signature fails before any work.
  std::vector<std::shared_ptr<const Database>> dbs;
  for (const auto& sig : args.signatures) dbs.push_back(open_database(args.common, *registry, sig));
  if (!args.out_dir.empty()) fs::create_directories(args.out_dir);

  struct Row {
    std::string source;
    std::string signature;
    TransferPlan plan;
    double mean_distance = 0.0;
  };
  std::vector<Row> rows;
  for (const auto& source : sources) {
    for (std::size_t s = 0; s < dbs.size(); ++s) {
      Row row;
      row.source = fs::path(source.path).filename().string();
      row.signature = dbs[s]->signature().to_string();
      ColorHistogram blended;
      try {
        auto planned = plan_transfer(source, target, *dbs[s], *registry, params);
        row.plan = std::move(planned.plan);
        blended = std::move(planned.histogram);
      } catch (const Error& e) {
        throw Failure{kExitPipeline, "signature " + row.signature + ", source " + row.source + ": stage " +
                                         e.stage() + ": " + std::string(to_string(e.kind())) + ": " + e.detail()};
      }
      double sum = 0.0;
      for (const auto& t : row.plan.targets) sum += t.distance;
      row.mean_distance = row.plan.targets.empty() ? 0.0 : sum / static_cast<double>(row.plan.targets.size());

      if (!args.out_dir.empty()) {
        const std::string stem = fs::path(source.path).stem().string() + "." + dbs[s]->signature().dir_key();
        write_text(fs::path(args.out_dir) / (stem + ".plan.json"), row.plan.canonical() + "\n");
        if (args.render) {
          const LabImage recolored = transfer_colors(rgb_to_lab(source.pixels), blended, params.transfer);
          try {
            write_png(fs::path(args.out_dir) / (stem + ".png"), lab_to_rgb(recolored));
          } catch (const Error& e) {
            throw Failure{kExitOutput, e.what()};
          }
        }
      }
      rows.push_back(std::move(row));
    }
  }

  out << "ablation: " << sources.size() << " source(s) x " << dbs.size() << " signature(s), emotion "
      << describe_distribution(target) << ", k " << params.k << "\n";
  out << pad("source", 20) << pad("signature", 28) << pad("k", 4) << pad("mean_distance", 15) << "targets\n";
  for (const auto& row : rows) {
    std::string ids;
    for (const auto& t : row.plan.targets) ids += (ids.empty() ? "" : ",") + t.id;
    out << pad(row.source, 20) << pad(row.signature, 28) << pad(std::to_string(row.plan.k_returned), 4)
        << pad(format_fixed(row.mean_distance, 6), 15) << ids << "\n";
  }
  if (dbs.size() > 1) {
    out << "overlap:\n";
    for (std::size_t i = 0; i < rows.size(); i += dbs.size()) {
      for (std::size_t a = 0; a < dbs.size(); ++a) {
        for (std::size_t b = a + 1; b < dbs.size(); ++b) {
          const auto& ra = rows[i + a];
          const auto& rb = rows[i + b];
          std::set<std::string> ta, tb;
          for (const auto& t : ra.plan.targets) ta.insert(t.id);
          for (const auto& t : rb.plan.targets) tb.insert(t.id);
          std::size_t shared = 0;
          for (const auto& id : ta) shared += tb.count(id);
          out << "  " << ra.source << ": " << ra.signature << " vs " << rb.signature << " share " << shared << " of "
              << std::max(ta.size(), tb.size()) << "\n";
        }
      }
    }
  }
  return kExitOk;
}

// --------------------------------------------------------------------------

int cmd_stats(const CommonOptions& opts, std::ostream& out) {
  auto registry = make_registry(opts);
  const auto db = open_database(opts, *registry, opts.features);
  out << "records:    " << db->size() << "\n";
  out << "signature:  " << db->signature().to_string() << "\n";
  out << "binning:    " << db->binning().key() << "\n";
  out << "digest:     " << db->digest() << "\n";
  return kExitOk;
}

struct ServeArgs {
  CommonOptions common;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin;
  std::size_t max_payload = 16u << 20;
};

int cmd_serve(const ServeArgs& args, std::ostream& out) {
  auto registry = make_registry(args.common);
  std::shared_ptr<const Database> db;
  try {
    db = open_database(args.common, *registry, args.common.features);
  } catch (const Failure& f) {
    // Serve anyway; data routes answer 503 until a database is available.
    out << "warning: " << f.message << "\n";
  }
  ServiceConfig config;
  config.cors_origin = args.cors_origin;
  config.max_payload_bytes = args.max_payload;
  config.defaults.transfer.binning = Binning::lab_default(args.common.bins);
  Service service(config, db, registry);
  const int port = service.bind(args.host, args.port);
  out << "listening on http://" << args.host << ":" << port << "\n" << std::flush;
  service.listen();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Emotion-guided image recoloring"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a manifest and build feature/histogram sidecars");
  add_common(*ingest_cmd, ingest_args.common);
  ingest_cmd->add_option("--image-root", ingest_args.image_root, "Directory image paths are relative to (default: manifest dir)");
  ingest_cmd->add_option("--id-column", ingest_args.id_column, "Header of the id column; ids derive from paths when absent")
      ->capture_default_str();
  ingest_cmd->add_option("--path-column", ingest_args.path_column, "Header of the image path column")->capture_default_str();
  ingest_cmd->add_option("--emotion-columns", ingest_args.emotion_columns,
                         "Headers of the 7 probability columns in anger..neutral order")
      ->delimiter(',');

  TransformArgs transform_args;
  auto* transform_cmd = app.add_subcommand("transform", "Recolor a source image toward a target emotion distribution");
  add_common(*transform_cmd, transform_args.common);
  transform_cmd->add_option("source", transform_args.source, "Source image (PNG/JPEG)")->required();
  transform_cmd->add_option("--emotion", transform_args.emotion, "e.g. joy or anger=0.5,sadness=0.3,fear=0.2")->required();
  transform_cmd->add_option("-o,--output", transform_args.output, "Output PNG; the plan is written to <output>.plan.json")
      ->required();
  transform_cmd->add_option("--source-id", transform_args.source_id, "Id used by lookup feature backends (default: file stem)");
  transform_cmd->add_option("--k", transform_args.k, "Number of target images")->capture_default_str()->check(CLI::PositiveNumber);
  transform_cmd->add_option("--omega-mult", transform_args.omega_multiplier, "Candidate threshold multiplier")
      ->capture_default_str()->check(CLI::PositiveNumber);
  transform_cmd->add_option("--strength", transform_args.strength, "Transfer strength in [0,1]")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  transform_cmd->add_option("--passes", transform_args.passes, "Progressive matching passes")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  transform_cmd->add_option("--format", transform_args.format, "Gallery output: table or json")
      ->capture_default_str()->check(CLI::IsMember({"table", "json"}));

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Compare target selections across feature signatures");
  add_common(*ablate_cmd, ablate_args.common);
  ablate_cmd->add_option("sources", ablate_args.sources, "Source images")->required();
  ablate_cmd->add_option("--emotion", ablate_args.emotion, "Target emotion assignment")->required();
  ablate_cmd->add_option("--signature", ablate_args.signatures, "Feature signature to compare (repeat)")->required();
  ablate_cmd->add_option("--out-dir", ablate_args.out_dir, "Write one plan per (source, signature) here");
  ablate_cmd->add_flag("--render", ablate_args.render, "Also write recolored images to --out-dir");
  ablate_cmd->add_option("--k", ablate_args.k, "Number of target images")->capture_default_str()->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--omega-mult", ablate_args.omega_multiplier, "Candidate threshold multiplier")
      ->capture_default_str()->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--strength", ablate_args.strength, "Transfer strength for --render")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  ablate_cmd->add_option("--passes", ablate_args.passes, "Progressive passes for --render")
      ->capture_default_str()->check(CLI::NonNegativeNumber);

  CommonOptions stats_args;
  auto* stats_cmd = app.add_subcommand("stats", "Print record count, signature, binning and digest");
  add_common(*stats_cmd, stats_args);

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  add_common(*serve_cmd, serve_args.common);
  serve_cmd->add_option("--host", serve_args.host)->capture_default_str();
  serve_cmd->add_option("--port", serve_args.port)->capture_default_str();
  serve_cmd->add_option("--cors-origin", serve_args.cors_origin, "Allowed browser origin for the UI");
  serve_cmd->add_option("--max-payload", serve_args.max_payload, "Request size cap in bytes")->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest_args, out);
    if (*transform_cmd) return cmd_transform(transform_args, out);
    if (*ablate_cmd) return cmd_ablate(ablate_args, out);
    if (*stats_cmd) return cmd_stats(stats_args, out);
    if (*serve_cmd) return cmd_serve(serve_args, out);
  } catch (const Failure& f) {
    err << "error: " << f.message << "\n";
    return f.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_validation(e.kind()) ? kExitValidation : kExitPipeline;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOutput;
  }
  return kExitUsage;
}

}  // namespace affect::cli
