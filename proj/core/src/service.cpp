#include "affect/service.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "affect/error.hpp"
#include "affect/util.hpp"

namespace affect {

using nlohmann::json;

namespace {

struct HttpError {
  int status;
  std::string message;
  std::string field;
  std::string kind;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(canonical_dump(body, 9), "application/json");
}

void send_error(httplib::Response& res, const HttpError& e) {
  json body = {{"error", e.message}};
  if (!e.field.empty()) body["field"] = e.field;
  if (!e.kind.empty()) body["kind"] = e.kind;
  send_json(res, e.status, body);
}

EmotionDistribution parse_emotion(const json& value) {
  std::array<double, kEmotionCount> p{};
  if (value.is_array()) {
    if (value.size() != kEmotionCount) {
      throw HttpError{400, "emotion must list 7 values (anger, disgust, fear, joy, sadness, surprise, neutral)", "emotion", "InvalidArgument"};
    }
    for (std::size_t i = 0; i < kEmotionCount; ++i) {
      if (!value[i].is_number()) throw HttpError{400, "emotion values must be numbers", "emotion", "InvalidArgument"};
      p[i] = value[i].get<double>();
    }
  } else if (value.is_object()) {
    for (const auto& [name, v] : value.items()) {
      const auto e = emotion_from_name(name);
      if (!e) throw HttpError{400, "unknown emotion '" + name + "'", "emotion." + name, "InvalidArgument"};
      if (!v.is_number()) throw HttpError{400, "emotion values must be numbers", "emotion." + name, "InvalidArgument"};
      p[static_cast<std::size_t>(*e)] = v.get<double>();
    }
  } else {
    throw HttpError{400, "emotion must be an array of 7 numbers or an object of name: value", "emotion", "InvalidArgument"};
  }
  try {
    return EmotionDistribution(p);
  } catch (const Error& e) {
    throw HttpError{400, e.detail(), "emotion", std::string(to_string(e.kind()))};
  }
}

struct ParsedRequest {
  SourceImage source;
  EmotionDistribution target = EmotionDistribution::uniform();
  PipelineParams params;
};

ParsedRequest parse_request(const httplib::Request& req, const PipelineParams& defaults) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception&) {
    throw HttpError{400, "request body is not valid JSON", "", "ParseError"};
  }
  if (!body.is_object()) throw HttpError{400, "request body must be a JSON object", "", "ParseError"};

  ParsedRequest out;
  out.params = defaults;
  if (!body.contains("emotion")) throw HttpError{400, "missing field", "emotion", "InvalidArgument"};
  out.target = parse_emotion(body["emotion"]);

  if (!body.contains("image") || !body["image"].is_string()) {
    throw HttpError{400, "missing base64 image", "image", "InvalidArgument"};
  }
  try {
    const auto bytes = base64_decode(body["image"].get<std::string>());
    out.source.pixels = decode_image(bytes);
  } catch (const Error& e) {
    throw HttpError{400, e.detail(), "image", std::string(to_string(e.kind()))};
  }
  out.source.id = body.value("source_id", std::string("upload"));
  out.source.path = "";

  const auto read_int = [&](const char* name, auto& dst, long long min) {
    if (!body.contains(name)) return;
    const auto& v = body[name];
    if (!v.is_number_integer() || v.get<long long>() < min) {
      throw HttpError{400, std::string(name) + " must be an integer >= " + std::to_string(min), name, "InvalidArgument"};
    }
    dst = static_cast<std::remove_reference_t<decltype(dst)>>(v.get<long long>());
  };
  const auto read_number = [&](const char* name, double& dst) {
    if (!body.contains(name)) return;
    if (!body[name].is_number()) throw HttpError{400, std::string(name) + " must be a number", name, "InvalidArgument"};
    dst = body[name].get<double>();
  };
  read_int("k", out.params.k, 1);
  read_int("passes", out.params.transfer.smoothing_passes, 0);
  read_number("strength", out.params.transfer.strength);
  read_number("omega_multiplier", out.params.omega_multiplier);
  if (!(out.params.transfer.strength >= 0.0 && out.params.transfer.strength <= 1.0)) {
    throw HttpError{400, "strength must lie in [0, 1]", "strength", "InvalidArgument"};
  }
  if (!(out.params.omega_multiplier > 0.0)) {
    throw HttpError{400, "omega_multiplier must be > 0", "omega_multiplier", "InvalidArgument"};
  }
  return out;
}

HttpError from_pipeline_error(const Error& e) {
  int status = 500;
  switch (e.kind()) {
    case ErrorKind::EmptyDatabase: status = 503; break;
    case ErrorKind::InvalidArgument:
    case ErrorKind::DistributionNegative:
    case ErrorKind::DistributionSumOutOfRange:
    case ErrorKind::ImageDecodeError: status = 400; break;
    default: break;
  }
  std::string message = e.detail();
  if (!e.stage().empty()) message = "stage " + e.stage() + ": " + message;
  return {status, message, "", std::string(to_string(e.kind()))};
}

json thumbnails_for(const TransferPlan& plan) {
  json t = json::object();
  for (const auto& target : plan.targets) t[target.id] = "/thumbnails/" + thumbnail_name(target.id);
  return t;
}

}  // namespace

Service::Service(ServiceConfig config, std::shared_ptr<const Database> db,
                 std::shared_ptr<const BackendRegistry> registry)
    : config_(std::move(config)),
      db_(std::move(db)),
      registry_(std::move(registry)),
      server_(std::make_unique<httplib::Server>()) {
  if (!registry_) registry_ = std::make_shared<const BackendRegistry>(BackendRegistry::with_defaults());
  install_routes();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) throw Error(ErrorKind::IoError, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void Service::install_routes() {
  auto& srv = *server_;
  srv.set_payload_max_length(config_.max_payload_bytes);

  if (!config_.cors_origin.empty()) {
    srv.set_default_headers({{"Access-Control-Allow-Origin", config_.cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }

  if (db_ && std::filesystem::is_directory(db_->thumbnail_dir())) {
    srv.set_mount_point("/thumbnails", db_->thumbnail_dir().string());
  }

  const bool loaded = db_ && !db_->empty();

  srv.Get("/healthz", [loaded](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"database_loaded", loaded}});
  });

  srv.Get("/v1/database/stats", [this, loaded](const httplib::Request&, httplib::Response& res) {
    if (!loaded) return send_error(res, {503, "database not loaded", "", "EmptyDatabase"});
    send_json(res, 200, {{"count", db_->size()},
                         {"feature_signature", db_->signature().to_string()},
                         {"binning", db_->binning().key()},
                         {"digest", db_->digest()}});
  });

  const auto handle = [this, loaded](bool full) {
    return [this, loaded, full](const httplib::Request& req, httplib::Response& res) {
      if (!loaded) return send_error(res, {503, "database not loaded", "", "EmptyDatabase"});
      try {
        ParsedRequest parsed = parse_request(req, config_.defaults);
        if (!full) {
          const TransferPlan plan = preview_targets(parsed.source, parsed.target, *db_, *registry_, parsed.params);
          send_json(res, 200, {{"plan", plan.to_json()}, {"thumbnails", thumbnails_for(plan)}});
          return;
        }
        const TransformResult result = transform(parsed.source, parsed.target, *db_, *registry_, parsed.params);
        json timings = json::object();
        for (const auto& t : result.timings) timings[t.stage] = t.milliseconds;
        send_json(res, 200, {{"plan", result.plan.to_json()},
                             {"image", base64_encode(encode_png(result.output))},
                             {"width", result.output.width},
                             {"height", result.output.height},
                             {"timings_ms", std::move(timings)}});
      } catch (const HttpError& e) {
        send_error(res, e);
      } catch (const Error& e) {
        send_error(res, from_pipeline_error(e));
      }
    };
  };
  srv.Post("/v1/preview", handle(false));
  srv.Post("/v1/transform", handle(true));
}

}  // namespace affect
