#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "affect/datastore.hpp"
#include "affect/features.hpp"
#include "affect/pipeline.hpp"

namespace httplib { class Server; }

namespace affect {

struct ServiceConfig {
  std::size_t max_payload_bytes = 16u << 20;
  std::string cors_origin;  // empty disables CORS headers
  PipelineParams defaults;
};

/// HTTP facade over the pipeline.
///
///   GET  /healthz              {"status": "ok", "database_loaded": bool}
///   GET  /v1/database/stats    {"count", "feature_signature", "binning", "digest"}
///   POST /v1/preview           {"plan": ..., "thumbnails": {id: url}}
///   POST /v1/transform         {"plan": ..., "image": base64 PNG, "timings_ms": {...}}
///   GET  /thumbnails/<file>    static thumbnails written at ingest
///
/// Request body for the POST routes:
///   {"image": base64 PNG/JPEG, "emotion": [7 numbers] | {"joy": 1, ...},
///    "k": int?, "strength": number?, "passes": int?, "omega_multiplier": number?, "source_id": string?}
///
/// Errors: 400 invalid request, 413 payload over the cap, 503 no database.
class Service {
 public:
  Service(ServiceConfig config, std::shared_ptr<const Database> db, std::shared_ptr<const BackendRegistry> registry);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds to `port` (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void listen();
  void stop();

  httplib::Server& server() { return *server_; }

 private:
  void install_routes();

  ServiceConfig config_;
  std::shared_ptr<const Database> db_;
  std::shared_ptr<const BackendRegistry> registry_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace affect
