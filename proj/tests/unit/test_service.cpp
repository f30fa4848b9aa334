#include <doctest.h>

#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "affect/service.hpp"
#include "affect/util.hpp"
#include "cli/commands.hpp"
#include "fixtures.hpp"

using namespace affect;
using affect::testing::TempDir;
using nlohmann::json;

namespace {

// Service on an ephemeral port, stopped on scope exit.
class Running {
 public:
  Running(ServiceConfig config, std::shared_ptr<const Database> db)
      : service_(std::move(config), std::move(db),
                 std::make_shared<const BackendRegistry>(BackendRegistry::with_defaults())) {
    port_ = service_.bind("127.0.0.1", 0);
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { service_.listen(); });
    service_.server().wait_until_ready();
  }
  ~Running() {
    service_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

 private:
  Service service_;
  int port_ = 0;
  std::thread thread_;
};

struct DbFixture {
  TempDir tmp;
  std::shared_ptr<const Database> db;
  std::string manifest;
  DbFixture() {
    affect::testing::write_fixture_database(tmp.path(), 12);
    manifest = affect::testing::fixture_manifest(tmp.path()).string();
    const auto reg = BackendRegistry::with_defaults();
    DatastoreConfig cfg;
    cfg.signature = reg.resolve("fallback/grid4");
    ingest(manifest, {}, cfg, reg);
    db = load_database(manifest, cfg);
  }
};

std::string upload(const RgbImage& img) { return base64_encode(encode_png(img)); }

json request_body(int k = -1) {
  json body = {{"image", upload(affect::testing::color_ramp(40, 30, 8))},
               {"emotion", {{"joy", 0.6}, {"surprise", 0.4}}}};
  if (k > 0) body["k"] = k;
  return body;
}

json post(httplib::Client& c, const char* path, const json& body, int expected_status) {
  const auto res = c.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == expected_status);
  return json::parse(res->body);
}

}  // namespace

TEST_CASE("health and stats") {
  DbFixture fx;
  Running srv(ServiceConfig{}, fx.db);
  auto c = srv.client();
  const auto health = c.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["database_loaded"] == true);

  const auto stats = c.Get("/v1/database/stats");
  REQUIRE(stats);
  CHECK(stats->status == 200);
  const auto body = json::parse(stats->body);
  CHECK(body["count"] == 12);
  CHECK(body["feature_signature"] == "fallback/grid4:112");
  CHECK(body["binning"] == "lab256");

  std::ostringstream out, err;
  REQUIRE(affect::cli::run({"affect", "stats", "--db", fx.manifest}, out, err) == 0);
  CHECK(out.str().find(body["digest"].get<std::string>()) != std::string::npos);
}

TEST_CASE("preview and transform") {
  DbFixture fx;
  Running srv(ServiceConfig{}, fx.db);
  auto c = srv.client();

  const auto preview = post(c, "/v1/preview", request_body(), 200);
  const auto& plan = preview["plan"];
  CHECK(plan["k_returned"] == std::min<std::size_t>(10, plan["candidates"]["count"].get<std::size_t>()));
  CHECK(plan["targets"].size() == plan["k_returned"].get<std::size_t>());
  for (const auto& t : plan["targets"]) {
    const std::string url = preview["thumbnails"][t["id"].get<std::string>()];
    const auto thumb = c.Get(url);
    REQUIRE(thumb);
    CHECK(thumb->status == 200);
    const auto img = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(thumb->body.data()), thumb->body.size()));
    CHECK(img.width > 0);
  }

  const auto again = post(c, "/v1/preview", request_body(), 200);
  CHECK(canonical_dump(again["plan"]) == canonical_dump(plan));

  const auto full = post(c, "/v1/transform", request_body(), 200);
  CHECK(canonical_dump(full["plan"]) == canonical_dump(plan));
  const auto bytes = base64_decode(full["image"].get<std::string>());
  const auto out = decode_image(bytes);
  CHECK(out.width == 40);
  CHECK(out.height == 30);
  CHECK(full["width"] == 40);
  CHECK(full["timings_ms"].contains("transfer"));

  const auto small = post(c, "/v1/preview", request_body(3), 200);
  CHECK(small["plan"]["targets"].size() == 3);
  CHECK(small["plan"]["k_requested"] == 3);

  // an emotion given as a 7-array in channel order
  auto arr = request_body();
  arr["emotion"] = json::array({0, 0, 0, 0.6, 0, 0.4, 0});
  CHECK(canonical_dump(post(c, "/v1/preview", arr, 200)["plan"]) == canonical_dump(plan));
}

TEST_CASE("request validation") {
  DbFixture fx;
  Running srv(ServiceConfig{}, fx.db);
  auto c = srv.client();

  auto zero = request_body();
  zero["emotion"] = json::array({0, 0, 0, 0, 0, 0, 0});
  const auto e1 = post(c, "/v1/preview", zero, 400);
  CHECK(e1["field"] == "emotion");
  CHECK(e1["kind"] == "DistributionSumOutOfRange");

  auto negative = request_body();
  negative["emotion"] = {{"joy", 1.2}, {"fear", -0.2}};
  CHECK(post(c, "/v1/preview", negative, 400)["kind"] == "DistributionNegative");

  auto unknown = request_body();
  unknown["emotion"] = {{"happiness", 1}};
  CHECK(post(c, "/v1/preview", unknown, 400)["field"] == "emotion.happiness");

  auto bad_image = request_body();
  bad_image["image"] = "!!!";
  CHECK(post(c, "/v1/transform", bad_image, 400)["field"] == "image");

  auto not_png = request_body();
  not_png["image"] = base64_encode(std::vector<std::uint8_t>{1, 2, 3, 4});
  CHECK(post(c, "/v1/transform", not_png, 400)["field"] == "image");

  auto bad_k = request_body();
  bad_k["k"] = 0;
  CHECK(post(c, "/v1/preview", bad_k, 400)["field"] == "k");
  auto bad_strength = request_body();
  bad_strength["strength"] = 1.5;
  CHECK(post(c, "/v1/preview", bad_strength, 400)["field"] == "strength");

  const auto res = c.Post("/v1/preview", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
}

TEST_CASE("payload cap and CORS") {
  DbFixture fx;
  ServiceConfig cfg;
  cfg.max_payload_bytes = 4096;
  cfg.cors_origin = "http://localhost:5173";
  Running srv(cfg, fx.db);
  auto c = srv.client();

  json big = request_body();
  big["image"] = upload(affect::testing::noise_image(200, 200, 1));
  const auto res = c.Post("/v1/transform", big.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 413);

  const auto health = c.Get("/healthz");
  REQUIRE(health);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  const auto pre = c.Options("/v1/preview");
  REQUIRE(pre);
  CHECK(pre->status == 204);
}

TEST_CASE("no database loaded") {
  Running srv(ServiceConfig{}, nullptr);
  auto c = srv.client();
  const auto health = c.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["database_loaded"] == false);
  const auto stats = c.Get("/v1/database/stats");
  REQUIRE(stats);
  CHECK(stats->status == 503);
  CHECK(post(c, "/v1/preview", request_body(), 503)["kind"] == "EmptyDatabase");
  CHECK(post(c, "/v1/transform", request_body(), 503)["kind"] == "EmptyDatabase");
}
