#include <doctest.h>

#include <httplib.h>

#include "evop/http_gateway.hpp"

using namespace evop;

namespace {

ImageDescriptor stub_image() {
  ImageDescriptor image;
  image.image_id = "img";
  image.model_ids = {"topmodel-stub"};
  image.max_sessions = 4;
  image.version = 3;
  return image;
}

}  // namespace

TEST_CASE("the deployed gateway serves runs and health over HTTP") {
  ModelGateway gateway("i-0001", stub_image());
  gateway.set_state(InstanceState::Running);
  gateway.set_session_count(2);

  HttpModelService service(gateway);
  int port = service.start();
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  SUBCASE("POST /models/{model_id}/runs computes from the body alone") {
    ModelRequest request;
    request.request_id = "r-1";
    request.parameters = {{"a", 2}, {"b", 3}};
    auto res = client.Post("/models/topmodel-stub/runs",
                           model_request_to_json(request), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    auto result = model_result_from_json(res->body);
    CHECK(result.outputs.at("y") == doctest::Approx(7.0));
    CHECK(result.served_by == "i-0001");
    CHECK(result.model_id == "topmodel-stub");
  }

  SUBCASE("a model the image does not serve is 404") {
    auto res = client.Post("/models/unknown-model/runs",
                           R"({"request_id":"r-2","parameters":{}})",
                           "application/json");
    REQUIRE(res);
    CHECK(res->status == 404);
  }

  SUBCASE("a body without request_id is 400") {
    auto res = client.Post("/models/topmodel-stub/runs", R"({"parameters":{}})",
                           "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
  }

  SUBCASE("GET /health reports the instance self-view") {
    auto res = client.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body.find("\"session_count\":2") != std::string::npos);
    CHECK(res->body.find("\"image_id\":\"img\"") != std::string::npos);
    CHECK(res->body.find("\"version\":3") != std::string::npos);
  }

  service.stop();
}
