#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "evop/gateway.hpp"

using namespace evop;

namespace {

ImageDescriptor stub_image() {
  ImageDescriptor image;
  image.image_id = "img";
  image.model_ids = {"topmodel-stub"};
  image.max_sessions = 4;
  return image;
}

ModelRequest request(const std::string& id,
                     std::map<std::string, double> params) {
  ModelRequest r;
  r.model_id = "topmodel-stub";
  r.request_id = id;
  r.parameters = std::move(params);
  return r;
}

}  // namespace

TEST_CASE("the stub computes y = product of parameters + 1") {
  ModelGateway gw("i-0001", stub_image());
  auto result = gw.run_model(request("r1", {{"a", 2}, {"b", 3}}));
  CHECK(result.outputs.at("y") == doctest::Approx(7.0));
  CHECK(result.served_by == "i-0001");
  CHECK(result.request_id == "r1");
}

TEST_CASE("identical requests to different instances differ only in served_by") {
  ModelGateway g1("i-0001", stub_image());
  ModelGateway g2("i-0002", stub_image());
  auto r = request("r7", {{"a", 4}, {"b", 0.5}});
  auto out1 = g1.run_model(r);
  auto out2 = g2.run_model(r);
  CHECK(out1.outputs == out2.outputs);
  CHECK(out1.request_id == out2.request_id);
  CHECK(out1.served_by != out2.served_by);
}

TEST_CASE("requests for models the image does not serve are refused") {
  ModelGateway gw("i-0001", stub_image());
  auto r = request("r1", {{"a", 1}});
  r.model_id = "other-model";
  try {
    gw.run_model(r);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ModelNotServed);
  }
}

TEST_CASE("requests lacking ids are malformed") {
  ModelGateway gw("i-0001", stub_image());
  auto r = request("", {{"a", 1}});
  try {
    gw.run_model(r);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedRequest);
  }
}

TEST_CASE("health reports state, session count and image version") {
  ModelGateway gw("i-0001", stub_image());
  auto h0 = gw.health();
  CHECK(h0.session_count == 0);
  CHECK(h0.image_id == "img");
  gw.set_session_count(2);
  gw.set_state(InstanceState::Draining);
  auto h1 = gw.health();
  CHECK(h1.session_count == 2);
  CHECK(h1.state == InstanceState::Draining);
}

TEST_CASE("property: outputs across N instances equal a single-instance run") {
  std::mt19937_64 rng(42);
  std::vector<ModelGateway> fleet;
  for (int i = 0; i < 4; ++i) {
    fleet.emplace_back("i-000" + std::to_string(i + 1), stub_image());
  }
  ModelGateway solo("i-solo", stub_image());

  std::vector<ModelRequest> requests;
  for (int i = 0; i < 200; ++i) {
    requests.push_back(request(
        "r" + std::to_string(i),
        {{"a", static_cast<double>(rng() % 100)},
         {"b", static_cast<double>(rng() % 100) / 7.0}}));
  }

  std::vector<double> fanned, single;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    fanned.push_back(fleet[i % fleet.size()].run_model(requests[i]).outputs.at("y"));
    single.push_back(solo.run_model(requests[i]).outputs.at("y"));
  }
  std::sort(fanned.begin(), fanned.end());
  std::sort(single.begin(), single.end());
  CHECK(fanned == single);
}

TEST_CASE("idempotence: re-sending a request id returns an equal result") {
  ModelGateway gw("i-0001", stub_image());
  auto r = request("retry-1", {{"a", 3.5}, {"b", 2}});
  auto first = gw.run_model(r);
  auto again = gw.run_model(r);
  CHECK(first.outputs == again.outputs);
  CHECK(first.served_by == again.served_by);
  CHECK(first.compute_units == again.compute_units);
}
