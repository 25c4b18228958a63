#include "evop/http_gateway.hpp"

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace evop {

using nlohmann::json;

std::string model_request_to_json(const ModelRequest& request) {
  json obj;
  obj["model_id"] = request.model_id;
  obj["request_id"] = request.request_id;
  obj["parameters"] = request.parameters;
  return obj.dump();
}

ModelRequest model_request_from_json(const std::string& body) {
  json obj;
  try {
    obj = json::parse(body);
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedRequest, std::string("bad request body: ") + e.what());
  }
  ModelRequest request;
  try {
    if (obj.contains("model_id")) {
      request.model_id = obj["model_id"].get<std::string>();
    }
    request.request_id = obj.at("request_id").get<std::string>();
    if (obj.contains("parameters")) {
      request.parameters =
          obj["parameters"].get<std::map<std::string, double>>();
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedRequest, std::string("bad request body: ") + e.what());
  }
  return request;
}

std::string model_result_to_json(const ModelResult& result) {
  json obj;
  obj["request_id"] = result.request_id;
  obj["model_id"] = result.model_id;
  obj["outputs"] = result.outputs;
  obj["served_by"] = result.served_by;
  obj["compute_units"] = result.compute_units;
  return obj.dump();
}

ModelResult model_result_from_json(const std::string& body) {
  json obj = json::parse(body);
  ModelResult result;
  result.request_id = obj.at("request_id").get<std::string>();
  result.model_id = obj.at("model_id").get<std::string>();
  result.outputs = obj.at("outputs").get<std::map<std::string, double>>();
  result.served_by = obj.at("served_by").get<std::string>();
  result.compute_units = obj.at("compute_units").get<std::uint64_t>();
  return result;
}

struct HttpModelService::Impl {
  const ModelGateway& gateway;
  httplib::Server server;
  std::thread worker;

  explicit Impl(const ModelGateway& gw) : gateway(gw) {
    server.Post(R"(/models/([^/]+)/runs)", [this](const httplib::Request& req,
                                                  httplib::Response& res) {
      ModelRequest request;
      try {
        request = model_request_from_json(req.body);
        request.model_id = req.matches[1];
        auto result = gateway.run_model(request);
        res.status = 200;
        res.set_content(model_result_to_json(result), "application/json");
      } catch (const Error& e) {
        json err;
        err["code"] = std::string(to_string(e.code()));
        err["detail"] = e.what();
        res.status = e.code() == ErrorCode::ModelNotServed ? 404 : 400;
        res.set_content(err.dump(), "application/json");
      }
    });

    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      auto health = gateway.health();
      json obj;
      obj["state"] = std::string(to_string(health.state));
      obj["session_count"] = health.session_count;
      obj["image_id"] = health.image_id;
      obj["version"] = health.image_version;
      res.status = 200;
      res.set_content(obj.dump(), "application/json");
    });
  }
};

HttpModelService::HttpModelService(const ModelGateway& gateway)
    : impl_(std::make_unique<Impl>(gateway)) {}

HttpModelService::~HttpModelService() { stop(); }

int HttpModelService::start(const std::string& host) {
  int port = impl_->server.bind_to_any_port(host);
  if (port <= 0) {
    raise(ErrorCode::ValidationError, "cannot bind gateway port on " + host);
  }
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpModelService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) {
    impl_->worker.join();
  }
}

}  // namespace evop
