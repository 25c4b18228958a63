#pragma once

#include <memory>
#include <string>

#include "evop/gateway.hpp"

namespace evop {

/// The deployed form of the model gateway: the same stateless contract over
/// HTTP. POST /models/{model_id}/runs executes a computation from the request
/// body alone; GET /health returns the instance self-report.
class HttpModelService {
 public:
  explicit HttpModelService(const ModelGateway& gateway);
  ~HttpModelService();

  HttpModelService(const HttpModelService&) = delete;
  HttpModelService& operator=(const HttpModelService&) = delete;

  /// Binds an ephemeral port on `host` and serves from a background thread.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string model_request_to_json(const ModelRequest& request);
ModelRequest model_request_from_json(const std::string& body);
std::string model_result_to_json(const ModelResult& result);
ModelResult model_result_from_json(const std::string& body);

}  // namespace evop
