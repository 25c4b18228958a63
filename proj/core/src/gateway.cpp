#include "evop/gateway.hpp"

namespace evop {

ModelResult evaluate_model_stub(const ModelRequest& request,
                                std::uint64_t compute_units_per_run) {
  ModelResult result;
  result.request_id = request.request_id;
  result.model_id = request.model_id;
  double y = 1.0;
  for (const auto& [name, value] : request.parameters) {
    y *= value;
  }
  result.outputs["y"] = y + 1.0;
  result.compute_units = compute_units_per_run;
  return result;
}

ModelResult ModelGateway::run_model(const ModelRequest& request) const {
  if (request.model_id.empty() || request.request_id.empty()) {
    raise(ErrorCode::MalformedRequest,
          "model_id and request_id are required");
  }
  if (!image_.model_ids.count(request.model_id)) {
    raise(ErrorCode::ModelNotServed, "image '" + image_.image_id +
                                         "' does not serve model '" +
                                         request.model_id + "'");
  }
  auto result = evaluate_model_stub(request);
  result.served_by = instance_id_;
  return result;
}

GatewayHealth ModelGateway::health() const {
  GatewayHealth report;
  report.state = state_;
  report.session_count = session_count_;
  report.image_id = image_.image_id;
  report.image_version = image_.version;
  return report;
}

}  // namespace evop
