#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "evop/common.hpp"
#include "evop/model_library.hpp"
#include "evop/provider.hpp"

namespace evop {

/// A complete computation request: every input rides in the request, so any
/// instance of the serving image can answer it.
struct ModelRequest {
  std::string model_id;
  std::map<std::string, double> parameters;
  std::string request_id;  // idempotent retry handle
};

struct ModelResult {
  std::string request_id;
  std::string model_id;
  std::map<std::string, double> outputs;
  std::string served_by;
  std::uint64_t compute_units = 0;
};

/// Closed-form stand-in for a calibrated model: y = (product of parameter
/// values) + 1, a pure function of (model_id, parameters).
ModelResult evaluate_model_stub(const ModelRequest& request,
                                std::uint64_t compute_units_per_run = 1);

struct GatewayHealth {
  InstanceState state = InstanceState::Pending;
  std::uint64_t session_count = 0;
  std::string image_id;
  std::uint64_t image_version = 1;
};

/// The model service one instance runs: a uniform request interface over the
/// image's model set, with no server-side session state.
class ModelGateway {
 public:
  ModelGateway(std::string instance_id, ImageDescriptor image)
      : instance_id_(std::move(instance_id)), image_(std::move(image)) {}

  ModelResult run_model(const ModelRequest& request) const;
  GatewayHealth health() const;

  const ImageDescriptor& image() const noexcept { return image_; }
  const std::string& instance_id() const noexcept { return instance_id_; }

  void set_state(InstanceState state) noexcept { state_ = state; }
  void set_session_count(std::uint64_t n) noexcept { session_count_ = n; }

 private:
  std::string instance_id_;
  ImageDescriptor image_;
  InstanceState state_ = InstanceState::Pending;
  std::uint64_t session_count_ = 0;
};

}  // namespace evop
