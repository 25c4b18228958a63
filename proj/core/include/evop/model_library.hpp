#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "evop/common.hpp"

namespace evop {

enum class ModelClass { Streamlined, Experimental };

std::string_view to_string(ModelClass mc);
ModelClass model_class_from_string(std::string_view text);

struct ResourceProfile {
  std::uint64_t cpu_cores = 1;
  std::uint64_t mem_mb = 1024;
  std::uint64_t ephemeral_data_mb = 0;
};

/// A calibrated model+data execution bundle. Instances launched from an
/// image serve its model set; the bundled data rides along as ephemeral
/// storage, so there is no shared data tier to scale.
struct ImageDescriptor {
  std::string image_id;
  std::set<std::string> model_ids;
  std::uint64_t version = 1;
  std::uint64_t max_sessions = 4;
  ResourceProfile resource_profile;
  ModelClass model_class = ModelClass::Experimental;

  void validate() const;
};

/// Registry of launchable images. Re-registering an image id bumps its
/// version; each model id maps to exactly one current image.
class ModelLibrary {
 public:
  std::pair<std::string, std::uint64_t> register_image(ImageDescriptor desc);

  /// Current-version descriptor for the image serving `model_id`.
  const ImageDescriptor& resolve(const std::string& model_id) const;

  const ImageDescriptor& image(const std::string& image_id) const;
  bool has_image(const std::string& image_id) const;

  /// Current-version descriptors, ordered by image_id.
  std::vector<ImageDescriptor> list_images() const;

  bool empty() const noexcept { return images_.empty(); }

  /// Atomically rewrites the registry file (write temp, then rename).
  void save(const std::string& path) const;
  static ModelLibrary load(const std::string& path);

  static ImageDescriptor parse_image_line(const std::string& line);
  static std::string format_image_line(const ImageDescriptor& desc);

  static constexpr std::string_view kFileHeader = "evop-model-library v1";

 private:
  std::map<std::string, ImageDescriptor> images_;  // image_id -> current
  std::map<std::string, std::string> model_to_image_;
};

}  // namespace evop
