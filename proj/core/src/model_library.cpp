#include "evop/model_library.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace evop {

std::string_view to_string(ModelClass mc) {
  return mc == ModelClass::Streamlined ? "streamlined" : "experimental";
}

ModelClass model_class_from_string(std::string_view text) {
  if (text == "streamlined") return ModelClass::Streamlined;
  if (text == "experimental") return ModelClass::Experimental;
  raise(ErrorCode::ParseError,
        "model class must be streamlined or experimental, got '" +
            std::string(text) + "'");
}

void ImageDescriptor::validate() const {
  if (image_id.empty()) {
    raise(ErrorCode::ValidationError, "image id must not be empty");
  }
  if (model_ids.empty()) {
    raise(ErrorCode::ValidationError,
          "image '" + image_id + "' must serve at least one model");
  }
  if (max_sessions == 0) {
    raise(ErrorCode::ValidationError,
          "image '" + image_id + "' max_sessions must be positive");
  }
  if (resource_profile.cpu_cores == 0 || resource_profile.mem_mb == 0) {
    raise(ErrorCode::ValidationError,
          "image '" + image_id + "' resource profile must be positive");
  }
}

std::pair<std::string, std::uint64_t> ModelLibrary::register_image(
    ImageDescriptor desc) {
  desc.validate();
  for (const auto& model_id : desc.model_ids) {
    auto it = model_to_image_.find(model_id);
    if (it != model_to_image_.end() && it->second != desc.image_id) {
      raise(ErrorCode::ModelConflict, "model '" + model_id +
                                          "' is already served by image '" +
                                          it->second + "'");
    }
  }
  auto existing = images_.find(desc.image_id);
  if (existing == images_.end()) {
    desc.version = 1;
  } else {
    // An update may change the model set; retire mappings it drops.
    desc.version = existing->second.version + 1;
    for (const auto& old_model : existing->second.model_ids) {
      if (!desc.model_ids.count(old_model)) {
        model_to_image_.erase(old_model);
      }
    }
  }
  for (const auto& model_id : desc.model_ids) {
    model_to_image_[model_id] = desc.image_id;
  }
  auto image_id = desc.image_id;
  auto version = desc.version;
  images_[image_id] = std::move(desc);
  return {image_id, version};
}

const ImageDescriptor& ModelLibrary::resolve(const std::string& model_id) const {
  auto it = model_to_image_.find(model_id);
  if (it == model_to_image_.end()) {
    raise(ErrorCode::UnknownModel, "no image serves model '" + model_id + "'");
  }
  return images_.at(it->second);
}

const ImageDescriptor& ModelLibrary::image(const std::string& image_id) const {
  auto it = images_.find(image_id);
  if (it == images_.end()) {
    raise(ErrorCode::UnknownImage, "no image '" + image_id + "'");
  }
  return it->second;
}

bool ModelLibrary::has_image(const std::string& image_id) const {
  return images_.count(image_id) > 0;
}

std::vector<ImageDescriptor> ModelLibrary::list_images() const {
  std::vector<ImageDescriptor> out;
  out.reserve(images_.size());
  for (const auto& [id, desc] : images_) {
    out.push_back(desc);
  }
  return out;
}

std::string ModelLibrary::format_image_line(const ImageDescriptor& desc) {
  std::ostringstream line;
  line << "image " << desc.image_id << " version=" << desc.version
       << " models=";
  bool first = true;
  for (const auto& model_id : desc.model_ids) {
    if (!first) line << ',';
    line << model_id;
    first = false;
  }
  line << " max-sessions=" << desc.max_sessions
       << " cpu-cores=" << desc.resource_profile.cpu_cores
       << " mem-mb=" << desc.resource_profile.mem_mb
       << " data-mb=" << desc.resource_profile.ephemeral_data_mb
       << " class=" << to_string(desc.model_class);
  return line.str();
}

ImageDescriptor ModelLibrary::parse_image_line(const std::string& line) {
  auto tokens = split(std::string(trim(line)), ' ');
  if (tokens.size() < 2 || tokens[0] != "image") {
    raise(ErrorCode::ParseError, "expected 'image <id> key=value...': " + line);
  }
  ImageDescriptor desc;
  desc.image_id = tokens[1];
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (tokens[i].empty()) continue;
    std::string key, value;
    if (!split_kv(tokens[i], key, value)) {
      raise(ErrorCode::ParseError, "bad image attribute '" + tokens[i] + "'");
    }
    if (key == "version") {
      desc.version = parse_u64(value, "image version");
    } else if (key == "models") {
      for (const auto& model_id : split(value, ',')) {
        if (!model_id.empty()) desc.model_ids.insert(model_id);
      }
    } else if (key == "max-sessions") {
      desc.max_sessions = parse_u64(value, "image max-sessions");
    } else if (key == "cpu-cores") {
      desc.resource_profile.cpu_cores = parse_u64(value, "image cpu-cores");
    } else if (key == "mem-mb") {
      desc.resource_profile.mem_mb = parse_u64(value, "image mem-mb");
    } else if (key == "data-mb") {
      desc.resource_profile.ephemeral_data_mb = parse_u64(value, "image data-mb");
    } else if (key == "class") {
      desc.model_class = model_class_from_string(value);
    } else {
      raise(ErrorCode::ParseError, "unknown image attribute '" + key + "'");
    }
  }
  return desc;
}

void ModelLibrary::save(const std::string& path) const {
  std::ostringstream body;
  body << kFileHeader << '\n';
  for (const auto& [id, desc] : images_) {
    body << format_image_line(desc) << '\n';
  }
  auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      raise(ErrorCode::ValidationError, "cannot write registry file " + tmp);
    }
    out << body.str();
  }
  std::filesystem::rename(tmp, path);
}

ModelLibrary ModelLibrary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::ParseError, "cannot read registry file " + path);
  }
  std::string header;
  std::getline(in, header);
  if (trim(header) != kFileHeader) {
    raise(ErrorCode::ParseError,
          "registry file " + path + " has bad header '" + header + "'");
  }
  ModelLibrary lib;
  std::string line;
  while (std::getline(in, line)) {
    auto trimmed = trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    auto desc = ModelLibrary::parse_image_line(std::string(trimmed));
    desc.validate();
    for (const auto& model_id : desc.model_ids) {
      auto it = lib.model_to_image_.find(model_id);
      if (it != lib.model_to_image_.end()) {
        raise(ErrorCode::ParseError, "registry file maps model '" + model_id +
                                         "' to two images");
      }
      lib.model_to_image_[model_id] = desc.image_id;
    }
    lib.images_[desc.image_id] = std::move(desc);
  }
  return lib;
}

}  // namespace evop
