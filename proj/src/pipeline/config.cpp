#include "retscreen/pipeline/config.hpp"

#include <fstream>
#include <set>

#include "retscreen/error.hpp"

namespace retscreen::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::kConfigInvalid, why); };
  if (working_resolution < 16 || working_resolution > 8192) fail("working_resolution must be in [16, 8192]");
  if (eyes.empty() || eyes.size() > 2) fail("eyes must list one or two of left/right");
  if (eyes.size() == 2 && eyes[0] == eyes[1]) fail("eyes must not repeat");
  if (quality.max_attempts < 1) fail("quality.max_attempts must be >= 1");
  if (!(quality.threshold >= 0.0 && quality.threshold <= 1.0)) fail("quality.threshold must be in [0,1]");
  if (!(diagnosis.default_threshold >= 0.0 && diagnosis.default_threshold <= 1.0)) {
    fail("diagnosis.default_threshold must be in [0,1]");
  }
  for (const auto& [label, t] : diagnosis.thresholds) {
    bool known = false;
    for (auto l : backends::kDiagnosisLabels) known = known || l == label;
    if (!known) fail("diagnosis.thresholds: unknown label '" + label + "'");
    if (!(t >= 0.0 && t <= 1.0)) fail("diagnosis.thresholds." + label + " must be in [0,1]");
  }
  if (!(lesions.binarize_cut >= 0.0 && lesions.binarize_cut <= 1.0)) fail("lesions.binarize must be in [0,1]");
  if (lesions.open_radius < 0) fail("lesions.open_radius must be >= 0");
  if (!(lesions.min_area_fraction >= 0.0 && lesions.min_area_fraction <= 1.0)) {
    fail("lesions.min_area_fraction must be in [0,1]");
  }
  if (!(lesions.fill_alpha >= 0.0 && lesions.fill_alpha <= 1.0)) fail("lesions.alpha must be in [0,1]");
  if (client.timeout.count() <= 0) fail("timeout_ms must be positive");
  for (const auto* d : {&backends.quality, &backends.pvi, &backends.edd, &backends.vlr}) d->validate();
  if (!backends.quality.supports(backends::Capability::kClassifyQuality)) fail("quality backend lacks classify-quality");
  if (!backends.pvi.supports(backends::Capability::kClassifyPvi)) fail("pvi backend lacks classify-pvi");
  if (!backends.edd.supports(backends::Capability::kClassifyEdd)) fail("edd backend lacks classify-edd");
  if (!backends.vlr.supports(backends::Capability::kSegment)) fail("vlr backend lacks segment");
}

namespace {

backends::BackendDescriptor descriptor_from_json(const json& j, const std::string& where) {
  backends::BackendDescriptor d;
  const auto kind = j.value("kind", std::string("reference"));
  if (kind == "reference") {
    d.kind = backends::BackendDescriptor::Kind::kReference;
  } else if (kind == "external") {
    d.kind = backends::BackendDescriptor::Kind::kExternal;
  } else {
    throw Error(Errc::kConfigInvalid, where + ".kind must be reference or external");
  }
  d.model_id = j.value("model_id", d.model_id);
  if (j.contains("endpoint")) d.endpoint = j["endpoint"].get<std::string>();
  if (j.contains("capabilities")) {
    d.capabilities.clear();
    for (const auto& c : j["capabilities"]) d.capabilities.insert(backends::parse_capability(c.get<std::string>()));
  }
  return d;
}

json descriptor_to_json(const backends::BackendDescriptor& d) {
  json j{{"kind", d.kind == backends::BackendDescriptor::Kind::kReference ? "reference" : "external"},
         {"model_id", d.model_id}};
  if (d.endpoint) j["endpoint"] = *d.endpoint;
  json caps = json::array();
  for (auto c : d.capabilities) caps.push_back(backends::capability_name(c));
  j["capabilities"] = caps;
  return j;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw Error(Errc::kConfigInvalid, "unknown key " + where + k);
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::kConfigInvalid, "config must be a JSON object");
  PipelineConfig cfg;
  try {
    reject_unknown(j,
                   {"working_resolution", "eyes", "quality", "operating_point", "diagnosis", "lesions", "backends",
                    "timeout_ms", "image_encoding", "referral_destination", "store"},
                   "");
    cfg.working_resolution = j.value("working_resolution", cfg.working_resolution);
    if (j.contains("eyes")) {
      cfg.eyes.clear();
      for (const auto& e : j["eyes"]) cfg.eyes.push_back(parse_eye(e.get<std::string>()));
    }
    if (j.contains("quality")) {
      const auto& q = j["quality"];
      reject_unknown(q, {"threshold", "max_attempts"}, "quality.");
      cfg.quality.threshold = q.value("threshold", cfg.quality.threshold);
      cfg.quality.max_attempts = q.value("max_attempts", cfg.quality.max_attempts);
    }
    if (j.contains("diagnosis")) {
      const auto& d = j["diagnosis"];
      reject_unknown(d, {"default_threshold", "thresholds"}, "diagnosis.");
      cfg.diagnosis.default_threshold = d.value("default_threshold", cfg.diagnosis.default_threshold);
      if (d.contains("thresholds")) cfg.diagnosis.thresholds = d["thresholds"].get<std::map<std::string, double>>();
    }
    if (j.contains("lesions")) {
      const auto& l = j["lesions"];
      reject_unknown(l, {"binarize", "open_radius", "min_area_fraction", "alpha"}, "lesions.");
      cfg.lesions.binarize_cut = l.value("binarize", cfg.lesions.binarize_cut);
      cfg.lesions.open_radius = l.value("open_radius", cfg.lesions.open_radius);
      cfg.lesions.min_area_fraction = l.value("min_area_fraction", cfg.lesions.min_area_fraction);
      cfg.lesions.fill_alpha = l.value("alpha", cfg.lesions.fill_alpha);
    }
    if (j.contains("backends")) {
      const auto& b = j["backends"];
      reject_unknown(b, {"quality", "pvi", "edd", "vlr"}, "backends.");
      if (b.contains("quality")) cfg.backends.quality = descriptor_from_json(b["quality"], "backends.quality");
      if (b.contains("pvi")) cfg.backends.pvi = descriptor_from_json(b["pvi"], "backends.pvi");
      if (b.contains("edd")) cfg.backends.edd = descriptor_from_json(b["edd"], "backends.edd");
      if (b.contains("vlr")) cfg.backends.vlr = descriptor_from_json(b["vlr"], "backends.vlr");
    }
    cfg.client.timeout = std::chrono::milliseconds(j.value("timeout_ms", 5000));
    const auto enc = j.value("image_encoding", std::string("f32le-b64"));
    if (enc == "f32le-b64") {
      cfg.client.encoding = backends::ClientOptions::Encoding::kRawF32;
    } else if (enc == "png-b64") {
      cfg.client.encoding = backends::ClientOptions::Encoding::kPng;
    } else {
      throw Error(Errc::kConfigInvalid, "image_encoding must be f32le-b64 or png-b64");
    }
    cfg.referral_destination = j.value("referral_destination", cfg.referral_destination);
    if (j.contains("store")) {
      fs::path p = j["store"].get<std::string>();
      cfg.store_root = p.is_absolute() ? p : base_dir / p;
    }
    if (!j.contains("operating_point")) throw Error(Errc::kConfigInvalid, "operating_point path is required");
    fs::path op = j["operating_point"].get<std::string>();
    cfg.operating_point_path = op.is_absolute() ? op : base_dir / op;
  } catch (const json::exception& e) {
    throw Error(Errc::kConfigInvalid, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::kConfigInvalid) throw;
    throw Error(Errc::kConfigInvalid, std::string("config: ") + e.what());
  }
  cfg.operating_point = stages::load_operating_point(cfg.operating_point_path);
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kConfigInvalid, "config file not found: " + path.string());
  const auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kConfigInvalid, "config file is not JSON: " + path.string());
  return config_from_json(j, path.parent_path());
}

json config_to_json(const PipelineConfig& cfg) {
  json eyes = json::array();
  for (auto e : cfg.eyes) eyes.push_back(eye_name(e));
  json j{{"working_resolution", cfg.working_resolution},
         {"eyes", eyes},
         {"quality", {{"threshold", cfg.quality.threshold}, {"max_attempts", cfg.quality.max_attempts}}},
         {"operating_point", cfg.operating_point_path.string()},
         {"diagnosis", {{"default_threshold", cfg.diagnosis.default_threshold}, {"thresholds", cfg.diagnosis.thresholds}}},
         {"lesions",
          {{"binarize", cfg.lesions.binarize_cut},
           {"open_radius", cfg.lesions.open_radius},
           {"min_area_fraction", cfg.lesions.min_area_fraction},
           {"alpha", cfg.lesions.fill_alpha}}},
         {"backends",
          {{"quality", descriptor_to_json(cfg.backends.quality)},
           {"pvi", descriptor_to_json(cfg.backends.pvi)},
           {"edd", descriptor_to_json(cfg.backends.edd)},
           {"vlr", descriptor_to_json(cfg.backends.vlr)}}},
         {"timeout_ms", cfg.client.timeout.count()},
         {"image_encoding", cfg.client.encoding == backends::ClientOptions::Encoding::kPng ? "png-b64" : "f32le-b64"},
         {"referral_destination", cfg.referral_destination}};
  if (cfg.store_root) j["store"] = cfg.store_root->string();
  return j;
}

}  // namespace retscreen::pipeline
