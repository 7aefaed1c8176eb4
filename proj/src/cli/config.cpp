#include <cstdio>
#include <fstream>
#include <set>

#include "gsedit/cli.hpp"
#include "gsedit/errors.hpp"

namespace gsedit::cli {

using nlohmann::json;

namespace {

// Reads the members of one JSON object and remembers which keys were used so
// leftovers can be reported.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(label("") + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& into) {
    used_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end() || it->is_null()) return;
    try {
      into = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(label(key) + " has the wrong type");
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& into) {
    used_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end() || it->is_null()) return;
    T v{};
    get(key, v);
    into = v;
  }

  std::optional<Section> child(const char* key) {
    used_.insert(key);
    const auto it = doc_.find(key);
    if (it == doc_.end() || it->is_null()) return std::nullopt;
    return Section(*it, label(key));
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items())
      if (!used_.count(key)) throw ConfigError("unknown config key '" + label(key) + "'");
  }

 private:
  std::string label(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  const json& doc_;
  std::string path_;
  std::set<std::string> used_;
};

void read_groups(Section s, GroupScalars& g) {
  s.get("position", g.position);
  s.get("log_scale", g.log_scale);
  s.get("rotation", g.rotation);
  s.get("opacity", g.opacity);
  s.get("color", g.color);
  s.finish();
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

void require_path(const std::string& key, const std::string& value, bool mandatory) {
  if (value.empty()) {
    if (mandatory) throw ConfigError("config key '" + key + "' is required");
    return;
  }
  if (!fs::exists(value)) throw ConfigError(key + " does not exist: " + value);
}

std::string fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

Endpoint RunConfig::endpoint() const {
  if (!wire_provider()) throw ConfigError("provider '" + provider + "' is not a wire provider");
  return Endpoint::parse(provider.substr(5));
}

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
  RunConfig c;
  EditConfig& e = c.edit;
  Section top(doc, "");

  top.get("scene", c.scene);
  top.get("cameras", c.cameras);
  top.get("images_dir", c.images_dir);
  top.get("attention_dir", c.attention_dir);
  top.get("masks_dir", c.masks_dir);
  top.get("targets_dir", c.targets_dir);
  top.get("static_masks_dir", c.static_masks_dir);
  top.get("output_dir", c.output_dir);
  top.get("provider", c.provider);
  top.get("oracle_strength", c.oracle_strength);
  top.get("provider_timeout_ms", c.provider_timeout_ms);
  top.get("train_views", c.train_views);
  top.get("views", c.views);
  top.get("checkpoint_interval", c.checkpoint_interval);
  top.get("log_interval", c.log_interval);

  top.get("keyword", e.keyword);
  top.get("prompt", e.prompt);
  std::optional<std::string> mode;
  top.get("mode_override", mode);
  if (mode) e.localize.mode_override = parse_mode(*mode);
  top.get("seed", e.seed);
  top.get("iterations", e.iterations);
  top.get("static_mask_iterations", e.static_mask_iterations);
  top.get("relocalize_interval", e.relocalize_interval);
  top.get("anchor_interval", e.anchor_interval);
  top.get("lambda_growth", e.lambda_growth);
  top.get("relocalize_labels", e.relocalize_labels);

  if (auto s = top.child("learning_rates")) {
    s->get("position", e.learning_rates.position);
    s->get("log_scale", e.learning_rates.log_scale);
    s->get("rotation", e.learning_rates.rotation);
    s->get("opacity", e.learning_rates.opacity);
    s->get("color", e.learning_rates.color);
    s->finish();
  }
  if (auto s = top.child("densify")) {
    s->get("interval", e.densify.interval);
    s->get("grad_threshold", e.densify.grad_threshold);
    s->get("split_scale_fraction", e.densify.split_scale_fraction);
    s->get("prune_opacity", e.densify.prune_opacity);
    s->get("split_factor", e.densify.split_factor);
    s->finish();
  }
  if (auto s = top.child("weights")) {
    s->get("lambda_sds", e.weights.lambda_sds);
    s->get("lambda_l1", e.weights.lambda_l1);
    s->get("lambda_ssim", e.weights.lambda_ssim);
    if (auto a = s->child("lambda_anchor")) read_groups(*a, e.weights.lambda_anchor);
    s->finish();
  }
  if (auto s = top.child("schedule")) {
    s->get("t_min", e.schedule.t_min);
    s->get("t_max", e.schedule.t_max);
    s->finish();
  }
  if (auto s = top.child("localize")) {
    s->get("attn_threshold", e.localize.attn_threshold);
    s->get("dbscan_eps", e.localize.dbscan_eps);
    s->get("dbscan_min_pts", e.localize.dbscan_min_pts);
    s->get("weight_threshold", e.localize.weight_threshold);
    s->get("iou_floor", e.localize.iou_floor);
    s->finish();
  }
  top.finish();

  // Iteration counts given without a static stage length keep the whole run static.
  if (doc.contains("iterations") && !doc.contains("static_mask_iterations"))
    e.static_mask_iterations = e.iterations;
  e.validate();
  const LocalizeOptions& lo = e.localize;
  if (!(lo.attn_threshold >= 0.0f && lo.attn_threshold <= 1.0f) || !(lo.dbscan_eps > 0.0) || lo.dbscan_min_pts < 1 ||
      !(lo.weight_threshold >= 0.0) || !(lo.iou_floor >= 0.0))
    throw ConfigError("invalid localization options");
  if (c.oracle_strength && !(*c.oracle_strength > 0.0)) throw ConfigError("oracle_strength must be > 0");
  if (c.provider_timeout_ms <= 0) throw ConfigError("provider_timeout_ms must be > 0");
  if (c.checkpoint_interval < 0 || c.log_interval < 0) throw ConfigError("intervals must be >= 0");
  if (c.provider != "oracle" && !c.wire_provider())
    throw ConfigError("provider must be 'oracle' or 'wire:host:port', got '" + c.provider + "'");
  if (c.wire_provider()) c.endpoint();

  for (std::string* p : {&c.scene, &c.cameras, &c.images_dir, &c.attention_dir, &c.masks_dir, &c.targets_dir,
                         &c.static_masks_dir, &c.output_dir})
    *p = resolve(base_dir, *p);
  require_path("scene", c.scene, true);
  require_path("cameras", c.cameras, true);
  require_path("images_dir", c.images_dir, false);
  require_path("attention_dir", c.attention_dir, false);
  require_path("masks_dir", c.masks_dir, false);
  require_path("targets_dir", c.targets_dir, false);
  require_path("static_masks_dir", c.static_masks_dir, false);

  c.hash = fnv1a(doc.dump());
  return c;
}

RunConfig load_run_config(const std::string& path, const json& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
  doc.merge_patch(overrides);
  return parse_run_config(doc, fs::absolute(path).parent_path());
}

fs::path run_directory(const RunConfig& config, const std::string& out) {
  if (!out.empty()) return fs::path(out);
  return fs::path(config.output_dir) / config.hash;
}

}  // namespace gsedit::cli
