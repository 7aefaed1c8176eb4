#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsedit/localizer.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit::cli {

namespace fs = std::filesystem;

/// Parsed run configuration. Relative paths are resolved against the config
/// file's directory.
struct RunConfig {
  std::string scene;
  std::string cameras;
  std::string images_dir;        // originals as {view}.pfm; rendered from the scene when empty
  std::string attention_dir;     // {view}_{keyword}.pfm
  std::string masks_dir;         // oracle segmenter masks, {view}_{keyword}.pfm
  std::string targets_dir;       // oracle guidance targets, {view}.pfm
  std::string static_masks_dir;  // edit/eval masks; defaults to {run}/masks
  std::string output_dir = "runs";

  std::string provider = "oracle";  // "oracle" or "wire:host:port"
  std::optional<double> oracle_strength;  // default 1 / (width * height * 3)
  int provider_timeout_ms = 30000;

  std::vector<int> train_views;  // empty: every camera
  std::vector<int> views;        // render / eval subset; empty: every camera
  int checkpoint_interval = 0;
  int log_interval = 100;

  EditConfig edit;  // also carries keyword, prompt and the localization options

  /// Hex digest of the canonical document (after flag overrides).
  std::string hash;

  bool wire_provider() const { return provider.rfind("wire:", 0) == 0; }
  Endpoint endpoint() const;
};

/// Throws ConfigError on unknown keys, wrong types, bad values or missing paths.
RunConfig parse_run_config(const nlohmann::json& doc, const fs::path& base_dir);

/// Reads the file, merges overrides (flags win) and parses.
RunConfig load_run_config(const std::string& path, const nlohmann::json& overrides = nlohmann::json::object());

/// {output_dir}/{hash} unless an explicit directory is given.
fs::path run_directory(const RunConfig& config, const std::string& out);

/// Writes {run}/render/{view}.pfm and .png for every requested view (all
/// cameras when empty). Throws ConfigError on an unknown view id.
std::vector<fs::path> cmd_render(const RunConfig& config, const fs::path& run_dir, std::vector<int> view_ids);

/// Writes {run}/scene_labeled.ply, {run}/masks/{view}_{keyword}.pfm and
/// {run}/localize_summary.json.
LocalizationResult cmd_localize(const RunConfig& config, const fs::path& run_dir);

/// Writes {run}/scene_edited.ply, losses.csv, before/ and after/ renders,
/// checkpoints/ and edit_summary.json.
EditResult cmd_edit(const RunConfig& config, const fs::path& run_dir, bool auto_localize);

/// Region-split metrics between two render directories. Writes {run}/eval.json.
nlohmann::json cmd_eval(const RunConfig& config, const fs::path& run_dir, const fs::path& before_dir,
                        const fs::path& after_dir);

/// Entry point of the gsplat-edit executable; returns the process exit code.
int run(int argc, char** argv);

}  // namespace gsedit::cli
