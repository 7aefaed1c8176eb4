#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>

#include "gsedit/cli.hpp"
#include "gsedit/errors.hpp"
#include "gsedit/image_io.hpp"
#include "gsedit/parallel.hpp"

namespace gsedit::cli {

using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json psnr_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

fs::path image_path(const fs::path& dir, int view) { return dir / (std::to_string(view) + ".pfm"); }

void write_view(const ImageBuffer& img, const fs::path& dir, int view) {
  fs::create_directories(dir);
  write_pfm(img, image_path(dir, view).string());
  write_png(img, (dir / (std::to_string(view) + ".png")).string());
}

// Explicit view list checked against the cameras, or every camera.
std::vector<int> select_views(const std::vector<int>& requested, std::size_t cameras) {
  if (requested.empty()) {
    std::vector<int> all(cameras);
    for (std::size_t i = 0; i < cameras; ++i) all[i] = static_cast<int>(i);
    return all;
  }
  for (int v : requested)
    if (v < 0 || static_cast<std::size_t>(v) >= cameras)
      throw ConfigError("unknown view id " + std::to_string(v) + " (" + std::to_string(cameras) + " cameras)");
  return requested;
}

ImageBuffer read_view_image(const fs::path& path, const Camera& cam, int channels) {
  ImageBuffer img = read_pfm(path.string());
  if (img.width != cam.width || img.height != cam.height || img.channels != channels)
    throw DataError(path.string() + " does not match its camera (" + std::to_string(cam.width) + "x" +
                    std::to_string(cam.height) + ", " + std::to_string(channels) + " channels)");
  return img;
}

const std::string& require_keyword(const RunConfig& c) {
  if (c.edit.keyword.empty()) throw ConfigError("config key 'keyword' is required");
  return c.edit.keyword;
}

fs::path masks_directory(const RunConfig& c, const fs::path& run_dir) {
  return c.static_masks_dir.empty() ? run_dir / "masks" : fs::path(c.static_masks_dir);
}

std::unique_ptr<Segmenter> make_segmenter(const RunConfig& c) {
  if (c.wire_provider()) return std::make_unique<WireSegmenter>(c.endpoint(), c.provider_timeout_ms);
  if (!c.masks_dir.empty()) return std::make_unique<OracleSegmenter>(c.masks_dir);
  return nullptr;
}

json prompts_json(const std::vector<wire::PixelCoord>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

// Localizes `scene` in place and writes the labeled scene, masks and summary.
LocalizationResult localize_into(const RunConfig& c, GaussianScene& scene, const std::vector<Camera>& cams,
                                 const fs::path& run_dir) {
  const std::string started = utc_now();
  const std::string& keyword = require_keyword(c);
  if (c.attention_dir.empty()) throw ConfigError("config key 'attention_dir' is required to localize");

  std::vector<ViewInput> views;
  std::vector<int> missing;
  for (int v : select_views(c.views, cams.size())) {
    const fs::path p = view_keyword_path(c.attention_dir, v, keyword);
    if (!fs::exists(p)) {
      missing.push_back(v);
      continue;
    }
    ViewInput in;
    in.view_id = v;
    in.attention.view_id = v;
    in.attention.keyword = keyword;
    in.attention.grid = read_view_image(p, cams[v], 1);
    in.attention = normalize_attention(std::move(in.attention));
    const fs::path img = image_path(c.images_dir, v);
    in.image = !c.images_dir.empty() && fs::exists(img) ? read_view_image(img, cams[v], 3) : render(scene, cams[v]).image;
    views.push_back(std::move(in));
  }
  if (views.empty()) throw DataError("no attention maps for keyword '" + keyword + "' in " + c.attention_dir);

  // Without a segmentation provider the attention masks are used as they are.
  class NoSegmenter final : public Segmenter {
   public:
    MaskBuffer segment(const SegmentationQuery&) override { throw DataError("no segmentation provider"); }
  } none;
  std::unique_ptr<Segmenter> seg = make_segmenter(c);
  LocalizeOptions opt = c.edit.localize;
  if (!seg && !opt.mode_override) opt.mode_override = LocalizationMode::Addition;

  LocalizationResult r = localize(scene, cams, views, keyword, seg ? *seg : none, opt);

  fs::create_directories(run_dir / "masks");
  save_scene(scene, (run_dir / "scene_labeled.ply").string());
  json per_view = json::array();
  for (std::size_t s = 0; s < r.views.size(); ++s) {
    const ViewLocalization& v = r.views[s];
    const double iou = s < r.decision.iou.size() ? r.decision.iou[s] : NAN;
    json j = {{"view", v.view_id},
              {"ok", v.ok},
              {"iou", std::isfinite(iou) ? json(iou) : json(nullptr)},
              {"positives", prompts_json(v.prompts.positives)},
              {"negatives", prompts_json(v.prompts.negatives)},
              {"mask_pixels", v.mask.nonzero_count()}};
    if (!v.ok) j["error"] = v.error;
    per_view.push_back(j);
    if (v.ok) write_pfm(v.mask.grid, view_keyword_path((run_dir / "masks").string(), v.view_id, keyword));
  }
  json summary = {{"started_at", started},
                  {"keyword", keyword},
                  {"mode", to_string(r.decision.mode)},
                  {"refine", r.decision.refine},
                  {"mode_overridden", opt.mode_override.has_value()},
                  {"gaussian_count", scene.size()},
                  {"labeled_count", r.labeled_count},
                  {"missing_attention", missing},
                  {"views", per_view}};
  write_json(summary, run_dir / "localize_summary.json");
  return r;
}

void write_losses(const std::vector<LossRecord>& losses, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "iteration,view,timestep,sds,l1,dssim,anchor_position,anchor_log_scale,anchor_rotation,anchor_opacity,"
         "anchor_color,total\n";
  for (const auto& r : losses) {
    const LossReport& l = r.report;
    out << r.iteration << ',' << r.view << ',' << r.timestep << ',' << num(l.sds) << ',' << num(l.preservation_l1)
        << ',' << num(l.preservation_dssim) << ',' << num(l.anchor.position) << ',' << num(l.anchor.log_scale) << ','
        << num(l.anchor.rotation) << ',' << num(l.anchor.opacity) << ',' << num(l.anchor.color) << ','
        << num(l.total) << '\n';
  }
}

void write_checkpoint(const TrainState& st, const fs::path& dir) {
  fs::create_directories(dir);
  char stem[32];
  std::snprintf(stem, sizeof stem, "iter_%06d", st.iteration);
  save_scene(st.scene, (dir / (std::string(stem) + ".ply")).string());
  json anchors = json::array(), maps = json::array();
  for (std::size_t i = 0; i < st.anchors.size(); ++i) {
    const AnchorSnapshot& a = st.anchors[i];
    GaussianScene snap;
    for (const auto& p : a.params) {
      Gaussian g;
      g.params = p;
      g.aux.generation = a.generation;
      snap.gaussians.push_back(g);
    }
    const std::string name = std::string(stem) + "_anchor_" + std::to_string(i) + ".ply";
    save_scene(snap, (dir / name).string());
    anchors.push_back(name);
    maps.push_back(a.index_map);
  }
  json side = {{"iteration", st.iteration},
               {"rng_state", st.rng_state()},
               {"anchors", anchors},
               {"anchor_index_maps", maps}};
  write_json(side, dir / (std::string(stem) + ".json"));
}

std::vector<int> numbered_pfms(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<int> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".pfm") continue;
    const std::string stem = e.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), ::isdigit)) continue;
    ids.push_back(std::stoi(stem));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct RegionStats {
  double outside_se = 0.0;
  double outside_ssim = 0.0;
  std::size_t outside_n = 0;
  double inside_l1 = 0.0;
  std::size_t inside_n = 0;

  void add(const RegionStats& o) {
    outside_se += o.outside_se;
    outside_ssim += o.outside_ssim;
    outside_n += o.outside_n;
    inside_l1 += o.inside_l1;
    inside_n += o.inside_n;
  }
  json to_json(bool with_target) const {
    json j;
    if (outside_n == 0) {
      j["outside_psnr"] = nullptr;
      j["outside_ssim"] = nullptr;
    } else {
      const double mse = outside_se / static_cast<double>(outside_n);
      j["outside_psnr"] = psnr_json(mse == 0.0 ? INFINITY : 10.0 * std::log10(1.0 / mse));
      j["outside_ssim"] = outside_ssim / static_cast<double>(outside_n);
    }
    j["inside_l1_to_target"] =
        with_target && inside_n > 0 ? json(inside_l1 / static_cast<double>(inside_n)) : json(nullptr);
    return j;
  }
};

}  // namespace

std::vector<fs::path> cmd_render(const RunConfig& c, const fs::path& run_dir, std::vector<int> view_ids) {
  const GaussianScene scene = load_scene(c.scene);
  const std::vector<Camera> cams = load_cameras(c.cameras);
  if (view_ids.empty()) view_ids = c.views;
  std::vector<fs::path> written;
  for (int v : select_views(view_ids, cams.size())) {
    write_view(render(scene, cams[v]).image, run_dir / "render", v);
    written.push_back(image_path(run_dir / "render", v));
  }
  return written;
}

LocalizationResult cmd_localize(const RunConfig& c, const fs::path& run_dir) {
  GaussianScene scene = load_scene(c.scene);
  const std::vector<Camera> cams = load_cameras(c.cameras);
  return localize_into(c, scene, cams, run_dir);
}

EditResult cmd_edit(const RunConfig& c, const fs::path& run_dir, bool auto_localize) {
  const std::string started = utc_now();
  const std::string& keyword = require_keyword(c);
  const std::vector<Camera> cams = load_cameras(c.cameras);
  GaussianScene scene = load_scene(c.scene);
  fs::create_directories(run_dir);

  std::vector<MaskBuffer> masks;
  for (std::size_t v = 0; v < cams.size(); ++v) masks.emplace_back(static_cast<int>(v), cams[v].width, cams[v].height);
  std::vector<bool> have_mask(cams.size(), false);

  const fs::path labeled_here = run_dir / "scene_labeled.ply";
  if (scene.labeled_count() == 0 && !auto_localize && fs::exists(labeled_here)) scene = load_scene(labeled_here.string());
  if (scene.labeled_count() == 0) {
    if (!auto_localize)
      throw DataError("scene has no labeled Gaussians; run localize first or pass --auto-localize");
    const LocalizationResult loc = localize_into(c, scene, cams, run_dir);
    for (const auto& v : loc.views)
      if (v.ok) {
        masks[v.view_id] = v.mask;
        have_mask[v.view_id] = true;
      }
  } else {
    const fs::path dir = masks_directory(c, run_dir);
    for (std::size_t v = 0; v < cams.size(); ++v) {
      const fs::path p = view_keyword_path(dir.string(), static_cast<int>(v), keyword);
      if (!fs::exists(p)) continue;
      masks[v].grid = read_view_image(p, cams[v], 1);
      have_mask[v] = true;
    }
  }

  std::vector<int> train;
  for (int v : select_views(c.train_views, cams.size())) {
    if (have_mask[v])
      train.push_back(v);
    else
      std::cerr << "warning: view " << v << " has no edit mask and is skipped\n";
  }
  if (c.edit.iterations > 0 && train.empty()) throw DataError("no training view has an edit mask");

  std::vector<ImageBuffer> originals;
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const fs::path p = image_path(c.images_dir, static_cast<int>(v));
    originals.push_back(!c.images_dir.empty() && fs::exists(p) ? read_view_image(p, cams[v], 3)
                                                               : render(scene, cams[v]).image);
  }

  std::unique_ptr<GuidanceProvider> guidance;
  if (c.wire_provider()) {
    guidance = std::make_unique<RemoteGuidance>(c.endpoint(), c.provider_timeout_ms);
  } else {
    std::vector<ImageBuffer> targets = originals;
    if (c.edit.iterations > 0) {
      if (c.targets_dir.empty()) throw ConfigError("the oracle provider needs 'targets_dir'");
      for (int v : train) targets[v] = read_view_image(image_path(c.targets_dir, v), cams[v], 3);
    }
    const Camera& ref = cams[train.empty() ? 0 : train.front()];
    const double strength = c.oracle_strength.value_or(1.0 / (3.0 * ref.width * ref.height));
    guidance = std::make_unique<OracleGuidance>(std::move(targets), strength);
  }
  std::unique_ptr<Segmenter> seg = make_segmenter(c);
  EditProviders providers;
  providers.guidance = guidance.get();
  providers.segmenter = seg.get();

  EditHooks hooks;
  hooks.checkpoint_interval = c.checkpoint_interval;
  hooks.checkpoint = [&](const TrainState& st) { write_checkpoint(st, run_dir / "checkpoints"); };
  const int iterations = c.edit.iterations;
  hooks.log = [&](const LossRecord& r) {
    if (c.log_interval > 0 && (r.iteration + 1) % c.log_interval == 0)
      std::cout << "iter " << r.iteration + 1 << "/" << iterations << " view " << r.view << " t " << r.timestep
                << " loss " << num(r.report.total) << std::endl;
  };
  hooks.dump = [&](const TrainState& st) {
    const fs::path dir = run_dir / "abort";
    fs::create_directories(dir);
    save_scene(st.scene, (dir / "scene.ply").string());
    write_json({{"iteration", st.iteration}, {"rng_state", st.rng_state()}}, dir / "state.json");
    return dir.string();
  };

  EditResult result = run_edit(scene, cams, train, originals, masks, providers, c.edit, hooks);

  save_scene(result.scene, (run_dir / "scene_edited.ply").string());
  write_losses(result.losses, run_dir / "losses.csv");
  for (int v : select_views(c.views, cams.size())) {
    write_view(render(scene, cams[v]).image, run_dir / "before", v);
    write_view(render(result.scene, cams[v]).image, run_dir / "after", v);
  }
  json summary = {{"started_at", started},
                  {"iterations", iterations},
                  {"train_views", train},
                  {"gaussian_count", result.scene.size()},
                  {"labeled_count", result.scene.labeled_count()},
                  {"cloned", result.cloned},
                  {"split", result.split},
                  {"pruned", result.pruned},
                  {"relocalizations", result.relocalizations},
                  {"relocalize_failures", result.relocalize_failures},
                  {"final_loss", result.losses.empty() ? json(nullptr) : json(result.losses.back().report.total)}};
  write_json(summary, run_dir / "edit_summary.json");
  return result;
}

json cmd_eval(const RunConfig& c, const fs::path& run_dir, const fs::path& before_dir, const fs::path& after_dir) {
  const std::string& keyword = require_keyword(c);
  std::vector<int> ids = numbered_pfms(before_dir);
  const std::vector<int> after_ids = numbered_pfms(after_dir);
  if (ids != after_ids)
    throw DataError("before and after hold different image sets (" + std::to_string(ids.size()) + " vs " +
                    std::to_string(after_ids.size()) + ")");
  if (!c.views.empty()) {
    for (int v : c.views)
      if (!std::binary_search(ids.begin(), ids.end(), v)) throw DataError("no image for view " + std::to_string(v));
    ids = c.views;
  }
  if (ids.empty()) throw DataError("no images to evaluate in " + before_dir.string());
  const fs::path mask_dir = masks_directory(c, run_dir);
  const bool with_target = !c.targets_dir.empty();

  RegionStats total;
  json per_view = json::array();
  for (int v : ids) {
    const ImageBuffer before = read_pfm(image_path(before_dir, v).string());
    const ImageBuffer after = read_pfm(image_path(after_dir, v).string());
    if (!before.same_shape(after)) throw DataError("before and after differ in shape for view " + std::to_string(v));
    const fs::path mp = view_keyword_path(mask_dir.string(), v, keyword);
    if (!fs::exists(mp)) throw DataError("missing mask " + mp.string());
    const ImageBuffer mask = read_pfm(mp.string());
    if (mask.width != before.width || mask.height != before.height || mask.channels != 1)
      throw DataError(mp.string() + " does not match the image size");
    ImageBuffer target;
    if (with_target) {
      target = read_pfm(image_path(c.targets_dir, v).string());
      if (!target.same_shape(after)) throw DataError("target of view " + std::to_string(v) + " has the wrong shape");
    }
    const ImageBuffer smap = ssim(before, after, false, true).map;

    RegionStats s;
    const int ch = before.channels;
    for (std::size_t p = 0; p < before.pixel_count(); ++p) {
      const bool inside = mask.data[p] > 0.5f;
      for (int k = 0; k < ch; ++k) {
        const std::size_t i = p * ch + k;
        if (inside) {
          if (with_target) s.inside_l1 += std::abs(static_cast<double>(after.data[i]) - target.data[i]);
          ++s.inside_n;
        } else {
          const double d = static_cast<double>(after.data[i]) - before.data[i];
          s.outside_se += d * d;
          s.outside_ssim += smap.data[i];
          ++s.outside_n;
        }
      }
    }
    json j = s.to_json(with_target);
    j["view"] = v;
    j["inside_pixels"] = s.inside_n / static_cast<std::size_t>(ch);
    per_view.push_back(j);
    total.add(s);
  }
  json out = total.to_json(with_target);
  out["per_view"] = per_view;
  fs::create_directories(run_dir);
  write_json(out, run_dir / "eval.json");
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Text-guided editing of 3D Gaussian splatting scenes", "gsplat-edit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out;
  std::optional<std::uint64_t> seed;
  std::optional<float> attn;
  std::optional<double> eps, weight, iou;
  std::optional<int> min_pts;
  int threads = 0;
  bool relocalize_labels = false, auto_localize = false;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--out", out, "Run directory (default: output_dir/<config hash>)");
  app.add_option("--threads", threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--attn-threshold", attn, "Attention filter threshold");
  app.add_option("--dbscan-eps", eps, "DBSCAN radius at 256 px width");
  app.add_option("--dbscan-minpts", min_pts, "DBSCAN minimum points");
  app.add_option("--weight-threshold", weight, "Back-projection label threshold");
  app.add_option("--iou-floor", iou, "IoU above which keyword masks are trusted");
  app.add_flag("--relocalize-labels", relocalize_labels, "Recompute labels when masks are relocalized");

  std::vector<int> views;
  std::string before, after;
  auto* render_cmd = app.add_subcommand("render", "Render views of the scene");
  render_cmd->add_option("--views", views, "View ids (default: all)")->delimiter(',');
  auto* localize_cmd = app.add_subcommand("localize", "Label the Gaussians of the edit region");
  auto* edit_cmd = app.add_subcommand("edit", "Run the guided edit");
  edit_cmd->add_flag("--auto-localize", auto_localize, "Localize first when the scene has no labels");
  auto* eval_cmd = app.add_subcommand("eval", "Region-split metrics between two render sets");
  eval_cmd->add_option("--before", before, "Directory of reference renders")->required();
  eval_cmd->add_option("--after", after, "Directory of edited renders")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json overrides = json::object();
    if (seed) overrides["seed"] = *seed;
    if (attn) overrides["localize"]["attn_threshold"] = *attn;
    if (eps) overrides["localize"]["dbscan_eps"] = *eps;
    if (min_pts) overrides["localize"]["dbscan_min_pts"] = *min_pts;
    if (weight) overrides["localize"]["weight_threshold"] = *weight;
    if (iou) overrides["localize"]["iou_floor"] = *iou;
    if (relocalize_labels) overrides["relocalize_labels"] = true;
    const RunConfig config = load_run_config(config_path, overrides);
    set_thread_count(threads);
    const fs::path run_dir = run_directory(config, out);
    fs::create_directories(run_dir);

    if (*render_cmd) {
      cmd_render(config, run_dir, views);
    } else if (*localize_cmd) {
      const LocalizationResult r = cmd_localize(config, run_dir);
      std::cout << "mode " << to_string(r.decision.mode) << ", " << r.labeled_count << " Gaussians labeled\n";
    } else if (*edit_cmd) {
      cmd_edit(config, run_dir, auto_localize);
    } else if (*eval_cmd) {
      std::cout << cmd_eval(config, run_dir, before, after).dump(2) << '\n';
    }
    std::cout << run_dir.string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace gsedit::cli
