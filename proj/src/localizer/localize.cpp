#include <cmath>
#include <limits>

#include "gsedit/errors.hpp"
#include "gsedit/localizer.hpp"
#include "gsedit/rasterizer.hpp"

namespace gsedit {

namespace {

MaskBuffer clustered_attention(const ViewInput& view, const LocalizeOptions& opt) {
  const MaskBuffer filtered = filter_attention(view.attention, opt.attn_threshold);
  return cluster_dbscan(filtered, scaled_dbscan_eps(opt.dbscan_eps, view.attention.grid.width), opt.dbscan_min_pts);
}

SegmentationQuery make_query(const ViewInput& view, const std::string& keyword) {
  SegmentationQuery q;
  q.view_id = static_cast<std::uint32_t>(view.view_id);
  q.keyword = keyword;
  q.image = view.image;
  return q;
}

}  // namespace

ModeDecision decide_mode(Segmenter& segmenter, const std::vector<ViewInput>& views, const std::string& keyword,
                         const LocalizeOptions& options) {
  ModeDecision d;
  d.iou.assign(views.size(), std::numeric_limits<double>::quiet_NaN());
  d.provider_masks.resize(views.size());
  std::size_t answered = 0, agreeing = 0, nonempty = 0;
  std::string last_error;
  for (std::size_t s = 0; s < views.size(); ++s) {
    MaskBuffer provided;
    try {
      provided = segmenter.segment(make_query(views[s], keyword));
    } catch (const Error& e) {
      last_error = e.what();
      continue;
    }
    const MaskBuffer clustered = clustered_attention(views[s], options);
    const MaskBuffer bin = binarize(provided, 0.5f);
    d.iou[s] = mask_iou(bin, clustered);
    ++answered;
    agreeing += d.iou[s] >= options.iou_floor;
    nonempty += provided.nonzero_count() > 0;
    d.provider_masks[s] = std::move(provided);
  }
  if (answered == 0) throw DataError("segmentation provider failed on every view: " + last_error);
  if (2 * agreeing > answered) {
    d.mode = LocalizationMode::EditExisting;
    d.refine = false;
  } else if (nonempty == 0) {
    d.mode = LocalizationMode::Addition;
  } else {
    d.mode = LocalizationMode::EditExisting;
    d.refine = true;
  }
  return d;
}

MaskBuffer build_view_mask(const ModeDecision& decision, std::size_t view_slot, const ViewInput& view,
                           const std::string& keyword, const MaskBuffer& clustered, const PointPrompts& prompts,
                           Segmenter& segmenter) {
  if (clustered.view_id != view.view_id) throw ContractViolation("build_view_mask: view id mismatch");
  if (decision.mode == LocalizationMode::Addition) return binarize(clustered, 0.0f);
  if (!decision.refine && view_slot < decision.provider_masks.size() && decision.provider_masks[view_slot])
    return binarize(*decision.provider_masks[view_slot], 0.5f);
  SegmentationQuery q = make_query(view, keyword);
  q.positives = prompts.positives;
  q.negatives = prompts.negatives;
  MaskBuffer m = binarize(segmenter.segment(q), 0.5f);
  m.view_id = view.view_id;
  return m;
}

std::vector<MaskBuffer> LocalizationResult::masks() const {
  std::vector<MaskBuffer> out;
  for (const auto& v : views)
    if (v.ok) out.push_back(v.mask);
  return out;
}

LocalizationResult localize(GaussianScene& scene, const std::vector<Camera>& cameras,
                            const std::vector<ViewInput>& views, const std::string& keyword,
                            Segmenter& segmenter, const LocalizeOptions& options, bool update_labels) {
  if (views.empty()) throw DataError("localize: no views");
  for (const ViewInput& v : views) {
    if (v.view_id < 0 || static_cast<std::size_t>(v.view_id) >= cameras.size())
      throw DataError("localize: view " + std::to_string(v.view_id) + " has no camera");
    const Camera& cam = cameras[v.view_id];
    if (v.attention.grid.width != cam.width || v.attention.grid.height != cam.height ||
        v.attention.grid.channels != 1)
      throw DataError("localize: attention map of view " + std::to_string(v.view_id) + " does not match its camera");
  }

  LocalizationResult result;
  if (options.mode_override) {
    result.decision.mode = *options.mode_override;
    result.decision.refine = *options.mode_override == LocalizationMode::EditExisting;
    result.decision.iou.assign(views.size(), std::numeric_limits<double>::quiet_NaN());
    result.decision.provider_masks.resize(views.size());
  } else {
    result.decision = decide_mode(segmenter, views, keyword, options);
  }

  std::size_t ok = 0;
  for (std::size_t s = 0; s < views.size(); ++s) {
    const ViewInput& v = views[s];
    ViewLocalization vl;
    vl.view_id = v.view_id;
    vl.mask = MaskBuffer(v.view_id, v.attention.grid.width, v.attention.grid.height);
    try {
      MaskBuffer clustered = clustered_attention(v, options);
      clustered.view_id = v.view_id;
      vl.prompts = select_point_prompts(v.attention, clustered);
      vl.mask = build_view_mask(result.decision, s, v, keyword, clustered, vl.prompts, segmenter);
      vl.mask.view_id = v.view_id;
      vl.ok = true;
      ++ok;
    } catch (const Error& e) {
      vl.error = e.what();
    }
    result.views.push_back(std::move(vl));
  }
  if (ok == 0) {
    std::string msg = "localization failed on every view";
    if (!result.views.empty()) msg += ": " + result.views.front().error;
    throw DataError(msg);
  }
  if (update_labels) backproject_labels(scene, cameras, result.masks(), options.weight_threshold);
  result.labeled_count = scene.labeled_count();
  return result;
}

AttentionMap GuidanceAttention::attention(const ImageBuffer& render, int view_id, const std::string& keyword) {
  GuidanceRequest req;
  req.image = render;
  req.prompt = prompt_;
  req.timestep = 500;
  req.noise_seed = static_cast<std::uint64_t>(view_id);
  GuidanceResponse resp = provider_.guide(req, view_id);
  if (!resp.attention) throw DataError("guidance provider returned no attention for view " + std::to_string(view_id));
  AttentionMap map = std::move(*resp.attention);
  map.view_id = view_id;
  map.keyword = keyword;
  if (map.grid.width != render.width || map.grid.height != render.height || map.grid.channels != 1)
    throw DataError("attention map of view " + std::to_string(view_id) + " has the wrong size");
  return normalize_attention(std::move(map));
}

LocalizationResult relocalize(GaussianScene& scene, const std::vector<Camera>& cameras,
                              const std::vector<int>& view_ids, AttentionSource& source,
                              const std::string& keyword, Segmenter& segmenter, const LocalizeOptions& options,
                              bool update_labels) {
  std::vector<ViewInput> views;
  std::vector<ViewLocalization> failed;
  for (int id : view_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cameras.size())
      throw DataError("relocalize: view " + std::to_string(id) + " has no camera");
    ViewInput v;
    v.view_id = id;
    v.image = render(scene, cameras[id]).image;
    try {
      v.attention = source.attention(v.image, id, keyword);
    } catch (const Error& e) {
      ViewLocalization vl;
      vl.view_id = id;
      vl.error = e.what();
      vl.mask = MaskBuffer(id, cameras[id].width, cameras[id].height);
      failed.push_back(std::move(vl));
      continue;
    }
    views.push_back(std::move(v));
  }
  if (views.empty()) throw DataError("relocalize: no view produced attention");
  LocalizationResult r = localize(scene, cameras, views, keyword, segmenter, options, update_labels);
  for (auto& f : failed) r.views.push_back(std::move(f));
  return r;
}

}  // namespace gsedit
