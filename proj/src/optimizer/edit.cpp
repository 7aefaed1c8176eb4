#include <cmath>
#include <sstream>

#include "gsedit/errors.hpp"
#include "gsedit/optimizer.hpp"

namespace gsedit {

void EditConfig::validate() const {
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (static_mask_iterations < 0 || static_mask_iterations > std::max(iterations, 0))
    throw ConfigError("static_mask_iterations must lie in [0, iterations]");
  if (relocalize_interval <= 0) throw ConfigError("relocalize_interval must be > 0");
  if (anchor_interval <= 0) throw ConfigError("anchor_interval must be > 0");
  if (!(lambda_growth >= 1.0) || !std::isfinite(lambda_growth)) throw ConfigError("lambda_growth must be >= 1");
  if (densify.interval < 0) throw ConfigError("densify interval must be >= 0");
  if (!(densify.split_factor > 0.0)) throw ConfigError("split factor must be > 0");
  const LearningRates& lr = learning_rates;
  for (double v : {lr.position, lr.log_scale, lr.rotation, lr.opacity, lr.color})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("learning rates must be finite and >= 0");
  if (schedule.t_min < 0 || schedule.t_max < schedule.t_min) throw ConfigError("invalid timestep range");
  weights.validate();
}

std::string TrainState::rng_state() const {
  std::ostringstream os;
  os << rng;
  return os.str();
}

namespace {

bool relocalize_due(int done, const EditConfig& c) {
  if (done >= c.iterations || done < c.static_mask_iterations) return false;
  return (done - c.static_mask_iterations) % c.relocalize_interval == 0;
}

// Stage-2 relocalization. Views that fail keep their previous mask.
void refresh_masks(TrainState& st, EditResult& result, const std::vector<Camera>& cameras,
                   const std::vector<int>& views, const EditProviders& providers, const EditConfig& config) {
  GuidanceAttention fallback(*providers.guidance, config.prompt);
  AttentionSource& source = providers.attention ? *providers.attention : fallback;
  LocalizeOptions opt = config.localize;
  // Without a segmenter the attention masks are used as they are.
  class NoSegmenter final : public Segmenter {
   public:
    MaskBuffer segment(const SegmentationQuery&) override { throw DataError("no segmentation provider"); }
  } none;
  Segmenter& seg = providers.segmenter ? *providers.segmenter : none;
  if (!providers.segmenter) opt.mode_override = LocalizationMode::Addition;
  try {
    const LocalizationResult r =
        relocalize(st.scene, cameras, views, source, config.keyword, seg, opt, config.relocalize_labels);
    for (const auto& v : r.views) {
      if (v.ok)
        st.dynamic_masks[v.view_id] = v.mask;
      else
        result.relocalize_failures.push_back("iteration " + std::to_string(st.iteration) + " view " +
                                             std::to_string(v.view_id) + ": " + v.error);
    }
    ++result.relocalizations;
  } catch (const DataError& e) {
    result.relocalize_failures.push_back("iteration " + std::to_string(st.iteration) + ": " + e.what());
  } catch (const TransportError& e) {
    result.relocalize_failures.push_back("iteration " + std::to_string(st.iteration) + ": " + e.what());
  }
}

[[noreturn]] void abort_numeric(const TrainState& st, const EditHooks& hooks, const std::string& what, int view,
                                int t) {
  std::string msg = "numeric abort at iteration " + std::to_string(st.iteration) + " (view " + std::to_string(view) +
                    ", timestep " + std::to_string(t) + "): " + what;
  if (hooks.dump) msg += "; state dumped to " + hooks.dump(st);
  throw NumericError(msg);
}

}  // namespace

EditResult run_edit(const GaussianScene& initial, const std::vector<Camera>& cameras,
                    const std::vector<int>& train_views, const std::vector<ImageBuffer>& originals,
                    const std::vector<MaskBuffer>& static_masks, const EditProviders& providers,
                    const EditConfig& config, const EditHooks& hooks) {
  config.validate();
  if (!providers.guidance) throw ConfigError("run_edit: no guidance provider");
  if (originals.size() != cameras.size() || static_masks.size() != cameras.size())
    throw ContractViolation("run_edit: originals and masks must be indexed by camera");
  if (config.iterations > 0 && train_views.empty()) throw ConfigError("run_edit: no training views");
  for (int v : train_views) {
    if (v < 0 || static_cast<std::size_t>(v) >= cameras.size())
      throw ConfigError("run_edit: training view " + std::to_string(v) + " has no camera");
    const Camera& c = cameras[v];
    if (originals[v].width != c.width || originals[v].height != c.height || originals[v].channels != 3 ||
        static_masks[v].width() != c.width || static_masks[v].height() != c.height)
      throw DataError("run_edit: original image or mask of view " + std::to_string(v) + " does not match its camera");
  }

  TrainState st;
  st.scene = initial;
  st.static_masks = static_masks;
  st.dynamic_masks = static_masks;
  st.rng.seed(config.seed);
  EditResult result;

  Adam adam(config.learning_rates);
  DensifyStats dstats;
  dstats.resize(st.scene.size());
  std::uniform_int_distribution<std::size_t> pick_view(0, train_views.empty() ? 0 : train_views.size() - 1);
  std::uniform_int_distribution<int> pick_t(config.schedule.t_min, config.schedule.t_max);
  const LossWeights& w = config.weights;

  st.anchors.push_back(snapshot_anchor(st.scene));

  for (int it = 0; it < config.iterations; ++it) {
    const int view = train_views[pick_view(st.rng)];
    const int t = pick_t(st.rng);
    const std::uint64_t noise_seed = st.rng();
    const Camera& cam = cameras[view];

    const RenderOutput r = render(st.scene, cam);
    GuidanceRequest req;
    req.image = r.image;
    req.prompt = config.prompt;
    req.timestep = static_cast<std::uint32_t>(t);
    req.noise_seed = noise_seed;
    const GuidanceResponse resp = providers.guidance->guide(req, view);
    if (!resp.residual.same_shape(r.image)) throw TransportError("guidance residual has the wrong shape");

    ImageBuffer dI = sds_gradient(resp, config.schedule, t);
    for (float& v : dI.data) v = static_cast<float>(w.lambda_sds * v);
    const MaskBuffer& mask = st.in_static_stage(config) ? st.static_masks[view] : st.dynamic_masks[view];
    const ImageBuffer pgt = compose_pseudo_gt(mask, r.image, originals[view]);
    const PreservationResult pres = preservation_loss(r.image, pgt, w);
    for (std::size_t i = 0; i < dI.data.size(); ++i) dI.data[i] += pres.gradient.data[i];

    ParamGradients grads = rasterize_backward(r, dI, st.scene, cam);
    const AnchorLoss anchor = anchor_loss(st.scene, st.anchors, config.lambda_growth);
    add_scaled(grads, anchor.gradients, w.lambda_anchor);

    LossRecord rec;
    rec.iteration = it;
    rec.view = view;
    rec.timestep = t;
    try {
      rec.report = total_loss(sds_loss_value(resp, config.schedule, t), pres, anchor.values, w);
    } catch (const NumericError& e) {
      abort_numeric(st, hooks, e.what(), view, t);
    }
    if (!grads.all_finite()) abort_numeric(st, hooks, "non-finite gradient", view, t);
    result.losses.push_back(rec);
    if (hooks.log) hooks.log(rec);

    gate_gradients(grads, st.scene);
    dstats.accumulate(grads, r, st.scene);
    adam.step(st.scene, grads);
    st.iteration = it + 1;

    if (st.iteration % config.anchor_interval == 0) st.anchors.push_back(snapshot_anchor(st.scene));

    if (config.densify.interval > 0 && st.iteration % config.densify.interval == 0 &&
        st.iteration < config.iterations) {
      const DensifyResult d =
          densify_and_prune(st.scene, dstats, config.densify, config.learning_rates.position, st.rng);
      if (!d.remap.is_identity()) {
        adam.apply(d.remap);
        for (auto& a : st.anchors) a.apply(d.remap);
      }
      result.cloned += d.cloned;
      result.split += d.split;
      result.pruned += d.pruned;
      dstats.resize(st.scene.size());
    }

    if (relocalize_due(st.iteration, config)) refresh_masks(st, result, cameras, train_views, providers, config);

    if (hooks.checkpoint && hooks.checkpoint_interval > 0 && st.iteration % hooks.checkpoint_interval == 0)
      hooks.checkpoint(st);
  }

  result.scene = std::move(st.scene);
  result.anchors = std::move(st.anchors);
  result.dynamic_masks = std::move(st.dynamic_masks);
  return result;
}

}  // namespace gsedit
