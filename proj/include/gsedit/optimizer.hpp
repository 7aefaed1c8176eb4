#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gsedit/camera.hpp"
#include "gsedit/guidance.hpp"
#include "gsedit/localizer.hpp"
#include "gsedit/preserve.hpp"
#include "gsedit/rasterizer.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

// ---- anchor loss ----------------------------------------------------------

struct AnchorLoss {
  GroupScalars values;     // unweighted by lambda_P
  ParamGradients gradients;  // d(values)/d(params), per group
};

/// sum_i growth^i * sum_g (P_g - P_hat_i,g)^2 per parameter group, over the
/// Gaussians present in snapshot i. Snapshots are weighted by their position
/// in the list.
AnchorLoss anchor_loss(const GaussianScene& scene, const std::vector<AnchorSnapshot>& anchors,
                       double lambda_growth);

/// into += scale_P * g for every group P.
void add_scaled(ParamGradients& into, const ParamGradients& g, const GroupScalars& scale);

/// Zeroes every gradient of an unlabeled Gaussian.
void gate_gradients(ParamGradients& grads, const GaussianScene& scene);

// ---- parameter update -----------------------------------------------------

struct LearningRates {
  double position = 1.6e-4;
  double log_scale = 5e-3;
  double rotation = 1e-3;
  double opacity = 5e-2;
  double color = 2.5e-3;
};

/// Bias-corrected Adam (beta1 0.9, beta2 0.999, eps 1e-15) with one step
/// counter per Gaussian. Only labeled Gaussians are touched; their quaternions
/// are renormalized after the step.
class Adam {
 public:
  explicit Adam(LearningRates lr = {}) : lr_(lr) {}

  void step(GaussianScene& scene, const ParamGradients& grads);
  /// Carries moments through a densification remap; newborns start at zero.
  void apply(const IndexRemap& remap);
  std::size_t size() const { return steps_.size(); }

 private:
  void ensure(std::size_t n);

  LearningRates lr_;
  std::vector<std::int64_t> steps_;
  std::vector<std::array<double, 14>> m_, v_;
};

// ---- densification ----------------------------------------------------------

struct DensifyConfig {
  int interval = 100;  // 0 disables
  double grad_threshold = 2e-4;
  double split_scale_fraction = 0.01;  // of the scene bounds diagonal
  double prune_opacity = 0.005;
  double split_factor = 1.6;
};

/// Screen-space gradient statistics between densification steps.
struct DensifyStats {
  std::vector<double> screen_norm_sum;
  std::vector<std::int64_t> visible_count;
  std::vector<Eigen::Vector3d> position_grad_sum;

  void resize(std::size_t n);
  void accumulate(const ParamGradients& grads, const RenderOutput& render, const GaussianScene& scene);
  double mean_screen_norm(std::size_t i) const;
  Eigen::Vector3d mean_position_grad(std::size_t i) const;
  void reset();
};

struct DensifyResult {
  IndexRemap remap;
  std::size_t cloned = 0;
  std::size_t split = 0;
  std::size_t pruned = 0;
};

/// Clone / split / prune among labeled Gaussians. Survivors keep their order;
/// clones and split children are appended, labeled, with the scene's current
/// generation. Unlabeled Gaussians are never touched.
DensifyResult densify_and_prune(GaussianScene& scene, const DensifyStats& stats, const DensifyConfig& config,
                                double position_lr, std::mt19937_64& rng);

// ---- editing loop -----------------------------------------------------------

struct EditConfig {
  int iterations = 2000;
  int static_mask_iterations = 2000;
  int relocalize_interval = 500;
  int anchor_interval = 500;
  double lambda_growth = 1.5;
  std::uint64_t seed = 0;
  LearningRates learning_rates;
  DensifyConfig densify;
  LossWeights weights;
  NoiseSchedule schedule;
  std::string prompt;
  std::string keyword;
  LocalizeOptions localize;
  bool relocalize_labels = false;

  /// Throws ConfigError.
  void validate() const;
};

struct LossRecord {
  int iteration = 0;
  int view = 0;
  int timestep = 0;
  LossReport report;
};

struct TrainState {
  GaussianScene scene;
  std::vector<AnchorSnapshot> anchors;
  std::vector<MaskBuffer> static_masks;   // indexed by camera
  std::vector<MaskBuffer> dynamic_masks;  // indexed by camera, filled in stage 2
  int iteration = 0;                      // completed iterations
  std::mt19937_64 rng;

  bool in_static_stage(const EditConfig& config) const { return iteration < config.static_mask_iterations; }
  std::string rng_state() const;
};

struct EditProviders {
  GuidanceProvider* guidance = nullptr;   // required
  Segmenter* segmenter = nullptr;         // for stage-2 relocalization
  AttentionSource* attention = nullptr;   // defaults to the guidance provider's attention
};

struct EditHooks {
  int checkpoint_interval = 0;
  std::function<void(const TrainState&)> checkpoint;
  std::function<void(const LossRecord&)> log;
  /// Called with the state at the failing iteration before a NumericError is
  /// thrown; returns a description (e.g. a dump path) for the error message.
  std::function<std::string(const TrainState&)> dump;
};

struct EditResult {
  GaussianScene scene;
  std::vector<LossRecord> losses;
  std::vector<AnchorSnapshot> anchors;
  std::vector<MaskBuffer> dynamic_masks;
  int relocalizations = 0;
  std::vector<std::string> relocalize_failures;
  std::size_t cloned = 0, split = 0, pruned = 0;
};

/// Optimizes the labeled Gaussians. originals and static_masks are indexed by
/// camera; train_views lists the cameras sampled during optimization.
EditResult run_edit(const GaussianScene& initial, const std::vector<Camera>& cameras,
                    const std::vector<int>& train_views, const std::vector<ImageBuffer>& originals,
                    const std::vector<MaskBuffer>& static_masks, const EditProviders& providers,
                    const EditConfig& config, const EditHooks& hooks = {});

}  // namespace gsedit
