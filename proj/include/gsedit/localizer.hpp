#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gsedit/camera.hpp"
#include "gsedit/guidance.hpp"
#include "gsedit/image.hpp"
#include "gsedit/protocol.hpp"
#include "gsedit/scene.hpp"

namespace gsedit {

enum class LocalizationMode { Addition, EditExisting };

const char* to_string(LocalizationMode mode);
/// Accepts "addition" / "edit_existing" (case-insensitive). Throws ConfigError.
LocalizationMode parse_mode(const std::string& text);

// ---- attention filtering -------------------------------------------------

/// Keeps values >= threshold, zeroes the rest.
MaskBuffer filter_attention(const AttentionMap& map, float threshold);

constexpr int kDbscanNoise = -1;

/// Plain DBSCAN over 2D points. Labels are cluster ids 0..n-1 in discovery
/// order or kDbscanNoise. A point is core when at least min_pts points
/// (itself included) lie within distance eps.
std::vector<int> dbscan(const std::vector<Eigen::Vector2d>& points, double eps, int min_pts);

/// DBSCAN over the nonzero pixels of a mask; noise pixels are zeroed.
MaskBuffer cluster_dbscan(const MaskBuffer& mask, double eps, int min_pts);

/// eps is given for 256-pixel-wide views and grows with wider views.
double scaled_dbscan_eps(double eps, int width);

struct PointPrompts {
  std::vector<wire::PixelCoord> positives;  // descending attention
  std::vector<wire::PixelCoord> negatives;  // ascending attention
};

constexpr std::size_t kMaxPositivePrompts = 5;
constexpr std::size_t kMaxNegativePrompts = 3;

/// Top attention pixels inside the clustered mask and bottom attention pixels
/// outside it; ties go to the earlier pixel in row-major order. Throws
/// DataError when the clustered mask is empty.
PointPrompts select_point_prompts(const AttentionMap& map, const MaskBuffer& clustered);

/// Intersection over union of the nonzero sets; 0 when both are empty.
double mask_iou(const MaskBuffer& a, const MaskBuffer& b);

// ---- segmentation providers ----------------------------------------------

using SegmentationQuery = wire::SegmentationRequest;

/// Promptable segmenter. Returns a soft single-channel mask of the query image size.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual MaskBuffer segment(const SegmentationQuery& query) = 0;
};

/// Returns ground-truth masks regardless of prompts. Masks come either from
/// memory (indexed by view id) or from {dir}/{view}_{keyword}.pfm; a missing
/// mask means "object not present" and yields an empty mask.
class OracleSegmenter final : public Segmenter {
 public:
  explicit OracleSegmenter(std::string masks_dir) : dir_(std::move(masks_dir)) {}
  explicit OracleSegmenter(std::vector<MaskBuffer> masks) : masks_(std::move(masks)) {}
  MaskBuffer segment(const SegmentationQuery& query) override;

 private:
  std::string dir_;
  std::vector<MaskBuffer> masks_;
};

/// Delegates to a GSGP server (segmentation request / response).
class WireSegmenter final : public Segmenter {
 public:
  explicit WireSegmenter(Endpoint endpoint, int timeout_ms = 30000)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}
  MaskBuffer segment(const SegmentationQuery& query) override;

 private:
  Endpoint endpoint_;
  int timeout_ms_;
};

// ---- localization chain ---------------------------------------------------

struct LocalizeOptions {
  float attn_threshold = 0.5f;
  double dbscan_eps = 2.0;  // at 256 px width
  int dbscan_min_pts = 5;
  double weight_threshold = 0.6;
  double iou_floor = 0.5;
  std::optional<LocalizationMode> mode_override;
};

/// One view handed to the localizer: its attention map and the RGB image the
/// segmenter sees.
struct ViewInput {
  int view_id = 0;
  AttentionMap attention;
  ImageBuffer image;
};

struct ModeDecision {
  LocalizationMode mode = LocalizationMode::EditExisting;
  bool refine = false;                    // EditExisting via point prompts
  std::vector<double> iou;                // per input view; NaN where the provider failed
  std::vector<std::optional<MaskBuffer>> provider_masks;  // keyword-only masks
};

/// Queries the provider with the keyword per view and compares against the
/// filtered, clustered attention. Throws DataError if the provider fails on
/// every view.
ModeDecision decide_mode(Segmenter& segmenter, const std::vector<ViewInput>& views, const std::string& keyword,
                         const LocalizeOptions& options);

/// Binary mask for one view. Addition binarizes the clustered attention;
/// EditExisting uses the provider mask (keyword-only when trusted, from the
/// point prompts otherwise) binarized at 0.5.
MaskBuffer build_view_mask(const ModeDecision& decision, std::size_t view_slot, const ViewInput& view,
                           const std::string& keyword, const MaskBuffer& clustered, const PointPrompts& prompts,
                           Segmenter& segmenter);

/// Sets label and backproj_weight on every Gaussian from per-view masks.
/// masks[i].view_id selects the camera. The weight is the mean contribution
/// weight over the views where the Gaussian is visible. Throws DataError when
/// no masks are given.
void backproject_labels(GaussianScene& scene, const std::vector<Camera>& cameras,
                        const std::vector<MaskBuffer>& masks, double weight_threshold);

struct ViewLocalization {
  int view_id = 0;
  bool ok = false;
  std::string error;
  PointPrompts prompts;
  MaskBuffer mask;  // binary; empty grid of the view size on failure
};

struct LocalizationResult {
  ModeDecision decision;
  std::vector<ViewLocalization> views;
  std::size_t labeled_count = 0;

  /// Masks of the successful views.
  std::vector<MaskBuffer> masks() const;
};

/// filter -> cluster -> prompts -> mask -> back-projection. When update_labels
/// is false the scene is left untouched and only masks are produced. Throws
/// DataError when every view fails.
LocalizationResult localize(GaussianScene& scene, const std::vector<Camera>& cameras,
                            const std::vector<ViewInput>& views, const std::string& keyword,
                            Segmenter& segmenter, const LocalizeOptions& options, bool update_labels = true);

/// Attention for a freshly rendered view.
class AttentionSource {
 public:
  virtual ~AttentionSource() = default;
  virtual AttentionMap attention(const ImageBuffer& render, int view_id, const std::string& keyword) = 0;
};

/// Uses the attention returned alongside a guidance response. Throws DataError
/// when the provider sends none.
class GuidanceAttention final : public AttentionSource {
 public:
  GuidanceAttention(GuidanceProvider& provider, std::string prompt)
      : provider_(provider), prompt_(std::move(prompt)) {}
  AttentionMap attention(const ImageBuffer& render, int view_id, const std::string& keyword) override;

 private:
  GuidanceProvider& provider_;
  std::string prompt_;
};

/// Renders the listed views of the current scene, asks the source for
/// attention and reruns localize().
LocalizationResult relocalize(GaussianScene& scene, const std::vector<Camera>& cameras,
                              const std::vector<int>& view_ids, AttentionSource& source,
                              const std::string& keyword, Segmenter& segmenter, const LocalizeOptions& options,
                              bool update_labels);

}  // namespace gsedit
