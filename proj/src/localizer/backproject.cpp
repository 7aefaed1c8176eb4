#include <algorithm>

#include "gsedit/errors.hpp"
#include "gsedit/localizer.hpp"
#include "gsedit/rasterizer.hpp"

namespace gsedit {

namespace {
constexpr double kVisibleMass = 1e-6;
}

void backproject_labels(GaussianScene& scene, const std::vector<Camera>& cameras,
                        const std::vector<MaskBuffer>& masks, double weight_threshold) {
  if (masks.empty()) throw DataError("backproject_labels: no view masks");
  const std::size_t n = scene.gaussians.size();
  // Per Gaussian, the weights of the views where it is visible.
  std::vector<std::vector<double>> seen(n);
  for (const MaskBuffer& mask : masks) {
    if (mask.view_id < 0 || static_cast<std::size_t>(mask.view_id) >= cameras.size())
      throw ContractViolation("backproject_labels: mask view id out of range");
    const RenderOutput r = render(scene, cameras[mask.view_id]);
    const ContributionStats st = contribution_stats(r, mask);
    for (std::size_t g = 0; g < n; ++g)
      if (st.total[g] > kVisibleMass) seen[g].push_back(st.inside[g] / st.total[g]);
  }
  for (std::size_t g = 0; g < n; ++g) {
    auto& w = seen[g];
    // Sorting makes the mean independent of view order.
    std::sort(w.begin(), w.end());
    double sum = 0.0;
    for (double v : w) sum += v;
    const double mean = w.empty() ? 0.0 : sum / static_cast<double>(w.size());
    scene.gaussians[g].aux.backproj_weight = static_cast<float>(mean);
    scene.gaussians[g].aux.label = mean > weight_threshold;
  }
}

}  // namespace gsedit
