#include <algorithm>
#include <cmath>

#include "footprint.hpp"
#include "gsedit/errors.hpp"
#include "gsedit/parallel.hpp"
#include "gsedit/rasterizer.hpp"

namespace gsedit {

namespace {

struct RowResult {
  std::vector<ContribRecord> records;
  std::vector<std::uint32_t> counts;
};

}  // namespace

RenderOutput rasterize(std::vector<Splat2D> splats, const GaussianScene& scene, const Camera& camera) {
  const int w = camera.width, h = camera.height;
  RenderOutput out;
  out.image = ImageBuffer(w, h, 3);
  out.final_transmittance.assign(static_cast<std::size_t>(w) * h, 1.0);
  out.gaussian_count = scene.size();
  out.splats = std::move(splats);

  std::vector<detail::RowSpan> spans(out.splats.size());
  for (std::size_t s = 0; s < out.splats.size(); ++s) spans[s] = detail::footprint(out.splats[s], w, h);

  std::vector<RowResult> rows(static_cast<std::size_t>(h));
  parallel_for(h, [&](int y) {
    RowResult& row = rows[y];
    row.counts.assign(w, 0);
    std::vector<std::uint32_t> active;
    for (std::size_t s = 0; s < spans.size(); ++s)
      if (spans[s].y0 <= y && y <= spans[s].y1) active.push_back(static_cast<std::uint32_t>(s));
    Eigen::Vector2d d;
    for (int x = 0; x < w; ++x) {
      double t = 1.0;
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      for (const std::uint32_t s : active) {
        if (x < spans[s].x0 || x > spans[s].x1) continue;
        const Splat2D& sp = out.splats[s];
        const double sigma = std::min(kMaxSigma, detail::raw_sigma(sp, x, y, d));
        if (sigma < detail::kSigmaFloor) continue;
        row.records.push_back({s, sp.gaussian_index, sigma, t});
        ++row.counts[x];
        c += sp.color * (sigma * t);
        t *= 1.0 - sigma;
        if (t < kMinTransmittance) break;
      }
      for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = static_cast<float>(c[ch]);
      out.final_transmittance[static_cast<std::size_t>(y) * w + x] = t;
    }
  });

  out.record_offsets.assign(static_cast<std::size_t>(w) * h + 1, 0);
  std::size_t total = 0;
  for (const auto& r : rows) total += r.records.size();
  out.records.reserve(total);
  std::size_t pixel = 0;
  for (auto& r : rows) {
    for (const auto n : r.counts) {
      out.record_offsets[pixel + 1] = out.record_offsets[pixel] + n;
      ++pixel;
    }
    out.records.insert(out.records.end(), r.records.begin(), r.records.end());
  }
  return out;
}

RenderOutput render(const GaussianScene& scene, const Camera& camera) {
  return rasterize(project(scene, camera), scene, camera);
}

ContributionStats contribution_stats(const RenderOutput& render, const MaskBuffer& mask) {
  if (mask.width() != render.image.width || mask.height() != render.image.height)
    throw ContractViolation("mask resolution differs from render");
  ContributionStats st;
  st.inside.assign(render.gaussian_count, 0.0);
  st.total.assign(render.gaussian_count, 0.0);
  const std::size_t pixels = render.image.pixel_count();
  for (std::size_t p = 0; p < pixels; ++p) {
    const bool in = mask.grid.data[p] != 0.0f;
    for (const auto& r : render.pixel_records(p)) {
      const double m = r.sigma * r.transmittance;
      st.total[r.gaussian_index] += m;
      if (in) st.inside[r.gaussian_index] += m;
    }
  }
  return st;
}

std::vector<double> contribution_weights(const RenderOutput& render, const MaskBuffer& mask) {
  const ContributionStats st = contribution_stats(render, mask);
  std::vector<double> w(st.total.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i)
    if (st.total[i] > 0.0) w[i] = std::clamp(st.inside[i] / st.total[i], 0.0, 1.0);
  return w;
}

}  // namespace gsedit
