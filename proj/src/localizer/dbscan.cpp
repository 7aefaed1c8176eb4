#include <cmath>
#include <deque>
#include <unordered_map>

#include "gsedit/errors.hpp"
#include "gsedit/localizer.hpp"

namespace gsedit {

namespace {

constexpr int kUnvisited = -2;

// Uniform grid with cell size eps; a radius query touches the 3x3 block of cells.
class CellIndex {
 public:
  CellIndex(const std::vector<Eigen::Vector2d>& pts, double eps) : pts_(pts), eps_(eps) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(cell_of(pts[i].x()), cell_of(pts[i].y()))].push_back(i);
  }

  // Neighbors within eps (inclusive), in ascending index order.
  void query(std::size_t i, std::vector<std::size_t>& out) const {
    out.clear();
    const auto cx = cell_of(pts_[i].x()), cy = cell_of(pts_[i].y());
    const double eps2 = eps_ * eps_;
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (std::size_t j : it->second)
          if ((pts_[j] - pts_[i]).squaredNorm() <= eps2) out.push_back(j);
      }
    std::sort(out.begin(), out.end());
  }

 private:
  std::int64_t cell_of(double v) const { return static_cast<std::int64_t>(std::floor(v / eps_)); }
  static std::uint64_t key(std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x) << 32) ^ (static_cast<std::uint64_t>(y) & 0xffffffffu);
  }

  const std::vector<Eigen::Vector2d>& pts_;
  double eps_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

std::vector<int> dbscan(const std::vector<Eigen::Vector2d>& points, double eps, int min_pts) {
  if (!(eps > 0.0) || min_pts < 1) throw ContractViolation("dbscan: eps must be > 0 and min_pts >= 1");
  const CellIndex index(points, eps);
  std::vector<int> label(points.size(), kUnvisited);
  std::vector<std::size_t> nb;
  int cluster = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (label[i] != kUnvisited) continue;
    index.query(i, nb);
    if (nb.size() < static_cast<std::size_t>(min_pts)) {
      label[i] = kDbscanNoise;
      continue;
    }
    label[i] = cluster;
    std::deque<std::size_t> seeds(nb.begin(), nb.end());
    while (!seeds.empty()) {
      const std::size_t j = seeds.front();
      seeds.pop_front();
      if (label[j] == kDbscanNoise) label[j] = cluster;  // border point
      if (label[j] != kUnvisited) continue;
      label[j] = cluster;
      index.query(j, nb);
      if (nb.size() >= static_cast<std::size_t>(min_pts)) seeds.insert(seeds.end(), nb.begin(), nb.end());
    }
    ++cluster;
  }
  return label;
}

MaskBuffer cluster_dbscan(const MaskBuffer& mask, double eps, int min_pts) {
  std::vector<Eigen::Vector2d> pts;
  std::vector<std::size_t> where;
  const int w = mask.width();
  for (std::size_t i = 0; i < mask.grid.data.size(); ++i)
    if (mask.grid.data[i] != 0.0f) {
      pts.emplace_back(static_cast<double>(i % w), static_cast<double>(i / w));
      where.push_back(i);
    }
  MaskBuffer out = mask;
  if (pts.empty()) return out;
  const auto labels = dbscan(pts, eps, min_pts);
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (labels[k] == kDbscanNoise) out.grid.data[where[k]] = 0.0f;
  return out;
}

}  // namespace gsedit
