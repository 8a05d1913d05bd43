#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "ptree/dataset.hpp"
#include "ptree/errors.hpp"

namespace ptree {

// Regular midpoint grid over a rectangle; the quadrature and risk grids.
// Cells are indexed row-major with dimension 0 slowest.
struct GridSpec {
  Region bounds;
  std::vector<int> resolution;

  static GridSpec regular(Region bounds, int per_dim) {
    GridSpec g;
    g.resolution.assign(bounds.dim(), per_dim);
    g.bounds = std::move(bounds);
    return g;
  }

  std::size_t dim() const { return resolution.size(); }

  std::size_t cells() const {
    std::size_t c = 1;
    for (int r : resolution) c *= static_cast<std::size_t>(r);
    return c;
  }

  double cell_width(std::size_t j) const {
    return (bounds.upper[j] - bounds.lower[j]) / resolution[j];
  }

  double cell_volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < dim(); ++j) v *= cell_width(j);
    return v;
  }

  double midpoint(std::size_t j, std::int64_t i) const {
    return bounds.lower[j] + (static_cast<double>(i) + 0.5) * cell_width(j);
  }

  void decode(std::size_t flat, std::int64_t* idx) const {
    for (std::size_t j = dim(); j-- > 0;) {
      idx[j] = static_cast<std::int64_t>(flat % static_cast<std::size_t>(resolution[j]));
      flat /= static_cast<std::size_t>(resolution[j]);
    }
  }

  void point(std::size_t flat, double* out) const {
    std::int64_t idx[8];
    decode(flat, idx);
    for (std::size_t j = 0; j < dim(); ++j) out[j] = midpoint(j, idx[j]);
  }

  // All midpoints as an m x d row-major matrix.
  std::vector<double> points() const {
    std::size_t m = cells(), d = dim();
    std::vector<double> pts(m * d);
    for (std::size_t i = 0; i < m; ++i) point(i, pts.data() + i * d);
    return pts;
  }
};

inline double grid_integral(const GridSpec& grid, const std::vector<double>& values) {
  if (values.size() != grid.cells()) throw grid_mismatch("grid_integral: size mismatch");
  double s = std::accumulate(values.begin(), values.end(), 0.0);
  return s * grid.cell_volume();
}

}  // namespace ptree
