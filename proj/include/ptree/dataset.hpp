#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ptree/errors.hpp"

namespace ptree {

// Axis-aligned rectangle; the sample space and every tree node live here.
struct Region {
  std::vector<double> lower, upper;

  std::size_t dim() const { return lower.size(); }

  static Region unit_cube(std::size_t d) {
    return Region{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  }

  bool valid() const {
    if (lower.size() != upper.size() || lower.empty()) return false;
    for (std::size_t j = 0; j < lower.size(); ++j)
      if (!(lower[j] < upper[j])) return false;
    return true;
  }

  bool contains(const double* x) const {
    for (std::size_t j = 0; j < lower.size(); ++j)
      if (x[j] < lower[j] || x[j] > upper[j]) return false;
    return true;
  }

  double volume() const {
    double v = 1.0;
    for (std::size_t j = 0; j < lower.size(); ++j) v *= upper[j] - lower[j];
    return v;
  }
};

// Observations stored row-major (n x d) together with the declared sample
// space. All points must lie inside bounds.
struct Dataset {
  std::size_t n = 0, d = 1;
  std::vector<double> points;  // n * d
  Region bounds;

  double at(std::size_t i, std::size_t j) const { return points[i * d + j]; }
  const double* row(std::size_t i) const { return points.data() + i * d; }

  static Dataset from_rows(std::vector<double> rows, std::size_t d, Region bounds) {
    Dataset ds;
    ds.d = d;
    ds.n = rows.size() / d;
    ds.points = std::move(rows);
    ds.bounds = std::move(bounds);
    ds.validate();
    return ds;
  }

  void validate() const {
    if (d < 1) throw config_error("Dataset: d must be >= 1");
    if (!bounds.valid() || bounds.dim() != d) throw empty_domain("Dataset bounds degenerate");
    for (std::size_t i = 0; i < n; ++i)
      if (!bounds.contains(row(i)))
        throw data_error("Dataset: observation " + std::to_string(i + 1) + " outside declared bounds");
  }
};

}  // namespace ptree
