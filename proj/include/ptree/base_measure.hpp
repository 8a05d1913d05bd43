#pragma once

#include <cmath>
#include <vector>

#include "ptree/dataset.hpp"
#include "ptree/errors.hpp"
#include "ptree/numeric.hpp"

namespace ptree {

// Base measure H: a product probability measure on the sample space, either
// uniform or with independent beta-shaped marginals. It centers the prior
// (the prior mean of F is H) and all predictive densities are reported as
// ratios against its density h.
struct Marginal {
  enum class Kind { Uniform, Beta };
  Kind kind = Kind::Uniform;
  double a = 1.0, b = 1.0;  // beta shapes when kind == Beta

  // cdf / log-pdf on the unit interval
  double cdf01(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return kind == Kind::Uniform ? u : inc_beta(a, b, u);
  }
  double logpdf01(double u) const {
    if (kind == Kind::Uniform) return 0.0;
    if (u <= 0.0 || u >= 1.0) return kNegInf;
    return (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) - log_beta(a, b);
  }
};

struct BaseMeasure {
  Region bounds;
  std::vector<Marginal> marginals;  // size d

  static BaseMeasure uniform(Region bounds) {
    BaseMeasure h;
    h.marginals.assign(bounds.dim(), Marginal{});
    h.bounds = std::move(bounds);
    return h;
  }

  std::size_t dim() const { return marginals.size(); }

  double to_unit(std::size_t j, double x) const {
    return (x - bounds.lower[j]) / (bounds.upper[j] - bounds.lower[j]);
  }

  double cdf(std::size_t j, double x) const { return marginals[j].cdf01(to_unit(j, x)); }

  // log h(x): product of marginal densities on the original scale.
  double log_density(const double* x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < marginals.size(); ++j) {
      double w = bounds.upper[j] - bounds.lower[j];
      s += marginals[j].logpdf01(to_unit(j, x[j])) - std::log(w);
    }
    return s;
  }

  double density(const double* x) const { return std::exp(log_density(x)); }

  // H(A_l | A) for the cut of [lo,hi] at `cut` on dimension j. The right
  // mass is 1 minus this, so the pair always sums to one.
  double conditional_left(std::size_t j, double lo, double hi, double cut) const {
    double clo = cdf(j, lo), chi = cdf(j, hi);
    double denom = chi - clo;
    if (denom <= 0.0) throw zero_mass("base measure assigns zero mass to region on dim " + std::to_string(j));
    double m = (cdf(j, cut) - clo) / denom;
    return std::min(std::max(m, 0.0), 1.0);
  }
};

}  // namespace ptree
