#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ptree/errors.hpp"
#include "ptree/numeric.hpp"
#include "ptree/rng.hpp"

// Reference densities for the simulation studies: exact pdf evaluation and
// exact seeded sampling for every registered scenario, on [0,1] or [0,1]^2.

namespace ptree {

struct ScenarioDensity {
  std::string name;
  std::size_t dim = 1;
  std::function<double(const double*)> pdf;
  std::function<void(Rng&, double*)> sample;
};

inline double beta_logpdf(double a, double b, double x) {
  if (x <= 0.0 || x >= 1.0) return kNegInf;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b);
}

// N(mu, sigma^2) truncated to [lo, hi]; the normalizing constant comes from
// the error function.
struct TruncatedNormal {
  double mu, sigma, lo, hi;

  double norm() const { return normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma); }

  double pdf(double x) const {
    if (x < lo || x > hi) return 0.0;
    double z = (x - mu) / sigma;
    return std::exp(normal_logpdf(z)) / (sigma * norm());
  }

  double draw(Rng& rng) const { return rng.truncated_normal(mu, sigma, lo, hi); }
};

// Generalized beta on (0,1)^2: the joint law of X = G1/(G1+G0) and
// Y = G2/(G2+G0) for independent gammas G_i ~ Gamma(alpha_i, rate beta_i).
struct GeneralizedBetaParams {
  double a0, b0, a1, b1, a2, b2;
};

inline double eval_generalized_beta(const GeneralizedBetaParams& p, double x, double y) {
  if (!(p.a0 > 0 && p.b0 > 0 && p.a1 > 0 && p.b1 > 0 && p.a2 > 0 && p.b2 > 0))
    throw invalid_prior("generalized beta: parameters must be positive");
  if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0))
    throw domain_error("generalized beta: point on boundary of (0,1)^2");
  double l1 = p.b1 / p.b0, l2 = p.b2 / p.b0;
  double asum = p.a0 + p.a1 + p.a2;
  double log_b3 = std::lgamma(p.a0) + std::lgamma(p.a1) + std::lgamma(p.a2) - std::lgamma(asum);
  double logf = p.a1 * std::log(l1) + (p.a1 - 1.0) * std::log(x) - (p.a1 + 1.0) * std::log1p(-x) +
                p.a2 * std::log(l2) + (p.a2 - 1.0) * std::log(y) - (p.a2 + 1.0) * std::log1p(-y) -
                asum * std::log1p(l1 * x / (1.0 - x) + l2 * y / (1.0 - y)) - log_b3;
  return std::exp(logf);
}

inline void sample_generalized_beta_one(const GeneralizedBetaParams& p, Rng& rng, double* out) {
  double g0 = rng.gamma(p.a0, 1.0 / p.b0);
  double g1 = rng.gamma(p.a1, 1.0 / p.b1);
  double g2 = rng.gamma(p.a2, 1.0 / p.b2);
  out[0] = g1 / (g1 + g0);
  out[1] = g2 / (g2 + g0);
}

// n x 2 matrix of draws, deterministic under the seed.
inline std::vector<double> sample_generalized_beta(const GeneralizedBetaParams& p, std::size_t n,
                                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(2 * n);
  for (std::size_t i = 0; i < n; ++i) sample_generalized_beta_one(p, rng, out.data() + 2 * i);
  return out;
}

namespace detail {

struct MixComponent1D {
  enum class Kind { Uniform, Beta, TruncNormal } kind;
  double weight;
  double a = 1.0, b = 1.0;  // beta shapes
  TruncatedNormal tn{0.5, 0.1, 0.0, 1.0};
};

inline ScenarioDensity beta_scenario(std::string name, double a, double b) {
  ScenarioDensity s;
  s.name = std::move(name);
  s.dim = 1;
  s.pdf = [a, b](const double* x) { return std::exp(beta_logpdf(a, b, x[0])); };
  s.sample = [a, b](Rng& rng, double* out) { out[0] = rng.beta(a, b); };
  return s;
}

inline ScenarioDensity mixture1d_scenario(std::string name, std::vector<MixComponent1D> comps) {
  ScenarioDensity s;
  s.name = std::move(name);
  s.dim = 1;
  s.pdf = [comps](const double* x) {
    double f = 0.0;
    for (const auto& c : comps) {
      switch (c.kind) {
        case MixComponent1D::Kind::Uniform: f += c.weight; break;
        case MixComponent1D::Kind::Beta: f += c.weight * std::exp(beta_logpdf(c.a, c.b, x[0])); break;
        case MixComponent1D::Kind::TruncNormal: f += c.weight * c.tn.pdf(x[0]); break;
      }
    }
    return f;
  };
  s.sample = [comps](Rng& rng, double* out) {
    double u = rng.uniform(), acc = 0.0;
    const MixComponent1D* pick = &comps.back();
    for (const auto& c : comps) {
      acc += c.weight;
      if (u <= acc) { pick = &c; break; }
    }
    switch (pick->kind) {
      case MixComponent1D::Kind::Uniform: out[0] = rng.uniform(); break;
      case MixComponent1D::Kind::Beta: out[0] = rng.beta(pick->a, pick->b); break;
      case MixComponent1D::Kind::TruncNormal: out[0] = pick->tn.draw(rng); break;
    }
  };
  return s;
}

inline ScenarioDensity gbeta_scenario(std::string name, GeneralizedBetaParams p) {
  ScenarioDensity s;
  s.name = std::move(name);
  s.dim = 2;
  s.pdf = [p](const double* x) { return eval_generalized_beta(p, x[0], x[1]); };
  s.sample = [p](Rng& rng, double* out) { sample_generalized_beta_one(p, rng, out); };
  return s;
}

// 0.4 TN(mu_a, Sigma_a) + 0.4 TN(mu_b, Sigma_b) + 0.2 GBeta(p). The gamma
// component's weight is forced to 0.2 by normalization. Covariances are
// diagonal, so the joint truncation to the unit square factorizes per
// coordinate.
inline ScenarioDensity mixture2d_scenario(std::string name, GeneralizedBetaParams p) {
  TruncatedNormal ax{0.2, std::sqrt(0.01), 0.0, 1.0}, ay{0.5, std::sqrt(0.03), 0.0, 1.0};
  TruncatedNormal bx{0.4, std::sqrt(0.02), 0.0, 1.0}, by{0.3, std::sqrt(0.02), 0.0, 1.0};
  ScenarioDensity s;
  s.name = std::move(name);
  s.dim = 2;
  s.pdf = [=](const double* x) {
    return 0.4 * ax.pdf(x[0]) * ay.pdf(x[1]) + 0.4 * bx.pdf(x[0]) * by.pdf(x[1]) +
           0.2 * eval_generalized_beta(p, x[0], x[1]);
  };
  s.sample = [=](Rng& rng, double* out) {
    double u = rng.uniform();
    if (u <= 0.4) {
      out[0] = ax.draw(rng);
      out[1] = ay.draw(rng);
    } else if (u <= 0.8) {
      out[0] = bx.draw(rng);
      out[1] = by.draw(rng);
    } else {
      sample_generalized_beta_one(p, rng, out);
    }
  };
  return s;
}

}  // namespace detail

inline const std::vector<ScenarioDensity>& scenario_registry() {
  using C = detail::MixComponent1D;
  static const std::vector<ScenarioDensity> registry = [] {
    std::vector<ScenarioDensity> r;
    r.push_back(detail::beta_scenario("beta64", 6.0, 4.0));
    r.push_back(detail::beta_scenario("beta500_20", 500.0, 20.0));
    r.push_back(detail::mixture1d_scenario(
        "mix1d",
        {C{C::Kind::Uniform, 0.1}, C{C::Kind::Beta, 0.2, 2.0, 5.0},
         C{C::Kind::Beta, 0.2, 1200.0, 800.0},
         C{C::Kind::TruncNormal, 0.3, 0, 0, TruncatedNormal{0.5, 0.1, 0.1, 0.9}},
         C{C::Kind::TruncNormal, 0.2, 0, 0, TruncatedNormal{0.7, 0.05, 0.3, 0.87}}}));
    r.push_back(detail::gbeta_scenario("gbeta1", {50, 1, 100, 1, 150, 1}));
    r.push_back(detail::gbeta_scenario("gbeta2", {12, 1, 25, 1, 35, 1}));
    r.push_back(detail::gbeta_scenario("gbeta3", {3, 1, 6, 1, 9, 1}));
    r.push_back(detail::gbeta_scenario("gbeta4", {5, 10, 3, 10, 3, 10}));
    r.push_back(detail::mixture2d_scenario("mix1", {200, 1, 150, 1, 150, 1}));
    r.push_back(detail::mixture2d_scenario("mix2", {100, 1, 250, 1, 250, 1}));
    return r;
  }();
  return registry;
}

inline const ScenarioDensity& scenario(const std::string& name) {
  for (const ScenarioDensity& s : scenario_registry())
    if (s.name == name) return s;
  throw unknown_scenario(name);
}

// n x d sample matrix, deterministic under the seed.
inline std::vector<double> sample_scenario(const ScenarioDensity& s, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(n * s.dim);
  for (std::size_t i = 0; i < n; ++i) s.sample(rng, out.data() + i * s.dim);
  return out;
}

}  // namespace ptree
