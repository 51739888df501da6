#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"

namespace multipath {

inline constexpr double kSimplexTolerance = 1e-9;

/// A probability vector: non-negative entries summing to one (within
/// kSimplexTolerance). Construction validates; the stored values are kept
/// exactly as given.
class SimplexVector {
 public:
  SimplexVector() = default;

  explicit SimplexVector(std::vector<double> weights) : weights_(std::move(weights)) {
    require(!weights_.empty(), "simplex vector must have dimension >= 1");
    double total = 0.0;
    for (double w : weights_) {
      require(std::isfinite(w) && w >= 0.0, "simplex vector entries must be finite and >= 0");
      total += w;
    }
    require(std::abs(total - 1.0) <= kSimplexTolerance,
            "simplex vector entries must sum to 1 (got " + std::to_string(total) + ")");
  }

  /// Divides non-negative weights by their sum.
  static SimplexVector normalized(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
      require(std::isfinite(w) && w >= 0.0, "weights must be finite and >= 0");
      total += w;
    }
    require(total > 0.0, "cannot normalize an all-zero weight vector");
    for (double& w : weights) w /= total;
    return SimplexVector(std::move(weights));
  }

  static SimplexVector uniform(std::size_t k) {
    require(k >= 1, "simplex vector must have dimension >= 1");
    return SimplexVector(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> values() const { return weights_; }
  const std::vector<double>& vec() const { return weights_; }

  friend bool operator==(const SimplexVector&, const SimplexVector&) = default;

 private:
  std::vector<double> weights_;
};

/// Dirichlet draw via per-coordinate log-Gamma variates, normalized in log
/// space so that concentrations down to ~1e-3 still give a valid simplex.
inline SimplexVector sample_dirichlet(std::span<const double> concentration, RngStream& rng) {
  require(!concentration.empty(), "dirichlet: dimension must be >= 1");
  for (double a : concentration) {
    require(std::isfinite(a) && a > 0.0, "dirichlet: concentrations must be finite and > 0");
  }
  if (concentration.size() == 1) return SimplexVector({1.0});

  std::vector<double> logs(concentration.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logs.size(); ++i) {
    logs[i] = rng.log_gamma_variate(concentration[i]);
    top = std::max(top, logs[i]);
  }
  double total = 0.0;
  for (double& v : logs) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : logs) v /= total;
  return SimplexVector(std::move(logs));
}

/// Index t with probability weights[t] / sum(weights). One uniform draw,
/// inverted against the prefix sums in index order.
inline std::size_t sample_categorical(std::span<const double> weights, RngStream& rng) {
  require(!weights.empty(), "categorical: empty weight vector");
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, "categorical: weights must be finite and >= 0");
    total += w;
  }
  require(total > 0.0, "categorical: all weights are zero");

  const double target = rng.uniform() * total;
  double prefix = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    prefix += weights[i];
    last_positive = i;
    if (target < prefix) return i;
  }
  return last_positive;
}

namespace detail {

// Site draw inside a sampler sweep; an empty conditional is reported as such.
inline std::uint32_t draw_site(std::span<const double> weights, RngStream& rng, const char* what) {
  try {
    return static_cast<std::uint32_t>(sample_categorical(weights, rng));
  } catch (const InvalidArgument&) {
    throw DegenerateConditional(std::string(what) + ": every candidate has zero weight");
  }
}

}  // namespace detail

inline double log_sum_exp(std::span<const double> values) {
  require(!values.empty(), "log_sum_exp: empty input");
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    require(!std::isnan(v) && v != std::numeric_limits<double>::infinity(),
            "log_sum_exp: NaN or +inf input");
    top = std::max(top, v);
  }
  if (top == -std::numeric_limits<double>::infinity()) return top;
  if (values.size() == 1) return values[0];
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

/// Shannon entropy in nats, 0 ln 0 = 0.
inline double entropy(const SimplexVector& dist) {
  double h = 0.0;
  for (double p : dist.values()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

/// log Gamma for positive arguments (reentrant where the libc offers it).
inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

/// log of the Dirichlet-multinomial marginal of an ordered count vector under a
/// symmetric Dir(conc) prior:
///   lgamma(K conc) - lgamma(K conc + n) + sum_k [lgamma(conc + n_k) - lgamma(conc)]
inline double log_dirichlet_multinomial(std::span<const Count> counts, double conc) {
  const double k = static_cast<double>(counts.size());
  double n = 0.0;
  double acc = 0.0;
  const double lg_conc = log_gamma(conc);
  for (Count c : counts) {
    n += c;
    if (c != 0) acc += log_gamma(conc + c) - lg_conc;
  }
  return acc + log_gamma(k * conc) - log_gamma(k * conc + n);
}

/// Posterior mean of a symmetric Dirichlet given counts: (n_k + conc) / (n + K conc).
inline SimplexVector dirichlet_posterior_mean(std::span<const Count> counts, double conc) {
  std::vector<double> out(counts.size());
  double total = 0.0;
  for (Count c : counts) total += c;
  const double denom = total + conc * static_cast<double>(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) out[k] = (counts[k] + conc) / denom;
  return SimplexVector(std::move(out));
}

}  // namespace multipath
