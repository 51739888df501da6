#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "prob.hpp"
#include "rng.hpp"

namespace multipath {

/// Discrete-emission HMM parameters: initial distribution, one transition row
/// per state and one emission row per state. Rows are validated simplices.
class HmmParams {
 public:
  HmmParams() = default;

  HmmParams(SimplexVector initial, const std::vector<SimplexVector>& transitions,
            const std::vector<SimplexVector>& emissions)
      : initial_(std::move(initial)) {
    const std::size_t s = initial_.size();
    require(s >= 1, "hmm: need at least one state");
    require(transitions.size() == s, "hmm: need one transition row per state");
    require(emissions.size() == s, "hmm: need one emission row per state");
    const std::size_t w = emissions.front().size();
    require(w >= 1, "hmm: alphabet must be non-empty");
    transitions_ = Matrix<double>(s, s);
    emissions_ = Matrix<double>(s, w);
    for (std::size_t j = 0; j < s; ++j) {
      require(transitions[j].size() == s, "hmm: transition row " + std::to_string(j) + " has wrong size");
      require(emissions[j].size() == w, "hmm: emission row " + std::to_string(j) + " has wrong size");
      std::copy(transitions[j].values().begin(), transitions[j].values().end(), transitions_.row(j).begin());
      std::copy(emissions[j].values().begin(), emissions[j].values().end(), emissions_.row(j).begin());
    }
  }

  /// Builds from row-major matrices, validating every row.
  static HmmParams from_matrices(std::vector<double> initial, const Matrix<double>& transitions,
                                 const Matrix<double>& emissions) {
    std::vector<SimplexVector> tr, em;
    for (std::size_t j = 0; j < transitions.rows(); ++j) {
      tr.emplace_back(std::vector<double>(transitions.row(j).begin(), transitions.row(j).end()));
    }
    for (std::size_t j = 0; j < emissions.rows(); ++j) {
      em.emplace_back(std::vector<double>(emissions.row(j).begin(), emissions.row(j).end()));
    }
    return HmmParams(SimplexVector(std::move(initial)), tr, em);
  }

  std::size_t states() const { return initial_.size(); }
  std::size_t symbols() const { return emissions_.cols(); }

  const SimplexVector& initial() const { return initial_; }
  double initial(std::size_t s) const { return initial_[s]; }
  double transition(std::size_t from, std::size_t to) const { return transitions_(from, to); }
  double emission(std::size_t s, std::size_t w) const { return emissions_(s, w); }
  const Matrix<double>& transitions() const { return transitions_; }
  const Matrix<double>& emissions() const { return emissions_; }

  friend bool operator==(const HmmParams&, const HmmParams&) = default;

 private:
  SimplexVector initial_;
  Matrix<double> transitions_;
  Matrix<double> emissions_;
};

/// Observed symbols w_1..w_N over an alphabet of size W.
class ObservationSequence {
 public:
  ObservationSequence() = default;
  ObservationSequence(std::vector<Symbol> symbols, std::size_t alphabet)
      : symbols_(std::move(symbols)), alphabet_(alphabet) {
    require(alphabet_ >= 1, "observations: alphabet must be non-empty");
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      require(symbols_[i] < alphabet_, "observations: symbol at index " + std::to_string(i) +
                                           " is out of range [0, " + std::to_string(alphabet_) + ")");
    }
  }

  std::size_t size() const { return symbols_.size(); }
  std::size_t alphabet() const { return alphabet_; }
  Symbol operator[](std::size_t i) const { return symbols_[i]; }
  const std::vector<Symbol>& symbols() const { return symbols_; }

  friend bool operator==(const ObservationSequence&, const ObservationSequence&) = default;

 private:
  std::vector<Symbol> symbols_;
  std::size_t alphabet_ = 0;
};

using StateSequence = std::vector<State>;

struct HmmPathSet {
  std::vector<StateSequence> paths;

  std::size_t size() const { return paths.size(); }
  friend bool operator==(const HmmPathSet&, const HmmPathSet&) = default;
};

struct HmmPriors {
  double init = 1.0;
  double trans = 1.0;
  double emit = 1.0;

  void validate() const {
    require(std::isfinite(init) && init > 0, "hmm priors: init concentration must be > 0");
    require(std::isfinite(trans) && trans > 0, "hmm priors: trans concentration must be > 0");
    require(std::isfinite(emit) && emit > 0, "hmm priors: emit concentration must be > 0");
  }
};

/// Sufficient statistics summed over all paths, plus row totals that the
/// collapsed conditional needs on every site.
struct HmmCounts {
  std::vector<Count> init;
  Matrix<Count> trans;
  std::vector<Count> trans_total;  // row sums of trans
  Matrix<Count> emit;
  std::vector<Count> emit_total;  // row sums of emit

  HmmCounts() = default;
  HmmCounts(std::size_t states, std::size_t symbols)
      : init(states, 0),
        trans(states, states, 0),
        trans_total(states, 0),
        emit(states, symbols, 0),
        emit_total(states, 0) {}

  std::size_t states() const { return init.size(); }
  std::size_t symbols() const { return emit.cols(); }

  void add_path(const StateSequence& path, const ObservationSequence& w, Count delta) {
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (i == 0) {
        init[path[0]] += delta;
      } else {
        trans(path[i - 1], path[i]) += delta;
        trans_total[path[i - 1]] += delta;
      }
      emit(path[i], w[i]) += delta;
      emit_total[path[i]] += delta;
    }
  }

  static HmmCounts from_paths(const HmmPathSet& ps, const ObservationSequence& w, std::size_t states) {
    HmmCounts c(states, w.alphabet());
    for (const auto& p : ps.paths) {
      require(p.size() == w.size(), "hmm counts: path length differs from observation length");
      for (State s : p) require(s < states, "hmm counts: state out of range");
      c.add_path(p, w, 1);
    }
    return c;
  }

  friend bool operator==(const HmmCounts&, const HmmCounts&) = default;
};

// ---------------------------------------------------------------------------
// Generative model and likelihoods
// ---------------------------------------------------------------------------

inline std::pair<StateSequence, ObservationSequence> hmm_generate(const HmmParams& params, std::size_t n,
                                                                   RngStream& rng) {
  require(n >= 1, "hmm_generate: length must be >= 1");
  StateSequence states(n);
  std::vector<Symbol> symbols(n);
  states[0] = static_cast<State>(sample_categorical(params.initial().values(), rng));
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      states[i] = static_cast<State>(sample_categorical(params.transitions().row(states[i - 1]), rng));
    }
    symbols[i] = static_cast<Symbol>(sample_categorical(params.emissions().row(states[i]), rng));
  }
  return {std::move(states), ObservationSequence(std::move(symbols), params.symbols())};
}

inline void check_compatible(const HmmParams& params, const ObservationSequence& w) {
  require(w.alphabet() <= params.symbols(),
          "hmm: observation alphabet (" + std::to_string(w.alphabet()) + ") exceeds emission width (" +
              std::to_string(params.symbols()) + ")");
}

/// ln P(w, p | phi).
inline double path_log_likelihood(const HmmParams& params, const StateSequence& path,
                                  const ObservationSequence& w) {
  require(path.size() == w.size(), "path_log_likelihood: path and observations differ in length");
  check_compatible(params, w);
  double ll = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    require(path[i] < params.states(), "path_log_likelihood: state out of range at " + std::to_string(i));
    ll += std::log(i == 0 ? params.initial(path[0]) : params.transition(path[i - 1], path[i]));
    ll += std::log(params.emission(path[i], w[i]));
  }
  return ll;
}

/// ln P(w | phi) by the scaled forward recursion (sum of log scale factors).
inline double forward_log_likelihood(const HmmParams& params, const ObservationSequence& w) {
  check_compatible(params, w);
  const std::size_t s = params.states();
  if (w.size() == 0) return 0.0;
  std::vector<double> alpha(s), next(s);
  double ll = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double scale = 0.0;
    for (std::size_t t = 0; t < s; ++t) {
      double in;
      if (i == 0) {
        in = params.initial(t);
      } else {
        in = 0.0;
        for (std::size_t r = 0; r < s; ++r) in += alpha[r] * params.transition(r, t);
      }
      next[t] = in * params.emission(t, w[i]);
      scale += next[t];
    }
    if (scale <= 0.0) return -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < s; ++t) alpha[t] = next[t] / scale;
    ll += std::log(scale);
  }
  return ll;
}

// ---------------------------------------------------------------------------
// Baum-Welch
// ---------------------------------------------------------------------------

struct BaumWelchResult {
  HmmParams params;
  std::vector<double> trace;  // trace[k] = log-likelihood after k updates
};

namespace detail {

struct BaumWelchStats {
  std::vector<double> init;
  Matrix<double> trans;
  Matrix<double> emit;
};

// E-step: returns ln P(w | params) and fills expected counts.
inline double baum_welch_estep(const HmmParams& params, const ObservationSequence& w, BaumWelchStats& stats) {
  const std::size_t s = params.states();
  const std::size_t n = w.size();
  Matrix<double> fwd(n, s), bwd(n, s);
  std::vector<double> scale(n);
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double c = 0.0;
    for (std::size_t t = 0; t < s; ++t) {
      double in = 0.0;
      if (i == 0) {
        in = params.initial(t);
      } else {
        for (std::size_t r = 0; r < s; ++r) in += fwd(i - 1, r) * params.transition(r, t);
      }
      fwd(i, t) = in * params.emission(t, w[i]);
      c += fwd(i, t);
    }
    if (c <= 0.0) return -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < s; ++t) fwd(i, t) /= c;
    scale[i] = c;
    ll += std::log(c);
  }
  for (std::size_t t = 0; t < s; ++t) bwd(n - 1, t) = 1.0;
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t r = 0; r < s; ++r) {
      double acc = 0.0;
      for (std::size_t t = 0; t < s; ++t) {
        acc += params.transition(r, t) * params.emission(t, w[i + 1]) * bwd(i + 1, t);
      }
      bwd(i, r) = acc / scale[i + 1];
    }
  }

  stats.init.assign(s, 0.0);
  stats.trans = Matrix<double>(s, s, 0.0);
  stats.emit = Matrix<double>(s, params.symbols(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < s; ++t) {
      const double gamma = fwd(i, t) * bwd(i, t);
      if (i == 0) stats.init[t] += gamma;
      stats.emit(t, w[i]) += gamma;
    }
    if (i + 1 < n) {
      for (std::size_t r = 0; r < s; ++r) {
        for (std::size_t t = 0; t < s; ++t) {
          stats.trans(r, t) += fwd(i, r) * params.transition(r, t) * params.emission(t, w[i + 1]) *
                               bwd(i + 1, t) / scale[i + 1];
        }
      }
    }
  }
  return ll;
}

// M-step: maximum-likelihood ratios. A row with no expected mass keeps its
// previous value.
inline HmmParams baum_welch_mstep(const BaumWelchStats& stats, const HmmParams& prev) {
  const std::size_t s = prev.states();
  auto normalize_or_keep = [](std::span<const double> row, std::span<const double> fallback) {
    double total = 0.0;
    for (double v : row) total += v;
    if (!(total > 0.0)) return SimplexVector(std::vector<double>(fallback.begin(), fallback.end()));
    std::vector<double> out(row.begin(), row.end());
    for (double& v : out) v /= total;
    return SimplexVector(std::move(out));
  };
  SimplexVector init = normalize_or_keep(stats.init, prev.initial().values());
  std::vector<SimplexVector> tr, em;
  for (std::size_t r = 0; r < s; ++r) {
    tr.push_back(normalize_or_keep(stats.trans.row(r), prev.transitions().row(r)));
    em.push_back(normalize_or_keep(stats.emit.row(r), prev.emissions().row(r)));
  }
  return HmmParams(std::move(init), tr, em);
}

}  // namespace detail

/// Expectation-maximization from `init`. Stops after max_iters updates or when
/// one update improves the log-likelihood by less than tol.
inline BaumWelchResult baum_welch(const ObservationSequence& w, std::size_t states, std::size_t alphabet,
                                  const HmmParams& init, std::size_t max_iters, double tol) {
  require(init.states() == states, "baum_welch: init has wrong number of states");
  require(init.symbols() == alphabet, "baum_welch: init has wrong alphabet size");
  require(w.alphabet() <= alphabet, "baum_welch: observations exceed the alphabet");
  require(w.size() >= 1, "baum_welch: empty observation sequence");
  require(max_iters >= 1, "baum_welch: max_iters must be >= 1");

  BaumWelchResult result{init, {}};
  detail::BaumWelchStats stats;
  double ll = detail::baum_welch_estep(result.params, w, stats);
  require(std::isfinite(ll), "baum_welch: degenerate init assigns zero probability to the data");
  result.trace.push_back(ll);
  for (std::size_t it = 0; it < max_iters; ++it) {
    result.params = detail::baum_welch_mstep(stats, result.params);
    const double next = detail::baum_welch_estep(result.params, w, stats);
    result.trace.push_back(next);
    if (next - ll < tol) break;
    ll = next;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Conditionals used by the samplers
// ---------------------------------------------------------------------------

/// phi | paths: every row is Dir(prior + count row).
inline HmmParams hmm_sample_params(const HmmCounts& counts, const HmmPriors& priors, RngStream& rng) {
  priors.validate();
  const std::size_t s = counts.states();
  const std::size_t w = counts.symbols();
  std::vector<double> conc(s);
  for (std::size_t t = 0; t < s; ++t) conc[t] = priors.init + counts.init[t];
  SimplexVector init = sample_dirichlet(conc, rng);
  std::vector<SimplexVector> tr, em;
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t t = 0; t < s; ++t) conc[t] = priors.trans + counts.trans(r, t);
    tr.push_back(sample_dirichlet(conc, rng));
  }
  std::vector<double> econc(w);
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t k = 0; k < w; ++k) econc[k] = priors.emit + counts.emit(r, k);
    em.push_back(sample_dirichlet(econc, rng));
  }
  return HmmParams(std::move(init), tr, em);
}

/// Posterior-mean parameters given counts.
inline HmmParams hmm_posterior_mean(const HmmCounts& counts, const HmmPriors& priors) {
  std::vector<SimplexVector> tr, em;
  for (std::size_t r = 0; r < counts.states(); ++r) {
    tr.push_back(dirichlet_posterior_mean(counts.trans.row(r), priors.trans));
    em.push_back(dirichlet_posterior_mean(counts.emit.row(r), priors.emit));
  }
  return HmmParams(dirichlet_posterior_mean(counts.init, priors.init), tr, em);
}

namespace detail {

// Unnormalized p(p_i = t | p_{-i}, w, phi). prev/next are -1 at the ends.
inline void hmm_pc_weights(const HmmParams& params, long prev, long next, Symbol w, std::span<double> out) {
  const std::size_t s = params.states();
  for (std::size_t t = 0; t < s; ++t) {
    double v = prev < 0 ? params.initial(t) : params.transition(static_cast<std::size_t>(prev), t);
    if (next >= 0) v *= params.transition(t, static_cast<std::size_t>(next));
    out[t] = v * params.emission(t, w);
  }
}

// Unnormalized collapsed conditional. `counts` must already exclude the site:
// its incoming transition (or initial count), outgoing transition and emission.
inline void hmm_collapsed_weights(const HmmCounts& counts, const HmmPriors& pr, long prev, long next, Symbol w,
                                  std::span<double> out) {
  const std::size_t s = counts.states();
  const double ds = static_cast<double>(s);
  const double dw = static_cast<double>(counts.symbols());
  for (std::size_t t = 0; t < s; ++t) {
    double in;
    if (prev < 0) {
      in = counts.init[t] + pr.init;
    } else {
      const auto a = static_cast<std::size_t>(prev);
      in = (counts.trans(a, t) + pr.trans) / (counts.trans_total[a] + ds * pr.trans);
    }
    double out_f = 1.0;
    if (next >= 0) {
      const auto b = static_cast<std::size_t>(next);
      // The incoming transition prev -> t lands in row t before the outgoing one is scored.
      const int self_in = (prev >= 0 && static_cast<std::size_t>(prev) == t) ? 1 : 0;
      const int repeat = (self_in && b == t) ? 1 : 0;
      out_f = (counts.trans(t, b) + pr.trans + repeat) / (counts.trans_total[t] + ds * pr.trans + self_in);
    }
    const double em = (counts.emit(t, w) + pr.emit) / (counts.emit_total[t] + dw * pr.emit);
    out[t] = in * out_f * em;
  }
}

inline void hmm_site_adjust(HmmCounts& counts, const StateSequence& path, std::size_t i, Symbol w, Count delta) {
  const State z = path[i];
  if (i == 0) {
    counts.init[z] += delta;
  } else {
    counts.trans(path[i - 1], z) += delta;
    counts.trans_total[path[i - 1]] += delta;
  }
  if (i + 1 < path.size()) {
    counts.trans(z, path[i + 1]) += delta;
    counts.trans_total[z] += delta;
  }
  counts.emit(z, w) += delta;
  counts.emit_total[z] += delta;
}

inline SimplexVector normalize_or_degenerate(std::vector<double> weights, const char* what) {
  double total = 0.0;
  for (double v : weights) total += v;
  if (!(total > 0.0)) throw DegenerateConditional(std::string(what) + ": every candidate has zero weight");
  for (double& v : weights) v /= total;
  return SimplexVector(std::move(weights));
}

}  // namespace detail

/// p(p_i | p_{-i}, w, phi) for one path with phi fixed.
inline SimplexVector hmm_pc_site_dist(const HmmParams& params, const StateSequence& path, std::size_t i,
                                      const ObservationSequence& w) {
  require(path.size() == w.size(), "hmm_pc_site_dist: path and observations differ in length");
  require(i < path.size(), "hmm_pc_site_dist: position out of range");
  check_compatible(params, w);
  const long prev = i == 0 ? -1 : static_cast<long>(path[i - 1]);
  const long next = i + 1 < path.size() ? static_cast<long>(path[i + 1]) : -1;
  std::vector<double> weights(params.states());
  detail::hmm_pc_weights(params, prev, next, w[i], weights);
  return detail::normalize_or_degenerate(std::move(weights), "hmm_pc_site_dist");
}

/// Collapsed conditional p(p^j_i | all other sites of all paths, w) with phi
/// integrated out. `counts` are the full counts of `pathset`; the site's own
/// contributions are removed internally.
inline SimplexVector hmm_collapsed_site_dist(const HmmCounts& counts, const HmmPathSet& pathset, std::size_t j,
                                             std::size_t i, const ObservationSequence& w, const HmmPriors& priors) {
  require(j < pathset.size(), "hmm_collapsed_site_dist: path index out of range");
  const StateSequence& path = pathset.paths[j];
  require(path.size() == w.size(), "hmm_collapsed_site_dist: path and observations differ in length");
  require(i < path.size(), "hmm_collapsed_site_dist: position out of range");
  require(counts.symbols() >= w.alphabet(), "hmm_collapsed_site_dist: alphabet mismatch");

  Count init_total = 0, emit_total = 0;
  for (Count c : counts.init) init_total += c;
  for (Count c : counts.emit_total) emit_total += c;
  const auto m = static_cast<Count>(pathset.size());
  const auto n = static_cast<Count>(w.size());
  if (init_total != m || emit_total != m * n) {
    throw ConsistencyError("hmm_collapsed_site_dist: counts do not match the path set totals");
  }

  HmmCounts minus = counts;
  detail::hmm_site_adjust(minus, path, i, w[i], -1);
  for (Count c : minus.init)
    if (c < 0) throw ConsistencyError("hmm_collapsed_site_dist: negative initial count after removal");
  for (Count c : minus.trans.data())
    if (c < 0) throw ConsistencyError("hmm_collapsed_site_dist: negative transition count after removal");
  for (Count c : minus.emit.data())
    if (c < 0) throw ConsistencyError("hmm_collapsed_site_dist: negative emission count after removal");

  const long prev = i == 0 ? -1 : static_cast<long>(path[i - 1]);
  const long next = i + 1 < path.size() ? static_cast<long>(path[i + 1]) : -1;
  std::vector<double> weights(counts.states());
  detail::hmm_collapsed_weights(minus, priors, prev, next, w[i], weights);
  return detail::normalize_or_degenerate(std::move(weights), "hmm_collapsed_site_dist");
}

/// log of the integral of P(phi) prod_j P(p^j, w | phi) over phi: a sum of
/// Dirichlet-multinomial terms over the initial row, each transition row and
/// each emission row, using counts pooled across paths.
inline double hmm_log_joint_collapsed(const HmmPathSet& pathset, const ObservationSequence& w, std::size_t states,
                                      const HmmPriors& priors) {
  priors.validate();
  const HmmCounts c = HmmCounts::from_paths(pathset, w, states);
  double lj = log_dirichlet_multinomial(c.init, priors.init);
  for (std::size_t r = 0; r < states; ++r) {
    lj += log_dirichlet_multinomial(c.trans.row(r), priors.trans);
    lj += log_dirichlet_multinomial(c.emit.row(r), priors.emit);
  }
  return lj;
}

}  // namespace multipath
