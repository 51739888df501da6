#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "hmm.hpp"
#include "parallel.hpp"

namespace multipath {

struct HmmSamplerConfig {
  Variant variant = Variant::collapsed;
  std::size_t states = 2;
  std::size_t paths = 1;        // m
  std::size_t iterations = 1;   // full sweeps over every (path, site)
  std::size_t cadence = 100;    // trace every `cadence` sweeps
  std::uint64_t seed = 0;
  std::uint64_t run = 0;        // repetition index, part of every stream id
  HmmPriors priors;
  std::size_t path_threads = 1; // pc variant only
  // Stream index used for each path; empty means path j uses stream j.
  std::vector<std::uint64_t> path_streams;

  void validate() const {
    require(states >= 1, "hmm sampler: states must be >= 1");
    require(paths >= 1, "hmm sampler: paths (m) must be >= 1");
    require(iterations >= 1, "hmm sampler: iterations must be >= 1");
    require(cadence >= 1, "hmm sampler: cadence must be >= 1");
    require(path_streams.empty() || path_streams.size() == paths,
            "hmm sampler: path_streams must have one entry per path");
    priors.validate();
  }

  std::uint64_t stream_of(std::size_t j) const { return path_streams.empty() ? j : path_streams[j]; }
};

struct HmmRunResult {
  HmmParams params;                    // posterior mean given the final counts
  std::optional<HmmParams> last_draw;  // pc variant: the last sampled phi
  HmmPathSet paths;
  HmmCounts counts;
  std::vector<TracePoint> trace;       // forward log-likelihood of the posterior mean
};

// Called after every sweep with the 1-based sweep number.
using HmmSweepObserver = std::function<void(std::size_t, const HmmPathSet&, const HmmCounts&)>;

namespace detail {

inline HmmPathSet hmm_random_paths(const HmmSamplerConfig& cfg, std::size_t n) {
  HmmPathSet ps;
  ps.paths.resize(cfg.paths);
  for (std::size_t j = 0; j < cfg.paths; ++j) {
    RngStream rng(cfg.seed, {cfg.run, cfg.stream_of(j), Phase::init});
    ps.paths[j].resize(n);
    for (auto& s : ps.paths[j]) s = static_cast<State>(rng.below(cfg.states));
  }
  return ps;
}

inline void hmm_pc_sweep_path(const HmmParams& params, StateSequence& path, const ObservationSequence& w,
                              RngStream& rng, std::vector<double>& buf) {
  const std::size_t n = path.size();
  for (std::size_t i = 0; i < n; ++i) {
    const long prev = i == 0 ? -1 : static_cast<long>(path[i - 1]);
    const long next = i + 1 < n ? static_cast<long>(path[i + 1]) : -1;
    hmm_pc_weights(params, prev, next, w[i], buf);
    path[i] = draw_site(buf, rng, "hmm pc sweep");
  }
}

}  // namespace detail

/// Multipath Gibbs sampler for a discrete HMM.
///
/// Partially collapsed: each sweep draws phi from its conditional given the
/// pooled counts of all m paths, then resamples every site of every path given
/// phi. Paths are independent given phi, so with path_threads > 1 they are
/// swept concurrently; each path owns its random stream, so the result does
/// not depend on the thread count.
///
/// Collapsed: phi is integrated out and each site is resampled from the
/// count-based predictive with the pooled counts kept live across paths.
///
/// Stream protocol (seed, run, stream_of(j)): Phase::init for path j's random
/// start, Phase::sweep for path j's site draws, and a single (run, 0,
/// Phase::params) stream for the phi draws.
inline HmmRunResult run_hmm_sampler(const HmmSamplerConfig& cfg, const ObservationSequence& w,
                                    const HmmSweepObserver& observer = {}) {
  cfg.validate();
  require(w.size() >= 1, "hmm sampler: empty observation sequence");
  const std::size_t n = w.size();
  const std::size_t s = cfg.states;

  HmmRunResult out;
  out.paths = detail::hmm_random_paths(cfg, n);
  out.counts = HmmCounts::from_paths(out.paths, w, s);

  std::vector<RngStream> sweep_rngs;
  sweep_rngs.reserve(cfg.paths);
  for (std::size_t j = 0; j < cfg.paths; ++j) sweep_rngs.emplace_back(cfg.seed, StreamId{cfg.run, cfg.stream_of(j), Phase::sweep});
  RngStream param_rng(cfg.seed, {cfg.run, 0, Phase::params});

  auto record = [&](std::size_t it) {
    out.trace.push_back({it, forward_log_likelihood(hmm_posterior_mean(out.counts, cfg.priors), w)});
  };
  record(0);

  std::vector<double> buf(s);
  std::vector<StateSequence> previous(cfg.variant == Variant::partially_collapsed ? cfg.paths : 0);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    if (cfg.variant == Variant::partially_collapsed) {
      const HmmParams phi = hmm_sample_params(out.counts, cfg.priors, param_rng);
      for (std::size_t j = 0; j < cfg.paths; ++j) previous[j] = out.paths.paths[j];
      parallel_for(cfg.paths, cfg.path_threads, [&](std::size_t j) {
        std::vector<double> local(s);
        detail::hmm_pc_sweep_path(phi, out.paths.paths[j], w, sweep_rngs[j], local);
      });
      // Merge count deltas in path order.
      for (std::size_t j = 0; j < cfg.paths; ++j) {
        out.counts.add_path(previous[j], w, -1);
        out.counts.add_path(out.paths.paths[j], w, +1);
      }
      out.last_draw = phi;
    } else {
      for (std::size_t j = 0; j < cfg.paths; ++j) {
        StateSequence& path = out.paths.paths[j];
        for (std::size_t i = 0; i < n; ++i) {
          detail::hmm_site_adjust(out.counts, path, i, w[i], -1);
          const long prev = i == 0 ? -1 : static_cast<long>(path[i - 1]);
          const long next = i + 1 < n ? static_cast<long>(path[i + 1]) : -1;
          detail::hmm_collapsed_weights(out.counts, cfg.priors, prev, next, w[i], buf);
          path[i] = detail::draw_site(buf, sweep_rngs[j], "hmm collapsed sweep");
          detail::hmm_site_adjust(out.counts, path, i, w[i], +1);
        }
      }
    }
    if (observer) observer(it, out.paths, out.counts);
    if (it % cfg.cadence == 0) record(it);
  }

  out.params = hmm_posterior_mean(out.counts, cfg.priors);
  return out;
}

}  // namespace multipath
