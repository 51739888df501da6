#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lda.hpp"
#include "parallel.hpp"

namespace multipath {

struct LdaSamplerConfig {
  Variant variant = Variant::collapsed;
  std::size_t topics = 10;
  std::size_t paths = 1;
  std::size_t iterations = 1;
  std::size_t cadence = 100;
  std::uint64_t seed = 0;
  std::uint64_t run = 0;
  LdaPriors priors;
  std::size_t path_threads = 1;
  std::vector<std::uint64_t> path_streams;

  void validate() const {
    require(topics >= 1, "lda sampler: topics must be >= 1");
    require(paths >= 1, "lda sampler: paths (m) must be >= 1");
    require(iterations >= 1, "lda sampler: iterations must be >= 1");
    require(cadence >= 1, "lda sampler: cadence must be >= 1");
    require(path_streams.empty() || path_streams.size() == paths,
            "lda sampler: path_streams must have one entry per path");
    priors.validate();
  }

  std::uint64_t stream_of(std::size_t j) const { return path_streams.empty() ? j : path_streams[j]; }
};

struct LdaRunResult {
  TopicMatrix topics;                    // posterior mean given the final counters
  std::optional<TopicMatrix> last_draw;  // pc variant: last sampled topics
  LdaPathSet paths;
  LdaCounters counters;
  std::vector<SimplexVector> thetas;     // theta_d from path 0
  std::vector<TracePoint> trace;         // collapsed log joint
};

using LdaSweepObserver = std::function<void(std::size_t, const LdaPathSet&, const LdaCounters&)>;

/// Multipath LDA Gibbs sampler, partially collapsed or collapsed.
///
/// One iteration visits every (path, token) site, paths in the outer loop.
/// The pc variant first draws every topic from Dir(eta + C^TW_t), with C^TW
/// pooled over paths, then resamples sites with the topics fixed; C^TW
/// changes are merged in path order after the sweep. The collapsed variant
/// keeps all counters live and uses the W * eta denominator.
///
/// Streams follow the HMM sampler: (run, stream_of(j), init|sweep) per path
/// and (run, 0, params) for topic draws.
inline LdaRunResult run_lda_sampler(const LdaSamplerConfig& cfg, const Corpus& corpus,
                                    const LdaSweepObserver& observer = {}) {
  cfg.validate();
  require(corpus.size() >= 1, "lda sampler: empty corpus");
  const std::size_t n = corpus.size();
  const std::size_t t_count = cfg.topics;

  LdaRunResult out;
  out.paths.paths.resize(cfg.paths);
  for (std::size_t j = 0; j < cfg.paths; ++j) {
    RngStream rng(cfg.seed, {cfg.run, cfg.stream_of(j), Phase::init});
    out.paths.paths[j].resize(n);
    for (auto& z : out.paths.paths[j]) z = static_cast<Topic>(rng.below(t_count));
  }
  out.counters = LdaCounters::build(out.paths, corpus, t_count);
  LdaCounters& c = out.counters;

  std::vector<RngStream> sweep_rngs;
  sweep_rngs.reserve(cfg.paths);
  for (std::size_t j = 0; j < cfg.paths; ++j) sweep_rngs.emplace_back(cfg.seed, StreamId{cfg.run, cfg.stream_of(j), Phase::sweep});
  RngStream param_rng(cfg.seed, {cfg.run, 0, Phase::params});

  auto record = [&](std::size_t it) { out.trace.push_back({it, lda_log_joint_from_counters(c, cfg.priors)}); };
  record(0);

  const double w_eta = static_cast<double>(corpus.vocab_size()) * cfg.priors.eta;
  std::vector<double> r(t_count);
  std::vector<Assignment> previous(cfg.variant == Variant::partially_collapsed ? cfg.paths : 0);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    if (cfg.variant == Variant::partially_collapsed) {
      const TopicMatrix beta = lda_sample_topics(c, cfg.priors.eta, param_rng);
      for (std::size_t j = 0; j < cfg.paths; ++j) previous[j] = out.paths.paths[j];
      parallel_for(cfg.paths, cfg.path_threads, [&](std::size_t j) {
        std::vector<double> weights(t_count);
        Assignment& p = out.paths.paths[j];
        for (std::size_t i = 0; i < n; ++i) {
          const Symbol w = corpus.token(i);
          const std::size_t d = corpus.doc_of(i);
          c.dt(j, d, p[i]) -= 1;
          detail::lda_pc_weights(beta, c, j, d, w, cfg.priors.alpha, weights);
          p[i] = detail::draw_site(weights, sweep_rngs[j], "lda pc sweep");
          c.dt(j, d, p[i]) += 1;
        }
      });
      for (std::size_t j = 0; j < cfg.paths; ++j) {
        const Assignment& p = out.paths.paths[j];
        for (std::size_t i = 0; i < n; ++i) {
          if (previous[j][i] == p[i]) continue;
          const Symbol w = corpus.token(i);
          c.topic_word(previous[j][i], w) -= 1;
          c.topic_total[previous[j][i]] -= 1;
          c.topic_word(p[i], w) += 1;
          c.topic_total[p[i]] += 1;
        }
      }
      out.last_draw = beta;
    } else {
      for (std::size_t j = 0; j < cfg.paths; ++j) {
        Assignment& p = out.paths.paths[j];
        for (std::size_t i = 0; i < n; ++i) {
          const Symbol w = corpus.token(i);
          const std::size_t d = corpus.doc_of(i);
          const Topic z = p[i];
          c.topic_word(z, w) -= 1;
          c.dt(j, d, z) -= 1;
          c.topic_total[z] -= 1;
          detail::lda_collapsed_weights(c, j, d, w, cfg.priors, w_eta, r);
          const Topic next = detail::draw_site(r, sweep_rngs[j], "lda collapsed sweep");
          p[i] = next;
          c.topic_word(next, w) += 1;
          c.dt(j, d, next) += 1;
          c.topic_total[next] += 1;
        }
      }
    }
    if (observer) observer(it, out.paths, c);
    if (it % cfg.cadence == 0) record(it);
  }

  out.topics = lda_posterior_mean(c, cfg.priors.eta);
  out.thetas.reserve(corpus.docs());
  for (std::size_t d = 0; d < corpus.docs(); ++d) out.thetas.push_back(theta_doc(out.paths, corpus, d, t_count, 0));
  return out;
}

}  // namespace multipath
