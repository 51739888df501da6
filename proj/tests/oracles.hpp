#pragma once

// Independent reference computations used by the tests. Nothing in here calls
// the library's likelihood, count or conditional code; only value types and
// the shared random primitives are reused.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "multipath/multipath.hpp"

namespace oracle {

using namespace multipath;

// Calls f(digits) for every vector in {0..base-1}^len, last digit fastest.
inline void enumerate(std::size_t len, std::size_t base, const std::function<void(const std::vector<std::uint32_t>&)>& f) {
  std::vector<std::uint32_t> v(len, 0);
  for (;;) {
    f(v);
    std::size_t k = len;
    while (k > 0) {
      --k;
      if (++v[k] < base) break;
      v[k] = 0;
      if (k == 0) return;
    }
    if (len == 0) return;
  }
}

inline std::size_t encode(const std::vector<std::vector<std::uint32_t>>& paths, std::size_t base) {
  std::size_t code = 0;
  for (const auto& p : paths)
    for (auto v : p) code = code * base + v;
  return code;
}

// ---------------------------------------------------------------------------
// HMM
// ---------------------------------------------------------------------------

// P(p, w | phi) as a plain product.
inline double hmm_path_prob(const HmmParams& phi, const std::vector<std::uint32_t>& p, const std::vector<std::uint32_t>& w) {
  double prob = phi.initial(p[0]) * phi.emission(p[0], w[0]);
  for (std::size_t i = 1; i < p.size(); ++i) prob *= phi.transition(p[i - 1], p[i]) * phi.emission(p[i], w[i]);
  return prob;
}

inline double hmm_data_prob(const HmmParams& phi, const std::vector<std::uint32_t>& w) {
  double total = 0.0;
  enumerate(w.size(), phi.states(), [&](const auto& p) { total += hmm_path_prob(phi, p, w); });
  return total;
}

inline HmmParams random_hmm(std::size_t s, std::size_t w, RngStream& rng) {
  std::vector<double> sc(s, 1.0), wc(w, 1.0);
  std::vector<SimplexVector> tr, em;
  for (std::size_t r = 0; r < s; ++r) tr.push_back(sample_dirichlet(sc, rng));
  for (std::size_t r = 0; r < s; ++r) em.push_back(sample_dirichlet(wc, rng));
  return HmmParams(sample_dirichlet(sc, rng), tr, em);
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature on [0, 1]
// ---------------------------------------------------------------------------

struct Rule {
  std::vector<double> x, w;
};

inline Rule gauss_legendre(std::size_t n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x[i] = 0.5 * (1.0 - z);
    r.w[i] = 1.0 / ((1.0 - z * z) * dp * dp);  // 2/((1-z^2)p'^2) scaled by 1/2
  }
  return r;
}

// A point on the K-simplex (K = 2 or 3) from unit-cube coordinates, with the
// Jacobian of the map.
inline double simplex_point(std::size_t k, const double* u, std::vector<double>& out) {
  out.resize(k);
  if (k == 2) {
    out[0] = u[0];
    out[1] = 1.0 - u[0];
    return 1.0;
  }
  out[0] = u[0];
  out[1] = (1.0 - u[0]) * u[1];
  out[2] = (1.0 - u[0]) * (1.0 - u[1]);
  return 1.0 - u[0];
}

// Integrates f over a product of simplices (each of dimension 2 or 3),
// weighting each simplex by an unnormalized symmetric Dirichlet density whose
// normalizer is computed with the same rule.
inline double integrate_simplices(const std::vector<std::size_t>& dims, const std::vector<double>& conc,
                                  std::size_t nodes, const std::function<double(const std::vector<std::vector<double>>&)>& f) {
  const Rule rule = gauss_legendre(nodes);
  std::size_t free = 0;
  for (std::size_t d : dims) free += d - 1;

  auto density = [](const std::vector<double>& x, double a) {
    double v = 1.0;
    for (double xi : x) v *= std::pow(xi, a - 1.0);
    return v;
  };
  std::vector<double> norms(dims.size());
  for (std::size_t s = 0; s < dims.size(); ++s) {
    double z = 0.0;
    std::vector<double> pt;
    enumerate(dims[s] - 1, nodes, [&](const auto& idx) {
      double u[2], wgt = 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        u[k] = rule.x[idx[k]];
        wgt *= rule.w[idx[k]];
      }
      const double jac = simplex_point(dims[s], u, pt);
      z += wgt * jac * density(pt, conc[s]);
    });
    norms[s] = z;
  }

  double total = 0.0;
  std::vector<std::vector<double>> pts(dims.size());
  enumerate(free, nodes, [&](const auto& idx) {
    double wgt = 1.0;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < dims.size(); ++s) {
      double u[2];
      for (std::size_t k = 0; k + 1 < dims[s]; ++k) {
        u[k] = rule.x[idx[pos]];
        wgt *= rule.w[idx[pos]];
        ++pos;
      }
      wgt *= simplex_point(dims[s], u, pts[s]) * density(pts[s], conc[s]) / norms[s];
    }
    total += wgt * f(pts);
  });
  return total;
}

// log of the integral of P(phi) prod_j P(p^j, w | phi) for S=2 by quadrature.
// Simplices: initial, transition rows 0..S-1, emission rows 0..S-1.
inline double hmm_joint_by_quadrature(const std::vector<std::vector<std::uint32_t>>& paths,
                                      const std::vector<std::uint32_t>& w, std::size_t symbols, const HmmPriors& pr,
                                      std::size_t nodes) {
  const std::size_t s = 2;
  std::vector<std::size_t> dims{s, s, s, symbols, symbols};
  std::vector<double> conc{pr.init, pr.trans, pr.trans, pr.emit, pr.emit};
  const double v = integrate_simplices(dims, conc, nodes, [&](const std::vector<std::vector<double>>& x) {
    double prod = 1.0;
    for (const auto& p : paths) {
      prod *= x[0][p[0]] * x[3 + p[0]][w[0]];
      for (std::size_t i = 1; i < p.size(); ++i) prod *= x[1 + p[i - 1]][p[i]] * x[3 + p[i]][w[i]];
    }
    return prod;
  });
  return std::log(v);
}

// LDA with T=2 topics, one document per path set: simplices are the two topic
// rows (dimension W) and one theta per (path, document).
inline double lda_joint_by_quadrature(const std::vector<std::vector<std::uint32_t>>& paths, const Corpus& corpus,
                                      const LdaPriors& pr, std::size_t nodes) {
  const std::size_t t_count = 2;
  const std::size_t w = corpus.vocab_size();
  std::vector<std::size_t> dims{w, w};
  std::vector<double> conc{pr.eta, pr.eta};
  for (std::size_t j = 0; j < paths.size(); ++j) {
    for (std::size_t d = 0; d < corpus.docs(); ++d) {
      dims.push_back(t_count);
      conc.push_back(pr.alpha);
    }
  }
  const double v = integrate_simplices(dims, conc, nodes, [&](const std::vector<std::vector<double>>& x) {
    double prod = 1.0;
    for (std::size_t j = 0; j < paths.size(); ++j) {
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& theta = x[2 + j * corpus.docs() + corpus.doc_of(i)];
        prod *= theta[paths[j][i]] * x[paths[j][i]][corpus.token(i)];
      }
    }
    return prod;
  });
  return std::log(v);
}

// P(p, w | topics) with each document's theta integrated against Dir(alpha):
// product over documents of the Polya-urn sequence probability, times the
// word probabilities.
inline double lda_path_prob(const TopicMatrix& topics, const std::vector<std::uint32_t>& p, const Corpus& corpus,
                            double alpha) {
  const std::size_t t_count = topics.topics();
  double prob = 1.0;
  for (std::size_t d = 0; d < corpus.docs(); ++d) {
    std::vector<double> seen(t_count, 0.0);
    double n = 0.0;
    for (std::size_t i = corpus.doc_begin(d); i < corpus.doc_end(d); ++i) {
      prob *= (seen[p[i]] + alpha) / (n + static_cast<double>(t_count) * alpha);
      prob *= topics(p[i], corpus.token(i));
      seen[p[i]] += 1.0;
      n += 1.0;
    }
  }
  return prob;
}

inline double lda_data_prob(const TopicMatrix& topics, const Corpus& corpus, double alpha) {
  double total = 0.0;
  enumerate(corpus.size(), topics.topics(), [&](const auto& p) { total += lda_path_prob(topics, p, corpus, alpha); });
  return total;
}

// ---------------------------------------------------------------------------
// Single-path reference samplers
// ---------------------------------------------------------------------------

// Standard collapsed Gibbs sampler for one HMM path.
inline std::vector<std::vector<std::uint32_t>> hmm_reference_collapsed(const std::vector<std::uint32_t>& w, std::size_t s,
                                                                       std::size_t symbols, const HmmPriors& pr,
                                                                       std::uint64_t seed, std::uint64_t run,
                                                                       std::size_t sweeps) {
  const std::size_t n = w.size();
  RngStream init(seed, {run, 0, Phase::init});
  std::vector<std::uint32_t> z(n);
  for (auto& v : z) v = static_cast<std::uint32_t>(init.below(s));

  std::vector<double> n_init(s, 0), n_tr(s * s, 0), n_tr_row(s, 0), n_em(s * symbols, 0), n_em_row(s, 0);
  auto touch = [&](std::size_t i, double delta) {
    if (i == 0) {
      n_init[z[0]] += delta;
    } else {
      n_tr[z[i - 1] * s + z[i]] += delta;
      n_tr_row[z[i - 1]] += delta;
    }
    if (i + 1 < n) {
      n_tr[z[i] * s + z[i + 1]] += delta;
      n_tr_row[z[i]] += delta;
    }
    n_em[z[i] * symbols + w[i]] += delta;
    n_em_row[z[i]] += delta;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) n_init[z[0]] += 1;
    else {
      n_tr[z[i - 1] * s + z[i]] += 1;
      n_tr_row[z[i - 1]] += 1;
    }
    n_em[z[i] * symbols + w[i]] += 1;
    n_em_row[z[i]] += 1;
  }

  RngStream rng(seed, {run, 0, Phase::sweep});
  std::vector<std::vector<std::uint32_t>> history;
  std::vector<double> weight(s);
  const double ds = static_cast<double>(s), dw = static_cast<double>(symbols);
  for (std::size_t it = 0; it < sweeps; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      touch(i, -1);
      for (std::size_t t = 0; t < s; ++t) {
        double a;
        if (i == 0) a = n_init[t] + pr.init;
        else a = (n_tr[z[i - 1] * s + t] + pr.trans) / (n_tr_row[z[i - 1]] + ds * pr.trans);
        double b = 1.0;
        if (i + 1 < n) {
          const bool loop_in = i > 0 && z[i - 1] == t;
          const bool loop_both = loop_in && z[i + 1] == t;
          b = (n_tr[t * s + z[i + 1]] + pr.trans + (loop_both ? 1 : 0)) / (n_tr_row[t] + ds * pr.trans + (loop_in ? 1 : 0));
        }
        const double e = (n_em[t * symbols + w[i]] + pr.emit) / (n_em_row[t] + dw * pr.emit);
        weight[t] = a * b * e;
      }
      z[i] = static_cast<std::uint32_t>(sample_categorical(weight, rng));
      touch(i, +1);
    }
    history.push_back(z);
  }
  return history;
}

// Uncollapsed single-path HMM sampler: draw phi from its conditional, then
// sweep every site given phi.
inline std::vector<std::vector<std::uint32_t>> hmm_reference_pc(const std::vector<std::uint32_t>& w, std::size_t s,
                                                                std::size_t symbols, const HmmPriors& pr,
                                                                std::uint64_t seed, std::uint64_t run, std::size_t sweeps) {
  const std::size_t n = w.size();
  RngStream init(seed, {run, 0, Phase::init});
  std::vector<std::uint32_t> z(n);
  for (auto& v : z) v = static_cast<std::uint32_t>(init.below(s));
  RngStream rng(seed, {run, 0, Phase::sweep});
  RngStream prng(seed, {run, 0, Phase::params});
  std::vector<std::vector<std::uint32_t>> history;
  std::vector<double> weight(s);
  for (std::size_t it = 0; it < sweeps; ++it) {
    std::vector<int> ci(s, 0);
    std::vector<std::vector<int>> ct(s, std::vector<int>(s, 0)), ce(s, std::vector<int>(symbols, 0));
    ci[z[0]] += 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) ct[z[i - 1]][z[i]] += 1;
      ce[z[i]][w[i]] += 1;
    }
    auto with_prior = [](const std::vector<int>& c, double a) {
      std::vector<double> out;
      for (int v : c) out.push_back(a + v);
      return out;
    };
    const SimplexVector start = sample_dirichlet(with_prior(ci, pr.init), prng);
    std::vector<SimplexVector> tr, em;
    for (std::size_t r = 0; r < s; ++r) tr.push_back(sample_dirichlet(with_prior(ct[r], pr.trans), prng));
    for (std::size_t r = 0; r < s; ++r) em.push_back(sample_dirichlet(with_prior(ce[r], pr.emit), prng));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < s; ++t) {
        double v = i == 0 ? start[t] : tr[z[i - 1]][t];
        if (i + 1 < n) v *= tr[t][z[i + 1]];
        weight[t] = v * em[t][w[i]];
      }
      z[i] = static_cast<std::uint32_t>(sample_categorical(weight, rng));
    }
    history.push_back(z);
  }
  return history;
}

// Standard collapsed Gibbs sampler for LDA (one chain).
inline std::vector<std::vector<std::uint32_t>> lda_reference_collapsed(const Corpus& corpus, std::size_t t_count,
                                                                       const LdaPriors& pr, std::uint64_t seed,
                                                                       std::uint64_t run, std::size_t sweeps) {
  const std::size_t n = corpus.size(), vocab = corpus.vocab_size();
  RngStream init(seed, {run, 0, Phase::init});
  std::vector<std::uint32_t> z(n);
  for (auto& v : z) v = static_cast<std::uint32_t>(init.below(t_count));
  std::vector<std::vector<int>> nwt(t_count, std::vector<int>(vocab, 0));
  std::vector<int> nt(t_count, 0);
  std::vector<std::vector<int>> ndt(corpus.docs(), std::vector<int>(t_count, 0));
  for (std::size_t i = 0; i < n; ++i) {
    ++nwt[z[i]][corpus.token(i)];
    ++nt[z[i]];
    ++ndt[corpus.doc_of(i)][z[i]];
  }
  RngStream rng(seed, {run, 0, Phase::sweep});
  std::vector<double> p(t_count);
  std::vector<std::vector<std::uint32_t>> history;
  const double v_eta = static_cast<double>(vocab) * pr.eta;
  for (std::size_t it = 0; it < sweeps; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto word = corpus.token(i);
      const auto d = corpus.doc_of(i);
      --nwt[z[i]][word];
      --nt[z[i]];
      --ndt[d][z[i]];
      for (std::size_t t = 0; t < t_count; ++t) p[t] = (nwt[t][word] + pr.eta) / (nt[t] + v_eta) * (ndt[d][t] + pr.alpha);
      z[i] = static_cast<std::uint32_t>(sample_categorical(p, rng));
      ++nwt[z[i]][word];
      ++nt[z[i]];
      ++ndt[d][z[i]];
    }
    history.push_back(z);
  }
  return history;
}

// Uncollapsed-topics LDA sampler for one chain: draw every topic row, then
// sweep the tokens with theta integrated out.
inline std::vector<std::vector<std::uint32_t>> lda_reference_pc(const Corpus& corpus, std::size_t t_count,
                                                                const LdaPriors& pr, std::uint64_t seed, std::uint64_t run,
                                                                std::size_t sweeps) {
  const std::size_t n = corpus.size(), vocab = corpus.vocab_size();
  RngStream init(seed, {run, 0, Phase::init});
  std::vector<std::uint32_t> z(n);
  for (auto& v : z) v = static_cast<std::uint32_t>(init.below(t_count));
  RngStream rng(seed, {run, 0, Phase::sweep});
  RngStream prng(seed, {run, 0, Phase::params});
  std::vector<double> p(t_count);
  std::vector<std::vector<std::uint32_t>> history;
  for (std::size_t it = 0; it < sweeps; ++it) {
    std::vector<std::vector<int>> nwt(t_count, std::vector<int>(vocab, 0));
    std::vector<std::vector<int>> ndt(corpus.docs(), std::vector<int>(t_count, 0));
    for (std::size_t i = 0; i < n; ++i) {
      ++nwt[z[i]][corpus.token(i)];
      ++ndt[corpus.doc_of(i)][z[i]];
    }
    std::vector<SimplexVector> beta;
    std::vector<double> conc(vocab);
    for (std::size_t t = 0; t < t_count; ++t) {
      for (std::size_t v = 0; v < vocab; ++v) conc[v] = pr.eta + nwt[t][v];
      beta.push_back(sample_dirichlet(conc, prng));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = corpus.doc_of(i);
      --ndt[d][z[i]];
      for (std::size_t t = 0; t < t_count; ++t) p[t] = beta[t][corpus.token(i)] * (ndt[d][t] + pr.alpha);
      z[i] = static_cast<std::uint32_t>(sample_categorical(p, rng));
      ++ndt[d][z[i]];
    }
    history.push_back(z);
  }
  return history;
}

}  // namespace oracle
