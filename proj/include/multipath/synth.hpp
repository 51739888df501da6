#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "hmm.hpp"
#include "lda.hpp"

namespace multipath {

// ---------------------------------------------------------------------------
// Hard two-state HMM
// ---------------------------------------------------------------------------

struct SynthHmmSpec {
  std::size_t states = 2;
  std::size_t symbols = 10;
  double switch_prob = 0.45;
  std::size_t length = 200000;
  std::uint64_t seed = 0;
  // Accepted range for the pairwise L1 distance between emission rows.
  double min_emission_l1 = 0.3;
  double max_emission_l1 = 0.7;

  void validate() const {
    require(states >= 2, "hmm spec: S must be >= 2");
    require(symbols >= 2, "hmm spec: W must be >= 2");
    require(switch_prob > 0.0 && switch_prob < 1.0, "hmm spec: switch_prob must lie in (0, 1)");
    require(length >= 1, "hmm spec: N must be >= 1");
    require(min_emission_l1 >= 0.0 && min_emission_l1 < max_emission_l1 && max_emission_l1 <= 2.0,
            "hmm spec: emission L1 range must satisfy 0 <= min < max <= 2");
  }
};

struct SynthHmm {
  HmmParams params;
  StateSequence states;
  ObservationSequence observations;
  std::size_t emission_attempts = 0;  // rejection-sampling rounds used
};

/// Symmetric chain that stays with probability 1 - switch_prob and otherwise
/// moves uniformly to another state; uniform initial distribution. Emission
/// rows are Dir(1) draws, redrawn until every pair is between
/// min_emission_l1 and max_emission_l1 apart in L1.
inline SynthHmm make_hard_hmm(const SynthHmmSpec& spec) {
  spec.validate();
  const std::size_t s = spec.states;
  const std::size_t w = spec.symbols;

  std::vector<SimplexVector> transitions;
  for (std::size_t r = 0; r < s; ++r) {
    std::vector<double> row(s, spec.switch_prob / static_cast<double>(s - 1));
    row[r] = 1.0 - spec.switch_prob;
    transitions.emplace_back(std::move(row));
  }

  RngStream emission_rng(spec.seed, {0, 0, Phase::aux});
  const std::vector<double> flat(w, 1.0);
  std::vector<SimplexVector> emissions;
  std::size_t attempts = 0;
  for (;;) {
    ++attempts;
    emissions.clear();
    for (std::size_t r = 0; r < s; ++r) emissions.push_back(sample_dirichlet(flat, emission_rng));
    bool ok = true;
    for (std::size_t a = 0; a < s && ok; ++a) {
      for (std::size_t b = a + 1; b < s && ok; ++b) {
        double l1 = 0.0;
        for (std::size_t k = 0; k < w; ++k) l1 += std::abs(emissions[a][k] - emissions[b][k]);
        ok = l1 >= spec.min_emission_l1 && l1 <= spec.max_emission_l1;
      }
    }
    if (ok) break;
  }

  HmmParams params(SimplexVector::uniform(s), transitions, emissions);
  RngStream data_rng(spec.seed, {0, 0, Phase::data});
  auto [states, obs] = hmm_generate(params, spec.length, data_rng);
  return {std::move(params), std::move(states), std::move(obs), attempts};
}

// ---------------------------------------------------------------------------
// Band topics
// ---------------------------------------------------------------------------

/// T overlapping bands over a W-word vocabulary. Band k is centered at
/// round((W - 1) k / (T - 1)) with half-width round(W / T), clipped to the
/// vocabulary; topic k mixes the uniform distribution on its band (weight
/// band_weight) with the uniform distribution on all W words.
inline TopicMatrix make_band_topics(std::size_t topics, std::size_t vocab, double band_weight) {
  require(topics >= 2, "band topics: need T >= 2");
  require(vocab >= topics, "band topics: need W >= T");
  require(band_weight > 0.0 && band_weight < 1.0, "band topics: band_weight must lie in (0, 1)");
  const long half = std::lround(static_cast<double>(vocab) / static_cast<double>(topics));
  Matrix<double> m(topics, vocab);
  for (std::size_t k = 0; k < topics; ++k) {
    const long center = std::lround(static_cast<double>(vocab - 1) * static_cast<double>(k) /
                                    static_cast<double>(topics - 1));
    const long lo = std::max<long>(0, center - half);
    const long hi = std::min<long>(static_cast<long>(vocab) - 1, center + half);
    const double band_mass = band_weight / static_cast<double>(hi - lo + 1);
    const double floor_mass = (1.0 - band_weight) / static_cast<double>(vocab);
    for (std::size_t w = 0; w < vocab; ++w) {
      const auto lw = static_cast<long>(w);
      m(k, w) = floor_mass + (lw >= lo && lw <= hi ? band_mass : 0.0);
    }
  }
  return TopicMatrix(std::move(m));
}

struct YearRange {
  int first = 0;
  int last = 0;
};

struct SynthLdaSpec {
  std::size_t topics = 10;
  std::size_t vocab = 100;
  std::size_t docs = 1500;
  std::size_t doc_len = 10;
  double alpha = 1.0;
  double band_weight = 0.95;
  std::uint64_t seed = 0;
  std::optional<YearRange> years;  // stamps documents evenly over the range

  void validate() const {
    require(topics >= 2, "lda spec: T must be >= 2");
    require(vocab >= topics, "lda spec: W must be >= T");
    require(docs >= 1, "lda spec: docs must be >= 1");
    require(doc_len >= 1, "lda spec: doc_len must be >= 1");
    require(alpha > 0.0, "lda spec: alpha must be > 0");
    require(band_weight > 0.0 && band_weight < 1.0, "lda spec: band_weight must lie in (0, 1)");
    if (years) require(years->last >= years->first, "lda spec: years.last must be >= years.first");
  }
};

struct SynthLda {
  TopicMatrix topics;
  Corpus corpus;
  Assignment truth;
};

inline SynthLda make_synth_lda(const SynthLdaSpec& spec) {
  spec.validate();
  TopicMatrix topics = make_band_topics(spec.topics, spec.vocab, spec.band_weight);
  RngStream rng(spec.seed, {0, 0, Phase::data});
  auto [corpus, truth] = lda_generate(topics, spec.alpha, spec.docs, spec.doc_len, rng);
  if (spec.years) {
    const auto span = static_cast<std::size_t>(spec.years->last - spec.years->first + 1);
    std::vector<std::optional<int>> stamps(spec.docs);
    for (std::size_t d = 0; d < spec.docs; ++d) {
      stamps[d] = spec.years->first + static_cast<int>(d * span / spec.docs);
    }
    corpus = Corpus(corpus.tokens(), corpus.doc_ids(), corpus.vocab_size(), std::move(stamps));
  }
  return {std::move(topics), std::move(corpus), std::move(truth)};
}

}  // namespace multipath
