#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "prob.hpp"
#include "rng.hpp"

namespace multipath {

/// Token stream with contiguous document blocks. Document d owns tokens
/// [offsets[d], offsets[d + 1]).
class Corpus {
 public:
  Corpus() = default;

  Corpus(std::vector<Symbol> tokens, std::vector<std::uint32_t> doc_of, std::size_t vocab_size,
         std::vector<std::optional<int>> years = {})
      : tokens_(std::move(tokens)), doc_of_(std::move(doc_of)), vocab_(vocab_size), years_(std::move(years)) {
    require(vocab_ >= 1, "corpus: vocabulary size must be >= 1");
    require(tokens_.size() == doc_of_.size(), "corpus: tokens and document ids differ in length");
    offsets_.push_back(0);
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      require(tokens_[i] < vocab_, "corpus: token " + std::to_string(i) + " has word id " +
                                       std::to_string(tokens_[i]) + " >= W=" + std::to_string(vocab_));
      const std::size_t d = doc_of_[i];
      const std::size_t current = offsets_.size() - 1;
      if (i == 0) {
        require(d == 0, "corpus: first token must belong to document 0");
      } else if (d != current) {
        require(d == current + 1, "corpus: document ids must be contiguous (token " + std::to_string(i) + ")");
        offsets_.push_back(i);
      }
    }
    if (!tokens_.empty()) offsets_.push_back(tokens_.size());
    if (years_.empty()) years_.assign(docs(), std::nullopt);
    require(years_.size() == docs(), "corpus: need one year entry per document");
  }

  /// Builds from per-document token lists; every document must be non-empty.
  static Corpus from_documents(const std::vector<std::vector<Symbol>>& documents, std::size_t vocab_size,
                               std::vector<std::optional<int>> years = {}) {
    std::vector<Symbol> tokens;
    std::vector<std::uint32_t> doc_of;
    for (std::size_t d = 0; d < documents.size(); ++d) {
      require(!documents[d].empty(), "corpus: document " + std::to_string(d) + " is empty");
      for (Symbol w : documents[d]) {
        tokens.push_back(w);
        doc_of.push_back(static_cast<std::uint32_t>(d));
      }
    }
    return Corpus(std::move(tokens), std::move(doc_of), vocab_size, std::move(years));
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t vocab_size() const { return vocab_; }
  std::size_t docs() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  Symbol token(std::size_t i) const { return tokens_[i]; }
  std::uint32_t doc_of(std::size_t i) const { return doc_of_[i]; }
  std::size_t doc_begin(std::size_t d) const { return offsets_[d]; }
  std::size_t doc_end(std::size_t d) const { return offsets_[d + 1]; }
  std::size_t doc_size(std::size_t d) const { return offsets_[d + 1] - offsets_[d]; }
  const std::vector<Symbol>& tokens() const { return tokens_; }
  const std::vector<std::uint32_t>& doc_ids() const { return doc_of_; }
  const std::vector<std::optional<int>>& years() const { return years_; }

  bool has_years() const {
    if (years_.empty()) return false;
    for (const auto& y : years_)
      if (!y) return false;
    return true;
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  std::vector<Symbol> tokens_;
  std::vector<std::uint32_t> doc_of_;
  std::size_t vocab_ = 0;
  std::vector<std::optional<int>> years_;
  std::vector<std::size_t> offsets_;
};

/// T topics, each a distribution over the W-word vocabulary.
class TopicMatrix {
 public:
  TopicMatrix() = default;

  explicit TopicMatrix(Matrix<double> topics) : topics_(std::move(topics)) {
    require(topics_.rows() >= 1 && topics_.cols() >= 1, "topics: need T >= 1 and W >= 1");
    for (std::size_t t = 0; t < topics_.rows(); ++t) {
      // Validates the row.
      SimplexVector(std::vector<double>(topics_.row(t).begin(), topics_.row(t).end()));
    }
  }

  explicit TopicMatrix(const std::vector<SimplexVector>& rows) {
    require(!rows.empty(), "topics: need T >= 1");
    topics_ = Matrix<double>(rows.size(), rows.front().size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
      require(rows[t].size() == topics_.cols(), "topics: rows differ in length");
      std::copy(rows[t].values().begin(), rows[t].values().end(), topics_.row(t).begin());
    }
  }

  std::size_t topics() const { return topics_.rows(); }
  std::size_t vocab_size() const { return topics_.cols(); }
  double operator()(std::size_t t, std::size_t w) const { return topics_(t, w); }
  std::span<const double> row(std::size_t t) const { return topics_.row(t); }
  const Matrix<double>& matrix() const { return topics_; }

  friend bool operator==(const TopicMatrix&, const TopicMatrix&) = default;

 private:
  Matrix<double> topics_;
};

using Assignment = std::vector<Topic>;

struct LdaPathSet {
  std::vector<Assignment> paths;

  std::size_t size() const { return paths.size(); }
  friend bool operator==(const LdaPathSet&, const LdaPathSet&) = default;
};

struct LdaPriors {
  double eta = 0.01;   // word-in-topic concentration
  double alpha = 1.0;  // topic-in-document concentration

  void validate() const {
    require(std::isfinite(eta) && eta > 0, "lda priors: eta must be > 0");
    require(std::isfinite(alpha) && alpha > 0, "lda priors: alpha must be > 0");
  }
};

/// Topic-word counts pooled over all m paths, document-topic counts kept per
/// path.
struct LdaCounters {
  std::size_t num_paths = 0;
  std::size_t num_docs = 0;
  std::size_t num_topics = 0;
  Matrix<Count> topic_word;        // C^TW, T x W, summed over paths
  std::vector<Count> topic_total;  // C^T
  std::vector<Count> doc_topic;    // C^DT, flattened [path][doc][topic]
  std::vector<Count> doc_total;    // C^D

  LdaCounters() = default;
  LdaCounters(std::size_t paths, std::size_t docs, std::size_t topics, std::size_t vocab)
      : num_paths(paths),
        num_docs(docs),
        num_topics(topics),
        topic_word(topics, vocab, 0),
        topic_total(topics, 0),
        doc_topic(paths * docs * topics, 0),
        doc_total(docs, 0) {}

  Count& dt(std::size_t j, std::size_t d, std::size_t t) { return doc_topic[(j * num_docs + d) * num_topics + t]; }
  Count dt(std::size_t j, std::size_t d, std::size_t t) const {
    return doc_topic[(j * num_docs + d) * num_topics + t];
  }
  std::span<const Count> dt_row(std::size_t j, std::size_t d) const {
    return {doc_topic.data() + (j * num_docs + d) * num_topics, num_topics};
  }

  static LdaCounters build(const LdaPathSet& ps, const Corpus& corpus, std::size_t topics) {
    LdaCounters c(ps.size(), corpus.docs(), topics, corpus.vocab_size());
    for (std::size_t d = 0; d < corpus.docs(); ++d) c.doc_total[d] = static_cast<Count>(corpus.doc_size(d));
    for (std::size_t j = 0; j < ps.size(); ++j) {
      require(ps.paths[j].size() == corpus.size(), "lda counters: assignment length differs from corpus size");
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Topic z = ps.paths[j][i];
        require(z < topics, "lda counters: topic id out of range at token " + std::to_string(i));
        c.topic_word(z, corpus.token(i)) += 1;
        c.topic_total[z] += 1;
        c.dt(j, corpus.doc_of(i), z) += 1;
      }
    }
    return c;
  }

  friend bool operator==(const LdaCounters&, const LdaCounters&) = default;
};

// ---------------------------------------------------------------------------

/// Synthetic corpus: per document theta ~ Dir(alpha 1_T); per token a topic
/// from theta and a word from that topic. Returns the corpus and the
/// generating assignment.
inline std::pair<Corpus, Assignment> lda_generate(const TopicMatrix& topics, double alpha, std::size_t docs,
                                                  std::size_t doc_len, RngStream& rng) {
  require(docs >= 1, "lda_generate: need at least one document");
  require(doc_len >= 1, "lda_generate: documents must have at least one token");
  require(std::isfinite(alpha) && alpha > 0, "lda_generate: alpha must be > 0");
  const std::size_t t_count = topics.topics();
  std::vector<Symbol> tokens;
  std::vector<std::uint32_t> doc_of;
  Assignment truth;
  tokens.reserve(docs * doc_len);
  const std::vector<double> conc(t_count, alpha);
  for (std::size_t d = 0; d < docs; ++d) {
    const SimplexVector theta = sample_dirichlet(conc, rng);
    for (std::size_t k = 0; k < doc_len; ++k) {
      const auto z = static_cast<Topic>(sample_categorical(theta.values(), rng));
      truth.push_back(z);
      tokens.push_back(static_cast<Symbol>(sample_categorical(topics.row(z), rng)));
      doc_of.push_back(static_cast<std::uint32_t>(d));
    }
  }
  return {Corpus(std::move(tokens), std::move(doc_of), topics.vocab_size()), std::move(truth)};
}

/// Row t ~ Dir(eta + C^TW_t). C^TW pools all m paths.
inline TopicMatrix lda_sample_topics(const LdaCounters& counters, double eta, RngStream& rng) {
  require(std::isfinite(eta) && eta > 0, "lda_sample_topics: eta must be > 0");
  const std::size_t w = counters.topic_word.cols();
  Matrix<double> out(counters.num_topics, w);
  std::vector<double> conc(w);
  for (std::size_t t = 0; t < counters.num_topics; ++t) {
    for (std::size_t k = 0; k < w; ++k) conc[k] = eta + counters.topic_word(t, k);
    const SimplexVector row = sample_dirichlet(conc, rng);
    std::copy(row.values().begin(), row.values().end(), out.row(t).begin());
  }
  return TopicMatrix(std::move(out));
}

/// Posterior-mean topics (C^TW_tw + eta) / (C^T_t + W eta).
inline TopicMatrix lda_posterior_mean(const LdaCounters& counters, double eta) {
  std::vector<SimplexVector> rows;
  for (std::size_t t = 0; t < counters.num_topics; ++t) {
    rows.push_back(dirichlet_posterior_mean(counters.topic_word.row(t), eta));
  }
  return TopicMatrix(rows);
}

namespace detail {

inline void check_weights(std::span<const double> r, const char* what) {
  double total = 0.0;
  for (double v : r) total += v;
  if (!(total > 0.0)) throw DegenerateConditional(std::string(what) + ": every topic has zero weight");
}

inline void lda_pc_weights(const TopicMatrix& topics, const LdaCounters& c, std::size_t j, std::size_t d,
                           Symbol w, double alpha, std::span<double> out) {
  const Count* dt = c.doc_topic.data() + (j * c.num_docs + d) * c.num_topics;
  for (std::size_t t = 0; t < c.num_topics; ++t) out[t] = topics(t, w) * (dt[t] + alpha);
}

inline void lda_collapsed_weights(const LdaCounters& c, std::size_t j, std::size_t d, Symbol w,
                                  const LdaPriors& pr, double w_eta, std::span<double> out) {
  const Count* dt = c.doc_topic.data() + (j * c.num_docs + d) * c.num_topics;
  for (std::size_t t = 0; t < c.num_topics; ++t) {
    out[t] = (c.topic_word(t, w) + pr.eta) / (c.topic_total[t] + w_eta) * (dt[t] + pr.alpha);
  }
}

}  // namespace detail

/// r_t = beta_t(w) (C^DT_jdt + alpha). The site must already be removed from
/// the counters.
inline std::vector<double> lda_pc_site_weights(const TopicMatrix& topics, const LdaCounters& counters,
                                               std::size_t j, std::size_t d, Symbol w, double alpha) {
  require(topics.topics() == counters.num_topics, "lda_pc_site_weights: topic count mismatch");
  require(j < counters.num_paths && d < counters.num_docs, "lda_pc_site_weights: index out of range");
  require(w < topics.vocab_size(), "lda_pc_site_weights: word id out of range");
  std::vector<double> r(counters.num_topics);
  detail::lda_pc_weights(topics, counters, j, d, w, alpha, r);
  detail::check_weights(r, "lda_pc_site_weights");
  return r;
}

/// r_t = (C^TW_tw + eta) / (C^T_t + W eta) * (C^DT_jdt + alpha). The site must
/// already be removed from the counters.
inline std::vector<double> lda_collapsed_site_weights(const LdaCounters& counters, std::size_t j, std::size_t d,
                                                      Symbol w, const LdaPriors& priors) {
  priors.validate();
  require(j < counters.num_paths && d < counters.num_docs, "lda_collapsed_site_weights: index out of range");
  require(w < counters.topic_word.cols(), "lda_collapsed_site_weights: word id out of range");
  std::vector<double> r(counters.num_topics);
  const double w_eta = static_cast<double>(counters.topic_word.cols()) * priors.eta;
  detail::lda_collapsed_weights(counters, j, d, w, priors, w_eta, r);
  detail::check_weights(r, "lda_collapsed_site_weights");
  return r;
}

/// Same quantity as lda_log_joint_collapsed, read off live counters.
inline double lda_log_joint_from_counters(const LdaCounters& c, const LdaPriors& priors) {
  double lj = 0.0;
  for (std::size_t t = 0; t < c.num_topics; ++t) lj += log_dirichlet_multinomial(c.topic_word.row(t), priors.eta);
  for (std::size_t j = 0; j < c.num_paths; ++j) {
    for (std::size_t d = 0; d < c.num_docs; ++d) lj += log_dirichlet_multinomial(c.dt_row(j, d), priors.alpha);
  }
  return lj;
}

/// Closed-form log P(w, p^1..p^m) with topics and every path's per-document
/// theta integrated out.
inline double lda_log_joint_collapsed(const LdaPathSet& ps, const Corpus& corpus, std::size_t topics,
                                      const LdaPriors& priors) {
  priors.validate();
  return lda_log_joint_from_counters(LdaCounters::build(ps, corpus, topics), priors);
}

/// ln P(w, p | phi) for one path: theta integrated per document, words scored
/// under the given topics.
inline double lda_path_log_likelihood(const TopicMatrix& topics, const Assignment& p, const Corpus& corpus,
                                      double alpha) {
  require(p.size() == corpus.size(), "lda_path_log_likelihood: assignment length differs from corpus size");
  require(topics.vocab_size() >= corpus.vocab_size(), "lda_path_log_likelihood: vocabulary mismatch");
  const std::size_t t_count = topics.topics();
  double ll = 0.0;
  std::vector<Count> doc_counts(t_count);
  for (std::size_t d = 0; d < corpus.docs(); ++d) {
    std::fill(doc_counts.begin(), doc_counts.end(), 0);
    for (std::size_t i = corpus.doc_begin(d); i < corpus.doc_end(d); ++i) {
      require(p[i] < t_count, "lda_path_log_likelihood: topic id out of range");
      doc_counts[p[i]] += 1;
      ll += std::log(topics(p[i], corpus.token(i)));
    }
    ll += log_dirichlet_multinomial(doc_counts, alpha);
  }
  return ll;
}

/// Empirical topic frequencies of one path's assignments within document d.
inline SimplexVector theta_doc(const LdaPathSet& ps, const Corpus& corpus, std::size_t d, std::size_t topics,
                               std::size_t path_choice = 0) {
  require(d < corpus.docs(), "theta_doc: document index out of range");
  require(path_choice < ps.size(), "theta_doc: path index out of range");
  require(corpus.doc_size(d) > 0, "theta_doc: document " + std::to_string(d) + " is empty");
  std::vector<double> freq(topics, 0.0);
  const auto& p = ps.paths[path_choice];
  for (std::size_t i = corpus.doc_begin(d); i < corpus.doc_end(d); ++i) {
    require(p[i] < topics, "theta_doc: topic id out of range");
    freq[p[i]] += 1.0;
  }
  const double k = static_cast<double>(corpus.doc_size(d));
  for (double& f : freq) f /= k;
  return SimplexVector(std::move(freq));
}

}  // namespace multipath
