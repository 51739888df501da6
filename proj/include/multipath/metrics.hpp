#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "lda.hpp"
#include "prob.hpp"

namespace multipath {

/// Mean over ground-truth topics of the L1 distance to the nearest learned
/// topic. Range [0, 2].
inline double disc(const TopicMatrix& ground, const TopicMatrix& learned) {
  require(ground.vocab_size() == learned.vocab_size(),
          "disc: vocabulary sizes differ (" + std::to_string(ground.vocab_size()) + " vs " +
              std::to_string(learned.vocab_size()) + ")");
  const std::size_t w = ground.vocab_size();
  double total = 0.0;
  for (std::size_t i = 0; i < ground.topics(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < learned.topics(); ++j) {
      double dist = 0.0;
      for (std::size_t k = 0; k < w; ++k) dist += std::abs(ground(i, k) - learned(j, k));
      if (dist < best) best = dist;  // strict: lowest index wins ties
    }
    total += best;
  }
  return total / static_cast<double>(ground.topics());
}

// ---------------------------------------------------------------------------
// Yearly topic distributions
// ---------------------------------------------------------------------------

struct YearTopicTable {
  std::vector<int> years;               // ascending, distinct
  std::vector<SimplexVector> theta_y;   // one row per year

  std::size_t topics() const { return theta_y.empty() ? 0 : theta_y.front().size(); }
};

/// theta_y = unweighted mean of theta_d over the documents stamped with year y.
inline YearTopicTable yearly_topic_table(std::span<const SimplexVector> doc_thetas, std::span<const int> doc_years) {
  require(doc_thetas.size() == doc_years.size(), "yearly_topic_table: need one year per document");
  std::map<int, std::pair<std::vector<double>, std::size_t>> acc;
  std::size_t t_count = 0;
  for (std::size_t d = 0; d < doc_thetas.size(); ++d) {
    if (d == 0) t_count = doc_thetas[d].size();
    require(doc_thetas[d].size() == t_count, "yearly_topic_table: theta dimensions differ");
    auto& [sum, n] = acc[doc_years[d]];
    if (sum.empty()) sum.assign(t_count, 0.0);
    for (std::size_t t = 0; t < t_count; ++t) sum[t] += doc_thetas[d][t];
    ++n;
  }
  YearTopicTable table;
  for (auto& [year, entry] : acc) {
    auto& [sum, n] = entry;
    for (double& v : sum) v /= static_cast<double>(n);
    table.years.push_back(year);
    table.theta_y.emplace_back(std::move(sum));
  }
  return table;
}

inline std::vector<std::pair<int, double>> yearly_entropy_curve(const YearTopicTable& table) {
  std::vector<std::pair<int, double>> out;
  out.reserve(table.years.size());
  for (std::size_t y = 0; y < table.years.size(); ++y) out.emplace_back(table.years[y], entropy(table.theta_y[y]));
  return out;
}

inline std::vector<std::pair<int, double>> topic_weight_series(const YearTopicTable& table, std::size_t topic) {
  require(topic < table.topics(), "topic_weight_series: topic " + std::to_string(topic) + " out of range");
  std::vector<std::pair<int, double>> out;
  out.reserve(table.years.size());
  for (std::size_t y = 0; y < table.years.size(); ++y) out.emplace_back(table.years[y], table.theta_y[y][topic]);
  return out;
}

/// w_t = sum over years of theta_y(t).
inline double total_topic_weight(const YearTopicTable& table, std::size_t topic) {
  require(topic < table.topics(), "total_topic_weight: topic " + std::to_string(topic) + " out of range");
  double w = 0.0;
  for (const auto& row : table.theta_y) w += row[topic];
  return w;
}

// ---------------------------------------------------------------------------
// Quantile buckets
// ---------------------------------------------------------------------------

struct BucketSet {
  std::size_t topic = 0;
  double gamma = 0.0;
  std::vector<int> lengths;  // whole years spanned, inclusive
};

inline std::size_t bucket_count(double gamma) {
  return static_cast<std::size_t>(std::floor(1.0 / gamma + 1e-9));
}

/// Splits a weight series into floor(1/gamma) consecutive year intervals.
/// Walking years in ascending order, bucket k closes at the first year where
/// the cumulative weight reaches (k + 1) * gamma * total; that year belongs to
/// the bucket it closes and the next bucket starts at the following year.
/// Leading zero-weight years are not counted into a bucket, and a year that
/// crosses several boundaries closes each of them as a one-year bucket.
inline BucketSet quantile_buckets(std::span<const std::pair<int, double>> series, double gamma,
                                  std::size_t topic = 0) {
  require(gamma > 0.0 && gamma < 1.0, "quantile_buckets: gamma must lie in (0, 1)");
  require(!series.empty(), "quantile_buckets: empty series");
  double total = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    require(series[k].second >= 0.0 && std::isfinite(series[k].second), "quantile_buckets: weights must be >= 0");
    if (k > 0) require(series[k].first > series[k - 1].first, "quantile_buckets: years must be strictly ascending");
    total += series[k].second;
  }
  require(total > 0.0, "quantile_buckets: total weight is zero");

  BucketSet out{topic, gamma, {}};
  const std::size_t count = bucket_count(gamma);
  const double slack = 1e-12 * total;
  std::size_t start = 0;  // index of the first year of the open bucket
  double cumulative = 0.0;
  for (std::size_t idx = 0; idx < series.size() && out.lengths.size() < count; ++idx) {
    cumulative += series[idx].second;
    while (out.lengths.size() < count &&
           cumulative + slack >= static_cast<double>(out.lengths.size() + 1) * gamma * total) {
      std::size_t first = std::min(start, idx);
      while (first < idx && series[first].second == 0.0) ++first;
      out.lengths.push_back(series[idx].first - series[first].first + 1);
      start = idx + 1;
    }
  }
  // Rounding can leave the last boundary unreached; close at the final year.
  while (out.lengths.size() < count) {
    const std::size_t last = series.size() - 1;
    const std::size_t first = std::min(start, last);
    out.lengths.push_back(series[last].first - series[first].first + 1);
    start = last + 1;
  }
  return out;
}

enum class BucketWeighting { none, by_topic_weight };

/// Histogram (bin width one year) of bucket lengths pooled over every topic
/// of every table. With by_topic_weight, each length carries mass
/// proportional to its topic's total weight w_t, rescaled so that the total
/// mass equals the number of pooled buckets. Topics with zero total weight
/// have no buckets and are skipped.
inline std::map<int, double> bucket_histogram(std::span<const YearTopicTable> tables, double gamma,
                                              BucketWeighting weighting) {
  struct Entry {
    double weight;
    std::vector<int> lengths;
  };
  std::vector<Entry> entries;
  for (const auto& table : tables) {
    for (std::size_t t = 0; t < table.topics(); ++t) {
      const double w_t = total_topic_weight(table, t);
      if (!(w_t > 0.0)) continue;
      const auto series = topic_weight_series(table, t);
      entries.push_back({w_t, quantile_buckets(series, gamma, t).lengths});
    }
  }
  double raw_count = 0.0, weighted = 0.0;
  for (const auto& e : entries) {
    raw_count += static_cast<double>(e.lengths.size());
    weighted += e.weight * static_cast<double>(e.lengths.size());
  }
  std::map<int, double> hist;
  for (const auto& e : entries) {
    const double mass = weighting == BucketWeighting::none ? 1.0 : e.weight * raw_count / weighted;
    for (int len : e.lengths) hist[len] += mass;
  }
  return hist;
}

}  // namespace multipath
