#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace multipath {

using Count = std::int32_t;
using Symbol = std::uint32_t;
using State = std::uint32_t;
using Topic = std::uint32_t;

// Bad input to a public operation.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A Gibbs conditional with no support (every candidate weight is zero).
class DegenerateConditional : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incrementally maintained counters disagree with the state they summarize.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed file content; the message carries the location.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sampler flavour: phi drawn explicitly between sweeps, or integrated out.
enum class Variant { partially_collapsed, collapsed };

inline std::string to_string(Variant v) {
  return v == Variant::collapsed ? "collapsed" : "pc";
}

inline void require(bool ok, const char* what) {
  if (!ok) throw InvalidArgument(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

inline Variant parse_variant(const std::string& s) {
  if (s == "collapsed" || s == "c") return Variant::collapsed;
  if (s == "pc" || s == "partially_collapsed" || s == "partially-collapsed") return Variant::partially_collapsed;
  throw InvalidArgument("unknown sampler variant '" + s + "' (expected pc or collapsed)");
}

// One likelihood measurement along a sampler run.
struct TracePoint {
  std::size_t iteration = 0;
  double value = 0.0;
};

/// Dense row-major matrix. Rows are exposed as spans so that callers can
/// hand them to the probability primitives without copying.
template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

}  // namespace multipath
