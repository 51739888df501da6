#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmm.hpp"
#include "lda.hpp"

namespace multipath::io {

namespace fs = std::filesystem;
using nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

inline json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

/// Plain-text number with 9 significant digits.
inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(9) << v;
  return s.str();
}

/// Minimal CSV writer: header row first, then rows of pre-formatted cells.
class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(open_out(path)) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// HMM parameters and observations
// ---------------------------------------------------------------------------

inline json matrix_rows(const Matrix<double>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

inline Matrix<double> parse_rows(const json& rows, std::size_t n_rows, std::size_t n_cols, const std::string& field) {
  if (!rows.is_array() || rows.size() != n_rows) {
    throw ParseError("field '" + field + "' must be an array of " + std::to_string(n_rows) + " rows");
  }
  Matrix<double> m(n_rows, n_cols);
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto& row = rows[r];
    if (!row.is_array() || row.size() != n_cols) {
      throw ParseError("field '" + field + "' row " + std::to_string(r) + " must have " + std::to_string(n_cols) +
                       " entries");
    }
    for (std::size_t c = 0; c < n_cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

inline json to_json(const HmmParams& p) {
  return json{{"S", p.states()},
              {"W", p.symbols()},
              {"initial", p.initial().vec()},
              {"transitions", matrix_rows(p.transitions())},
              {"emissions", matrix_rows(p.emissions())}};
}

inline HmmParams hmm_params_from_json(const json& j) {
  try {
    const auto s = j.at("S").get<std::size_t>();
    const auto w = j.at("W").get<std::size_t>();
    auto initial = j.at("initial").get<std::vector<double>>();
    if (initial.size() != s) throw ParseError("field 'initial' must have S entries");
    return HmmParams::from_matrices(std::move(initial), parse_rows(j.at("transitions"), s, s, "transitions"),
                                    parse_rows(j.at("emissions"), s, w, "emissions"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("hmm params: ") + e.what());
  }
}

/// Text: one symbol per line. Binary: little-endian uint32 per symbol.
enum class SequenceFormat { text, binary };

inline SequenceFormat format_for(const fs::path& path) {
  return path.extension() == ".bin" ? SequenceFormat::binary : SequenceFormat::text;
}

inline void save_observations(const fs::path& path, const std::vector<std::uint32_t>& values, SequenceFormat format) {
  if (format == SequenceFormat::text) {
    auto out = open_out(path);
    for (auto v : values) out << v << '\n';
    return;
  }
  auto out = open_out(path, std::ios::out | std::ios::binary);
  for (std::uint32_t v : values) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

inline std::vector<std::uint32_t> load_sequence(const fs::path& path, SequenceFormat format) {
  std::vector<std::uint32_t> values;
  if (format == SequenceFormat::text) {
    auto in = open_in(path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(line, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || line.find_first_not_of(" \t\r", used) != std::string::npos ||
          v > std::numeric_limits<std::uint32_t>::max() || line[0] == '-') {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected a non-negative integer");
      }
      values.push_back(static_cast<std::uint32_t>(v));
    }
    return values;
  }
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) throw ParseError(path.string() + ": binary length is not a multiple of 4 bytes");
  for (std::size_t k = 0; k < bytes.size(); k += 4) {
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + k);
    values.push_back(std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
                     std::uint32_t(b[3]) << 24);
  }
  return values;
}

inline ObservationSequence load_observations(const fs::path& path, std::size_t alphabet) {
  return ObservationSequence(load_sequence(path, format_for(path)), alphabet);
}

// ---------------------------------------------------------------------------
// Topics
// ---------------------------------------------------------------------------

inline json to_json(const TopicMatrix& t, std::optional<double> eta) {
  return json{{"T", t.topics()},
              {"W", t.vocab_size()},
              {"eta", eta ? json(*eta) : json(nullptr)},
              {"topics", matrix_rows(t.matrix())}};
}

inline TopicMatrix topics_from_json(const json& j) {
  try {
    const auto t = j.at("T").get<std::size_t>();
    const auto w = j.at("W").get<std::size_t>();
    return TopicMatrix(parse_rows(j.at("topics"), t, w, "topics"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("topic matrix: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Corpus: JSONL, one document per line
//   {"id": int, "year": int|null, "tokens": [int, ...]}
// plus a vocabulary file with one word per line (line number = word id).
// ---------------------------------------------------------------------------

inline void save_corpus(const Corpus& corpus, const fs::path& path) {
  auto out = open_out(path);
  for (std::size_t d = 0; d < corpus.docs(); ++d) {
    json line;
    line["id"] = d;
    const auto& year = corpus.years()[d];
    line["year"] = year ? json(*year) : json(nullptr);
    line["tokens"] = std::vector<Symbol>(corpus.tokens().begin() + static_cast<long>(corpus.doc_begin(d)),
                                         corpus.tokens().begin() + static_cast<long>(corpus.doc_end(d)));
    out << line.dump() << '\n';
  }
}

/// Loads a JSONL corpus whose word ids must be < vocab_size. Document ids must
/// run 0, 1, 2, ... in file order.
inline Corpus load_corpus(const fs::path& path, std::size_t vocab_size) {
  auto in = open_in(path);
  std::vector<Symbol> tokens;
  std::vector<std::uint32_t> doc_of;
  std::vector<std::optional<int>> years;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!doc.is_object() || !doc.contains("id") || !doc.contains("tokens") || !doc["id"].is_number_integer() ||
        !doc["tokens"].is_array()) {
      throw ParseError(where + ": expected an object with integer 'id' and array 'tokens'");
    }
    const auto id = doc["id"].get<long long>();
    const auto expected = static_cast<long long>(years.size());
    if (id != expected) {
      throw ParseError(where + ": document id " + std::to_string(id) + " is not contiguous (expected " +
                       std::to_string(expected) + ")");
    }
    if (doc["tokens"].empty()) throw ParseError(where + ": document " + std::to_string(id) + " has no tokens");
    std::optional<int> year;
    if (doc.contains("year") && !doc["year"].is_null()) {
      if (!doc["year"].is_number_integer()) throw ParseError(where + ": 'year' must be an integer or null");
      year = doc["year"].get<int>();
    }
    std::size_t k = 0;
    for (const auto& tok : doc["tokens"]) {
      if (!tok.is_number_integer() || tok.get<long long>() < 0) {
        throw ParseError(where + ": document " + std::to_string(id) + " token " + std::to_string(k) +
                         " is not a non-negative integer");
      }
      const auto w = tok.get<long long>();
      if (static_cast<unsigned long long>(w) >= vocab_size) {
        throw ParseError(where + ": document " + std::to_string(id) + " token " + std::to_string(k) +
                         " (corpus index " + std::to_string(tokens.size()) + ") has word id " + std::to_string(w) +
                         " >= W=" + std::to_string(vocab_size));
      }
      tokens.push_back(static_cast<Symbol>(w));
      doc_of.push_back(static_cast<std::uint32_t>(id));
      ++k;
    }
    years.push_back(year);
  }
  return Corpus(std::move(tokens), std::move(doc_of), vocab_size, std::move(years));
}

inline std::vector<std::string> load_vocab(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.push_back(line);
  }
  return words;
}

inline void save_vocab(const std::vector<std::string>& words, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& w : words) out << w << '\n';
}

inline Corpus load_corpus_with_vocab(const fs::path& corpus_path, const fs::path& vocab_path) {
  return load_corpus(corpus_path, load_vocab(vocab_path).size());
}

// ---------------------------------------------------------------------------
// Run artifacts
// ---------------------------------------------------------------------------

inline void write_trace_csv(const fs::path& path, const std::vector<TracePoint>& trace,
                            const std::string& value_column = "log_likelihood") {
  CsvWriter csv(path, {"iteration", value_column});
  for (const auto& p : trace) csv.row({std::to_string(p.iteration), fmt(p.value)});
}

/// (token index, path, topic/state) rows.
template <class PathSet>
void write_assignments_csv(const fs::path& path, const PathSet& ps, const std::string& value_column = "topic") {
  auto out = open_out(path);
  out << "token,path," << value_column << '\n';
  for (std::size_t j = 0; j < ps.paths.size(); ++j) {
    for (std::size_t i = 0; i < ps.paths[j].size(); ++i) out << i << ',' << j << ',' << ps.paths[j][i] << '\n';
  }
}

inline LdaPathSet read_assignments_csv(const fs::path& path, std::size_t tokens) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);  // header
  std::map<std::size_t, Assignment> by_path;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream s(line);
    std::size_t i = 0, j = 0;
    unsigned long z = 0;
    char c1 = 0, c2 = 0;
    if (!(s >> i >> c1 >> j >> c2 >> z) || c1 != ',' || c2 != ',' || i >= tokens) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed assignment row");
    }
    auto& a = by_path[j];
    if (a.empty()) a.assign(tokens, 0);
    a[i] = static_cast<Topic>(z);
  }
  LdaPathSet ps;
  for (std::size_t j = 0; j < by_path.size(); ++j) {
    if (!by_path.count(j)) throw ParseError(path.string() + ": path indices are not contiguous");
    ps.paths.push_back(std::move(by_path[j]));
  }
  return ps;
}

}  // namespace multipath::io
