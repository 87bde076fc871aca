#pragma once

// Sensor topology, CSV ingestion, normalization and sliding-window
// segmentation of multivariate sensor streams.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dgs/error.hpp"
#include "dgs/matrix.hpp"

namespace dgs {

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  // Strip a UTF-8 byte-order mark as well as whitespace.
  if (s.substr(0, 3) == "\xEF\xBB\xBF") b = 3;
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Static sensor set, binary physical adjacency and sensor-type assignment.
struct SensorTopology {
  std::vector<std::string> sensor_names;
  std::vector<std::string> type_names;
  std::vector<std::size_t> type_of;  // sensor -> type index
  Matrix adjacency;                  // n x n, symmetric, {0,1}, zero diagonal

  std::size_t n() const { return sensor_names.size(); }
  std::size_t k() const { return type_names.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < sensor_names.size(); ++i)
      if (sensor_names[i] == name) return i;
    return std::nullopt;
  }

  std::vector<std::vector<std::size_t>> neighbors() const {
    std::vector<std::vector<std::size_t>> out(n());
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = 0; j < n(); ++j)
        if (adjacency(i, j) != 0.0) out[i].push_back(j);
    return out;
  }

  // Throws DataError when any structural invariant is violated.
  void validate() const {
    const std::size_t count = n();
    if (count == 0) throw DataError("topology has no sensors");
    if (type_of.size() != count) throw DataError("topology: type assignment size mismatch");
    if (adjacency.rows() != count || adjacency.cols() != count) {
      throw DataError("topology: adjacency shape " + adjacency.shape() + " for " +
                      std::to_string(count) + " sensors");
    }
    std::vector<std::size_t> used(k(), 0);
    for (std::size_t i = 0; i < count; ++i) {
      if (type_of[i] >= k()) throw DataError("topology: sensor type index out of range");
      ++used[type_of[i]];
      if (adjacency(i, i) != 0.0) throw DataError("topology: self-loop on " + sensor_names[i]);
      for (std::size_t j = 0; j < count; ++j) {
        const double a = adjacency(i, j);
        if (a != 0.0 && a != 1.0) throw DataError("topology: adjacency entries must be 0 or 1");
        if (a != adjacency(j, i)) throw DataError("topology: adjacency not symmetric");
      }
    }
    for (std::size_t t = 0; t < used.size(); ++t)
      if (used[t] == 0) throw DataError("topology: type '" + type_names[t] + "' has no sensors");
  }
};

// Parses `sensor <name> <type>` and `edge <a> <b>` lines. Blank lines and
// lines starting with '#' are skipped.
inline SensorTopology parse_topology(std::istream& in) {
  SensorTopology topo;
  std::map<std::string, std::size_t> type_index;
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string kind, a, b, extra;
    ls >> kind >> a >> b;
    if (a.empty() || b.empty() || (ls >> extra)) {
      throw DataError("topology line " + std::to_string(line_no) + ": expected 3 fields");
    }
    if (kind == "sensor") {
      if (topo.index_of(a)) throw DataError("topology: duplicate sensor '" + a + "'");
      auto [it, inserted] = type_index.try_emplace(b, topo.type_names.size());
      if (inserted) topo.type_names.push_back(b);
      topo.sensor_names.push_back(a);
      topo.type_of.push_back(it->second);
    } else if (kind == "edge") {
      edges.emplace_back(a, b);
    } else {
      throw DataError("topology line " + std::to_string(line_no) + ": unknown record '" + kind +
                      "'");
    }
  }
  topo.adjacency = Matrix(topo.n(), topo.n());
  for (const auto& [a, b] : edges) {
    const auto ia = topo.index_of(a);
    const auto ib = topo.index_of(b);
    if (!ia) throw DataError("topology: edge references unknown sensor '" + a + "'");
    if (!ib) throw DataError("topology: edge references unknown sensor '" + b + "'");
    if (*ia == *ib) throw DataError("topology: self-edge on '" + a + "'");
    topo.adjacency(*ia, *ib) = 1.0;
    topo.adjacency(*ib, *ia) = 1.0;
  }
  topo.validate();
  return topo;
}

inline SensorTopology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open topology file '" + path + "'");
  return parse_topology(in);
}

inline void write_topology(std::ostream& out, const SensorTopology& topo) {
  for (std::size_t i = 0; i < topo.n(); ++i)
    out << "sensor " << topo.sensor_names[i] << ' ' << topo.type_names[topo.type_of[i]] << '\n';
  for (std::size_t i = 0; i < topo.n(); ++i)
    for (std::size_t j = i + 1; j < topo.n(); ++j)
      if (topo.adjacency(i, j) != 0.0)
        out << "edge " << topo.sensor_names[i] << ' ' << topo.sensor_names[j] << '\n';
}

// Time-major multivariate stream: values is (timestamps x sensors).
struct RawStream {
  Matrix values;
  std::vector<int> labels;
  std::vector<std::string> timestamps;

  std::size_t length() const { return values.rows(); }
  std::size_t anomaly_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  }
};

namespace detail {

inline bool is_label_header(const std::string& name, const std::string& wanted) {
  const std::string l = lower(name);
  if (!wanted.empty()) return l == lower(wanted);
  return l == "label" || l == "normal/attack" || l == "attack";
}

inline std::optional<int> parse_label(std::string_view cell) {
  std::string t;
  for (char c : cell)
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(c);
  t = lower(t);
  if (t == "0" || t == "normal" || t == "0.0") return 0;
  if (t == "1" || t == "attack" || t == "1.0") return 1;
  return std::nullopt;
}

}  // namespace detail

// Reads a CSV with a header row. Sensor columns are matched by name to the
// topology and reordered into topology order. A column named `timestamp`
// (or the first column, if it is not a sensor) is kept verbatim. The label
// column accepts {0,1} or {Normal,Attack}; when absent every label is 0.
inline RawStream read_csv(std::istream& in, const SensorTopology& topo,
                          const std::string& label_column = "") {
  std::string header_line;
  if (!std::getline(in, header_line)) throw DataError("csv: missing header row");
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
  const auto header = detail::split(header_line, ',');

  std::vector<std::optional<std::size_t>> column_sensor(header.size());
  std::optional<std::size_t> label_col;
  std::optional<std::size_t> time_col;
  std::vector<bool> seen(topo.n(), false);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = detail::trim(header[c]);
    if (const auto s = topo.index_of(name)) {
      if (seen[*s]) throw DataError("csv: duplicate sensor column '" + name + "'");
      seen[*s] = true;
      column_sensor[c] = *s;
    } else if (!label_col && detail::is_label_header(name, label_column)) {
      label_col = c;
    } else if (!time_col && (detail::lower(name) == "timestamp" || c == 0)) {
      time_col = c;
    } else {
      throw DataError("csv: unknown column '" + name + "'");
    }
  }
  for (std::size_t s = 0; s < topo.n(); ++s)
    if (!seen[s]) throw DataError("csv: missing sensor column '" + topo.sensor_names[s] + "'");
  if (!label_column.empty() && !label_col) {
    throw DataError("csv: label column '" + label_column + "' not found");
  }

  RawStream stream;
  std::vector<double> values;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) {
      throw DataError("csv row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    }
    std::vector<double> rec(topo.n());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (column_sensor[c]) {
        const auto v = detail::parse_double(cells[c]);
        if (!v) {
          throw DataError("csv row " + std::to_string(row) + ", column '" +
                          detail::trim(header[c]) + "': cannot parse '" + cells[c] + "'");
        }
        rec[*column_sensor[c]] = *v;
      }
    }
    values.insert(values.end(), rec.begin(), rec.end());
    if (label_col) {
      const auto l = detail::parse_label(cells[*label_col]);
      if (!l) {
        throw DataError("csv row " + std::to_string(row) + ", column '" +
                        detail::trim(header[*label_col]) + "': bad label '" + cells[*label_col] +
                        "'");
      }
      stream.labels.push_back(*l);
    } else {
      stream.labels.push_back(0);
    }
    stream.timestamps.push_back(time_col ? detail::trim(cells[*time_col]) : std::to_string(row - 1));
  }
  stream.values = Matrix(row, topo.n(), std::move(values));
  return stream;
}

inline RawStream load_csv(const std::string& path, const SensorTopology& topo,
                          const std::string& label_column = "") {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open csv file '" + path + "'");
  return read_csv(in, topo, label_column);
}

inline void write_csv(std::ostream& out, const RawStream& stream, const SensorTopology& topo) {
  out << "timestamp";
  for (const auto& name : topo.sensor_names) out << ',' << name;
  out << ",label\n";
  for (std::size_t t = 0; t < stream.length(); ++t) {
    out << (t < stream.timestamps.size() ? stream.timestamps[t] : std::to_string(t));
    for (std::size_t s = 0; s < topo.n(); ++s) out << ',' << detail::format_double(stream.values(t, s));
    out << ',' << stream.labels[t] << '\n';
  }
}

// Rows [begin, end) of a stream.
inline RawStream slice_stream(const RawStream& s, std::size_t begin, std::size_t end) {
  end = std::min(end, s.length());
  begin = std::min(begin, end);
  RawStream out;
  const std::size_t n = s.values.cols();
  std::vector<double> v(s.values.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                        s.values.data().begin() + static_cast<std::ptrdiff_t>(end * n));
  out.values = Matrix(end - begin, n, std::move(v));
  out.labels.assign(s.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    s.labels.begin() + static_cast<std::ptrdiff_t>(end));
  if (s.timestamps.size() == s.length()) {
    out.timestamps.assign(s.timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                          s.timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

inline constexpr double kStdFloor = 1e-8;

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // each >= kStdFloor
};

// Per-sensor mean and population standard deviation over rows [begin, end).
inline NormalizationStats fit_normalizer(const RawStream& stream, std::size_t begin,
                                         std::size_t end) {
  if (begin >= end || end > stream.length()) {
    throw DataError("fit_normalizer: empty or out-of-range training range [" +
                    std::to_string(begin) + "," + std::to_string(end) + ")");
  }
  const std::size_t n = stream.values.cols();
  const double count = static_cast<double>(end - begin);
  NormalizationStats stats{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t t = begin; t < end; ++t)
    for (std::size_t s = 0; s < n; ++s) stats.mean[s] += stream.values(t, s);
  for (double& m : stats.mean) m /= count;
  for (std::size_t t = begin; t < end; ++t)
    for (std::size_t s = 0; s < n; ++s) {
      const double d = stream.values(t, s) - stats.mean[s];
      stats.stddev[s] += d * d;
    }
  for (double& sd : stats.stddev) sd = std::max(std::sqrt(sd / count), kStdFloor);
  return stats;
}

inline RawStream apply_normalizer(const NormalizationStats& stats, RawStream stream) {
  const std::size_t n = stream.values.cols();
  if (stats.mean.size() != n || stats.stddev.size() != n) {
    throw DimensionError("apply_normalizer: stats for " + std::to_string(stats.mean.size()) +
                         " sensors, stream has " + std::to_string(n));
  }
  for (std::size_t t = 0; t < stream.length(); ++t)
    for (std::size_t s = 0; s < n; ++s) {
      double& v = stream.values(t, s);
      v = (v - stats.mean[s]) / stats.stddev[s];
    }
  return stream;
}

// One window of the stream: T is sensors x window length.
struct Segment {
  Matrix T;
  std::size_t start = 0;
  std::vector<int> labels;
  int segment_label = 0;
  // The next window (timestamps [start + L, start + 2L)) when the stream has it.
  std::optional<Matrix> successor;

  std::size_t end() const { return start + T.cols(); }
};

inline Matrix window_matrix(const RawStream& stream, std::size_t start, std::size_t length) {
  const std::size_t n = stream.values.cols();
  Matrix T(n, length);
  for (std::size_t j = 0; j < length; ++j)
    for (std::size_t s = 0; s < n; ++s) T(s, j) = stream.values(start + j, s);
  return T;
}

inline std::size_t segment_count(std::size_t length, std::size_t window, std::size_t stride) {
  return length < window ? 0 : (length - window) / stride + 1;
}

// Windows start at 0, stride, 2*stride, ...; any trailing remainder is dropped.
inline std::vector<Segment> segment_stream(const RawStream& stream, std::size_t window,
                                           std::size_t stride) {
  if (window < 2) throw ConfigError("segment_stream: window length must be >= 2");
  if (stride < 1) throw ConfigError("segment_stream: stride must be >= 1");
  if (stream.length() < window) {
    throw DataError("segment_stream: stream length " + std::to_string(stream.length()) +
                    " shorter than one window of " + std::to_string(window));
  }
  const std::size_t count = segment_count(stream.length(), window, stride);
  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Segment seg;
    seg.start = i * stride;
    seg.T = window_matrix(stream, seg.start, window);
    seg.labels.assign(stream.labels.begin() + static_cast<std::ptrdiff_t>(seg.start),
                      stream.labels.begin() + static_cast<std::ptrdiff_t>(seg.start + window));
    seg.segment_label =
        std::any_of(seg.labels.begin(), seg.labels.end(), [](int l) { return l != 0; }) ? 1 : 0;
    if (seg.start + 2 * window <= stream.length()) {
      seg.successor = window_matrix(stream, seg.start + window, window);
    }
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace dgs
