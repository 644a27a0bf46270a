#include "qjump/histogram_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "qjump/error.hpp"

namespace qjump {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, std::size_t line) {
  const std::string t = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": not a number: '" + t + "'");
  }
  return v;
}

struct Table {
  std::string header;
  std::vector<double> first;
  std::vector<double> second;
  std::vector<std::size_t> lines;
};

Table read_two_columns(std::istream& in) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty()) {
      t.header = line;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected two comma-separated fields");
    }
    t.first.push_back(parse_double(line.substr(0, comma), lineno));
    t.second.push_back(parse_double(line.substr(comma + 1), lineno));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw ParseError("missing CSV header");
  return t;
}

// Strictly increasing, uniformly spaced; returns the spacing.
double check_uniform(const Table& t) {
  if (t.first.size() < 2) throw ParseError("need at least 2 rows");
  const double step = (t.first.back() - t.first.front()) / static_cast<double>(t.first.size() - 1);
  if (!(step > 0.0)) throw ParseError("time column must be strictly increasing");
  for (std::size_t i = 1; i < t.first.size(); ++i) {
    const double d = t.first[i] - t.first[i - 1];
    if (!(d > 0.0)) {
      throw ParseError("line " + std::to_string(t.lines[i]) + ": times not strictly increasing");
    }
    if (std::abs(d - step) > 1e-6 * step) {
      throw ParseError("line " + std::to_string(t.lines[i]) + ": times not uniformly spaced");
    }
  }
  return step;
}

Histogram to_histogram(const Table& t) {
  const double step = check_uniform(t);
  Histogram h;
  h.bin_width = step * kPicosecond;
  h.t_start = t.first.front() * kPicosecond;
  h.counts.reserve(t.second.size());
  for (std::size_t i = 0; i < t.second.size(); ++i) {
    const double c = t.second[i];
    if (c < 0.0 || c != std::floor(c)) {
      throw ParseError("line " + std::to_string(t.lines[i]) + ": counts must be non-negative integers");
    }
    h.counts.push_back(c);
  }
  return h;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  return out;
}

std::string fmt_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace

Histogram read_histogram_csv(std::istream& in) {
  const Table t = read_two_columns(in);
  if (t.header != "bin_center_ps,counts") {
    throw ParseError("expected header 'bin_center_ps,counts', got '" + t.header + "'");
  }
  return to_histogram(t);
}

Histogram read_histogram_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_histogram_csv(in);
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_center_ps,counts\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    out << fmt_g(h.center(i) / kPicosecond, 12) << ',' << fmt_g(h.counts[i], 17) << '\n';
  }
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
  auto out = open_out(path);
  write_histogram_csv(out, h);
}

DetectorResponse read_response_csv(std::istream& in, std::optional<BackgroundFloor> floor) {
  const Table t = read_two_columns(in);
  if (t.header == "bin_center_ps,counts") return normalize_response(to_histogram(t), floor);
  if (t.header != "offset_ps,weight") {
    throw ParseError("expected header 'bin_center_ps,counts' or 'offset_ps,weight', got '" +
                     t.header + "'");
  }
  DetectorResponse g;
  g.bin_width = check_uniform(t) * kPicosecond;
  for (std::size_t i = 0; i < t.first.size(); ++i) {
    if (t.second[i] < 0.0) throw ParseError("line " + std::to_string(t.lines[i]) + ": negative weight");
    g.offsets.push_back(t.first[i] * kPicosecond);
    g.weights.push_back(t.second[i]);
  }
  const double sum = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
  if (!(sum > 0.0)) throw EmptyHistogram("response has zero total weight");
  for (double& w : g.weights) w /= sum;
  g.validate();
  return g;
}

DetectorResponse read_response_csv(const std::filesystem::path& path,
                                   std::optional<BackgroundFloor> floor) {
  auto in = open_in(path);
  return read_response_csv(in, floor);
}

void write_response_csv(std::ostream& out, const DetectorResponse& g) {
  out << "offset_ps,weight\n";
  // A lone delta weight is padded with an empty neighbour so the bin width
  // survives the round trip.
  const std::size_t n = std::max<std::size_t>(g.size(), 2);
  for (std::size_t k = 0; k < n; ++k) {
    const double offset = k < g.size() ? g.offsets[k] : g.offsets.back() + g.bin_width * (k - g.size() + 1);
    const double weight = k < g.size() ? g.weights[k] : 0.0;
    out << fmt_g(offset / kPicosecond, 15) << ',' << fmt_g(weight, 17) << '\n';
  }
}

void write_response_csv(const std::filesystem::path& path, const DetectorResponse& g) {
  auto out = open_out(path);
  write_response_csv(out, g);
}

}  // namespace qjump
