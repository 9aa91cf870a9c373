#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "formlab/harness/config.hpp"

namespace formlab::harness {

inline constexpr const char* kMetricsHeader =
    "method,env,N,M,seed,step,return_mean,return_std,demo_logp,imit_logp,disc_prob,wall_s";
inline constexpr int kMetricsSchemaVersion = 1;

/// One evaluation. Quantities a method does not produce are NaN. A failed
/// sweep cell is a row with step = -1.
struct MetricsRow {
  std::string method;
  std::string env;
  int n = 0;
  long m = 1;
  std::uint64_t seed = 0;
  long step = 0;
  double return_mean = std::nan("");
  double return_std = std::nan("");
  double demo_logp = std::nan("");
  double imit_logp = std::nan("");
  double disc_prob = std::nan("");
  double wall_s = 0.0;

  bool failed() const { return step < 0; }
};

inline std::string format_value(double x) {
  if (std::isnan(x)) return "nan";
  return detail::format_real(x);
}

inline double parse_value(const std::string& s) {
  if (s == "nan") return std::nan("");
  return detail::parse_number<double>(s);
}

inline std::string format_row(const MetricsRow& r) {
  std::ostringstream os;
  os << r.method << ',' << r.env << ',' << r.n << ',' << r.m << ',' << r.seed << ',' << r.step << ','
     << format_value(r.return_mean) << ',' << format_value(r.return_std) << ',' << format_value(r.demo_logp) << ','
     << format_value(r.imit_logp) << ',' << format_value(r.disc_prob) << ',' << format_value(r.wall_s);
  return os.str();
}

inline MetricsRow parse_row(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) f.push_back(cur);
  if (f.size() != 12) throw StructuralError("metrics row has " + std::to_string(f.size()) + " fields, expected 12");
  MetricsRow r;
  r.method = f[0];
  r.env = f[1];
  r.n = detail::parse_number<int>(f[2]);
  r.m = detail::parse_number<long>(f[3]);
  r.seed = detail::parse_number<std::uint64_t>(f[4]);
  r.step = detail::parse_number<long>(f[5]);
  r.return_mean = parse_value(f[6]);
  r.return_std = parse_value(f[7]);
  r.demo_logp = parse_value(f[8]);
  r.imit_logp = parse_value(f[9]);
  r.disc_prob = parse_value(f[10]);
  r.wall_s = parse_value(f[11]);
  return r;
}

/// Append-only CSV. A new file gets the header; an existing one must
/// already start with it.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : path_(path) {
    bool fresh = true;
    {
      std::ifstream in(path);
      std::string first;
      if (in && std::getline(in, first)) {
        if (first != kMetricsHeader) throw StructuralError(path + ": not a metrics file (header mismatch)");
        fresh = false;
      }
    }
    out_.open(path, std::ios::app);
    if (!out_) throw StructuralError("cannot open " + path + " for writing");
    if (fresh) out_ << kMetricsHeader << '\n';
    out_.flush();
  }
  void append(const MetricsRow& r) {
    out_ << format_row(r) << '\n';
    out_.flush();
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

inline std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw StructuralError(path + ": header mismatch");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(parse_row(line));
  return rows;
}

/// Seconds since construction, or always 0 when wall-clock logging is off
/// (keeps metrics files bit-reproducible).
class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace formlab::harness
