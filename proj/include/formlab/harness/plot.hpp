#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "formlab/harness/metrics.hpp"

namespace formlab::harness {

struct Series {
  std::string name;
  std::vector<double> x, y;
  std::vector<double> err;  // empty, or one half-width per point (0 = no bar)
};

struct Range {
  double lo = 0.0, hi = 1.0;
};

/// Data extent widened by 5% of the span on each side. A single value gets
/// a window of +-5% of its magnitude (+-0.5 at zero).
inline Range padded_range(double lo, double hi) {
  if (!(hi > lo)) {
    const double half = lo == 0.0 ? 0.5 : 0.05 * std::abs(lo);
    return {lo - half, lo + half};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

struct PlotFrame {
  double width = 640, height = 420;
  double left = 80, top = 40, plot_w = 520, plot_h = 320;
};

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

/// Line plot with markers and optional vertical error bars. With `log_x`
/// the x values are placed by log10.
inline std::string render_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<Series>& series, bool log_x, const PlotFrame& f = {}) {
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xlo = std::min(xlo, tx(s.x[i]));
      xhi = std::max(xhi, tx(s.x[i]));
      const double e = s.err.empty() ? 0.0 : s.err[i];
      ylo = std::min(ylo, s.y[i] - e);
      yhi = std::max(yhi, s.y[i] + e);
    }
  const Range xr = padded_range(xlo, xhi), yr = padded_range(ylo, yhi);
  auto px = [&](double x) { return f.left + (tx(x) - xr.lo) / (xr.hi - xr.lo) * f.plot_w; };
  auto py = [&](double y) { return f.top + (yr.hi - y) / (yr.hi - yr.lo) * f.plot_h; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream os;
  os.precision(10);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"" << f.width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << svg_escape(title) << "</text>\n";
  os << "<rect class=\"plot-area\" x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.plot_w
     << "\" height=\"" << f.plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<g class=\"range\" data-xlo=\"" << xr.lo << "\" data-xhi=\"" << xr.hi << "\" data-ylo=\"" << yr.lo
     << "\" data-yhi=\"" << yr.hi << "\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xr.lo + k * (xr.hi - xr.lo) / 4, yv = yr.lo + k * (yr.hi - yr.lo) / 4;
    const double xp = f.left + k * f.plot_w / 4, yp = f.top + f.plot_h - k * f.plot_h / 4;
    std::ostringstream xl, yl;
    xl.precision(3);
    yl.precision(3);
    xl << (log_x ? std::pow(10.0, xv) : xv);
    yl << yv;
    os << "<text x=\"" << xp << "\" y=\"" << f.top + f.plot_h + 16 << "\" text-anchor=\"middle\">" << xl.str()
       << "</text>\n";
    os << "<text x=\"" << f.left - 6 << "\" y=\"" << yp + 4 << "\" text-anchor=\"end\">" << yl.str() << "</text>\n";
  }
  os << "<text x=\"" << f.left + f.plot_w / 2 << "\" y=\"" << f.height - 8 << "\" text-anchor=\"middle\">"
     << svg_escape(xlabel) << "</text>\n";
  os << "<text transform=\"translate(16," << f.top + f.plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << svg_escape(ylabel) << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* col = colors[si % 6];
    os << "<g class=\"series\" data-name=\"" << svg_escape(s.name) << "\" stroke=\"" << col << "\" fill=\"" << col
       << "\">\n";
    if (s.x.size() > 1) {
      os << "<polyline fill=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? " " : "") << px(s.x[i]) << "," << py(s.y[i]);
      os << "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!s.err.empty() && s.err[i] > 0)
        os << "<line class=\"errbar\" x1=\"" << px(s.x[i]) << "\" x2=\"" << px(s.x[i]) << "\" y1=\""
           << py(s.y[i] - s.err[i]) << "\" y2=\"" << py(s.y[i] + s.err[i]) << "\"/>\n";
      os << "<circle class=\"point\" cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\"/>\n";
    }
    os << "<text x=\"" << f.left + f.plot_w + 6 << "\" y=\"" << f.top + 14 + 16 * static_cast<double>(si)
       << "\" stroke=\"none\">" << svg_escape(s.name) << "</text>\n";
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Final evaluation of each run: the row with the largest step per
/// (method, env, N, M, seed). Failed cells are skipped.
inline std::vector<MetricsRow> terminal_rows(const std::vector<MetricsRow>& rows) {
  std::map<std::tuple<std::string, std::string, int, long, std::uint64_t>, MetricsRow> last;
  for (const auto& r : rows) {
    if (r.failed()) continue;
    auto key = std::make_tuple(r.method, r.env, r.n, r.m, r.seed);
    auto it = last.find(key);
    if (it == last.end() || r.step >= it->second.step) last[key] = r;
  }
  std::vector<MetricsRow> out;
  for (auto& [k, r] : last) out.push_back(r);
  return out;
}

struct CellStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one seed
  int count = 0;
};

inline CellStats cell_stats(const std::vector<double>& v) {
  CellStats s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

/// Final return against pool size, one plot per (env, N) and one series per
/// method. Keys of the result are file names.
inline std::map<std::string, std::string> pool_size_plots(const std::vector<MetricsRow>& rows,
                                                          std::vector<std::string>* warnings = nullptr) {
  std::map<std::pair<std::string, int>, std::map<std::string, std::map<long, std::vector<double>>>> groups;
  for (const auto& r : terminal_rows(rows))
    if (std::isfinite(r.return_mean)) groups[{r.env, r.n}][r.method][r.m].push_back(r.return_mean);
  std::map<std::string, std::string> out;
  if (groups.empty() && warnings) warnings->push_back("no finished runs to plot");
  for (const auto& [key, methods] : groups) {
    std::vector<Series> series;
    for (const auto& [method, cells] : methods) {
      Series s{method, {}, {}, {}};
      for (const auto& [m, values] : cells) {
        const CellStats c = cell_stats(values);
        s.x.push_back(static_cast<double>(m));
        s.y.push_back(c.mean);
        s.err.push_back(c.stddev);
      }
      series.push_back(std::move(s));
    }
    const std::string name = "return_vs_M_" + key.first + "_N" + std::to_string(key.second) + ".svg";
    out[name] = render_svg(key.first + ", N = " + std::to_string(key.second), "pool size M", "final return", series,
                           true);
  }
  return out;
}

/// Per-step episode trace: columns t,demo_logp,imit_logp,task_reward.
inline std::string trace_plot(const std::string& title, const Mat& trace) {
  require(trace.rows() > 0, "empty trace");
  require(trace.cols() == 4, "trace needs columns t, demo_logp, imit_logp, task_reward");
  std::vector<Series> s{{"demo logp", {}, {}, {}}, {"imitator logp", {}, {}, {}}, {"task reward", {}, {}, {}}};
  for (Eigen::Index i = 0; i < trace.rows(); ++i)
    for (int k = 0; k < 3; ++k) {
      s[static_cast<std::size_t>(k)].x.push_back(trace(i, 0));
      s[static_cast<std::size_t>(k)].y.push_back(trace(i, k + 1));
    }
  return render_svg(title, "time step", "value", s, false);
}

}  // namespace formlab::harness
