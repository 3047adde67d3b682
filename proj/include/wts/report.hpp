#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace wts {

inline std::string format_g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / (v.size() - 1));
}

inline double pearson(const std::vector<double>& x,
                      const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nan("");
  double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

inline nlohmann::json stats_json(const std::vector<double>& v) {
  return {{"mean", mean_of(v)},
          {"median", median_of(v)},
          {"stddev", stddev_of(v)}};
}

// Self-contained static SVG scatter with the y = x reference line.
inline std::string svg_scatter(const std::vector<double>& xs,
                               const std::vector<double>& ys,
                               const std::string& xlabel,
                               const std::string& ylabel,
                               const std::string& title) {
  const int W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 55;
  double lo = 0.0, hi = 1e-6;
  for (double v : xs) { lo = std::min(lo, v); hi = std::max(hi, v); }
  for (double v : ys) { lo = std::min(lo, v); hi = std::max(hi, v); }
  double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto px = [&](double v) {
    return ml + (v - lo) / (hi - lo) * (W - ml - mr);
  };
  auto py = [&](double v) {
    return H - mb - (v - lo) / (hi - lo) * (H - mt - mb);
  };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  // axes
  s << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
    << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
    << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  // ticks
  for (int i = 0; i <= 4; ++i) {
    double v = lo + i * (hi - lo) / 4;
    char lbl[32];
    std::snprintf(lbl, sizeof(lbl), "%.3g", v);
    s << "<text x=\"" << px(v) << "\" y=\"" << H - mb + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"11\">" << lbl << "</text>\n";
    s << "<text x=\"" << ml - 8 << "\" y=\"" << py(v) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"11\">" << lbl << "</text>\n";
  }
  s << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"13\">" << xlabel << "</text>\n";
  s << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
       "transform=\"rotate(-90 16 " << (mt + H - mb) / 2 << ")\">" << ylabel
    << "</text>\n";
  // y = x reference line
  s << "<line x1=\"" << px(lo) << "\" y1=\"" << py(lo) << "\" x2=\"" << px(hi)
    << "\" y2=\"" << py(hi)
    << "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
  for (size_t i = 0; i < xs.size(); ++i)
    s << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i])
      << "\" r=\"4\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n";
  s << "</svg>\n";
  return s.str();
}

inline std::string svg_line_plot(const std::vector<double>& xs,
                                 const std::vector<double>& ys,
                                 const std::string& xlabel,
                                 const std::string& ylabel,
                                 const std::string& title) {
  const int W = 640, H = 480, ml = 70, mr = 20, mt = 40, mb = 55;
  double xlo = xs.front(), xhi = xs.back();
  double ylo = 0.0, yhi = 1e-6;
  for (double v : ys) { ylo = std::min(ylo, v); yhi = std::max(yhi, v); }
  double pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;
  auto px = [&](double v) {
    return ml + (v - xlo) / std::max(1e-12, xhi - xlo) * (W - ml - mr);
  };
  auto py = [&](double v) {
    return H - mb - (v - ylo) / (yhi - ylo) * (H - mt - mb);
  };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
    << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
    << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"13\">" << xlabel << "</text>\n";
  s << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
       "transform=\"rotate(-90 16 " << (mt + H - mb) / 2 << ")\">" << ylabel
    << "</text>\n";
  s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" "
       "points=\"";
  for (size_t i = 0; i < xs.size(); ++i)
    s << px(xs[i]) << "," << py(ys[i]) << " ";
  s << "\"/>\n";
  for (size_t i = 0; i < xs.size(); ++i) {
    s << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i])
      << "\" r=\"4\" fill=\"steelblue\"/>\n";
    char lbl[32];
    std::snprintf(lbl, sizeof(lbl), "%g", xs[i]);
    s << "<text x=\"" << px(xs[i]) << "\" y=\"" << H - mb + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"11\">" << lbl << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    double v = ylo + i * (yhi - ylo) / 4;
    char lbl[32];
    std::snprintf(lbl, sizeof(lbl), "%.3g", v);
    s << "<text x=\"" << ml - 8 << "\" y=\"" << py(v) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"11\">" << lbl << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << body;
}

}  // namespace wts
