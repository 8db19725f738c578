#pragma once

// Static SVG 1.1 line plots of ResultTable columns. Output depends only on
// the table and the plot spec, so identical inputs give identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "hdstat/errors.hpp"
#include "hdstat/experiments/table.hpp"

namespace hdstat {

struct PlotSpec {
  std::string x;
  std::vector<std::string> y;
  bool log_x = false;
  bool log_y = false;
  std::string title;
  std::string x_label;
  std::string y_label;
  // Optional column whose distinct values split rows into separate curves.
  std::string group_by;
};

namespace detail {

inline std::string fmt(double v, int precision = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;
  double pixel_lo = 0.0, pixel_hi = 1.0;

  double transform(double v) const { return log ? std::log10(v) : v; }
  double map(double v) const {
    const double t = (transform(v) - lo) / (hi - lo);
    return pixel_lo + t * (pixel_hi - pixel_lo);
  }
  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::ceil(lo - 1e-12); e <= hi + 1e-12; e += 1.0) out.push_back(std::pow(10.0, e));
      if (out.size() < 2) {
        out = {std::pow(10.0, lo), std::pow(10.0, hi)};
      }
    } else {
      for (int i = 0; i <= 4; ++i) out.push_back(lo + (hi - lo) * i / 4.0);
    }
    return out;
  }
};

inline bool plottable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

inline void set_range(Axis& axis, const std::vector<double>& values) {
  double lo = INFINITY, hi = -INFINITY;
  for (double v : values)
    if (plottable(v, axis.log)) {
      lo = std::min(lo, axis.transform(v));
      hi = std::max(hi, axis.transform(v));
    }
  if (!(lo <= hi)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) {
    const double pad = std::max(std::abs(lo) * 0.05, 0.5);
    lo -= pad;
    hi += pad;
  }
  axis.lo = lo;
  axis.hi = hi;
}

}  // namespace detail

/// Renders the plot as an SVG document string.
inline std::string svg_plot_string(const ResultTable& table, const PlotSpec& spec) {
  if (table.rows.empty()) throw InvalidArgument("emit_svg_plot: table has no rows");
  detail::require(!spec.y.empty(), "emit_svg_plot: no y columns given");
  const std::vector<double> xs = table.numeric_column(spec.x);
  std::vector<std::vector<double>> ys;
  for (const auto& name : spec.y) ys.push_back(table.numeric_column(name));
  std::vector<std::string> groups(table.rows.size());
  std::vector<std::string> group_order;
  if (!spec.group_by.empty()) {
    const std::size_t g = table.column_index(spec.group_by);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const Cell& c = table.rows[r][g];
      groups[r] = std::holds_alternative<std::string>(c) ? std::get<std::string>(c)
                                                         : format_number(cell_value(c));
    }
  }
  for (const auto& g : groups)
    if (std::find(group_order.begin(), group_order.end(), g) == group_order.end())
      group_order.push_back(g);

  constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 55;
  detail::Axis ax{spec.log_x, 0, 1, kLeft, kWidth - kRight};
  detail::Axis ay{spec.log_y, 0, 1, kHeight - kBottom, kTop};
  detail::set_range(ax, xs);
  std::vector<double> all_y;
  for (const auto& col : ys) all_y.insert(all_y.end(), col.begin(), col.end());
  detail::set_range(ay, all_y);

  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + detail::fmt(kWidth, 0) +
       "\" height=\"" + detail::fmt(kHeight, 0) + "\" viewBox=\"0 0 " + detail::fmt(kWidth, 0) + " " +
       detail::fmt(kHeight, 0) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + detail::fmt(kWidth, 0) + "\" height=\"" +
       detail::fmt(kHeight, 0) + "\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    s += "<text x=\"" + detail::fmt(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         detail::xml_escape(spec.title) + "</text>\n";
  s += "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
  s += "<rect x=\"" + detail::fmt(kLeft) + "\" y=\"" + detail::fmt(kTop) + "\" width=\"" +
       detail::fmt(kWidth - kRight - kLeft) + "\" height=\"" + detail::fmt(kHeight - kBottom - kTop) +
       "\"/>\n</g>\n";
  s += "<g class=\"ticks\" fill=\"black\">\n";
  for (double t : ax.ticks()) {
    const double px = ax.map(t);
    s += "<line x1=\"" + detail::fmt(px) + "\" y1=\"" + detail::fmt(kHeight - kBottom) + "\" x2=\"" +
         detail::fmt(px) + "\" y2=\"" + detail::fmt(kHeight - kBottom + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::fmt(px) + "\" y=\"" + detail::fmt(kHeight - kBottom + 18) +
         "\" text-anchor=\"middle\">" + detail::tick_label(t) + "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t);
    s += "<line x1=\"" + detail::fmt(kLeft - 5) + "\" y1=\"" + detail::fmt(py) + "\" x2=\"" +
         detail::fmt(kLeft) + "\" y2=\"" + detail::fmt(py) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + detail::fmt(kLeft - 8) + "\" y=\"" + detail::fmt(py + 4) +
         "\" text-anchor=\"end\">" + detail::tick_label(t) + "</text>\n";
  }
  s += "</g>\n";
  const std::string x_label = (spec.x_label.empty() ? spec.x : spec.x_label) +
                              (spec.log_x ? " (log scale)" : "");
  const std::string y_label = (spec.y_label.empty() ? spec.y.front() : spec.y_label) +
                              (spec.log_y ? " (log scale)" : "");
  s += "<text class=\"xlabel\" x=\"" + detail::fmt((kLeft + kWidth - kRight) / 2) + "\" y=\"" +
       detail::fmt(kHeight - 12) + "\" text-anchor=\"middle\">" + detail::xml_escape(x_label) +
       "</text>\n";
  s += "<text class=\"ylabel\" x=\"16\" y=\"" + detail::fmt((kTop + kHeight - kBottom) / 2) +
       "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       detail::fmt((kTop + kHeight - kBottom) / 2) + ")\">" + detail::xml_escape(y_label) + "</text>\n";

  std::size_t series = 0;
  for (std::size_t c = 0; c < ys.size(); ++c) {
    for (const auto& group : group_order) {
      const char* colour = kPalette[series % (sizeof kPalette / sizeof *kPalette)];
      std::string d;
      bool pen_down = false;
      for (std::size_t r = 0; r < xs.size(); ++r) {
        if (groups[r] != group) continue;
        if (!detail::plottable(xs[r], spec.log_x) || !detail::plottable(ys[c][r], spec.log_y)) {
          pen_down = false;
          continue;
        }
        d += (d.empty() ? "" : " ");
        d += pen_down ? "L" : "M";
        d += detail::fmt(ax.map(xs[r])) + "," + detail::fmt(ay.map(ys[c][r]));
        pen_down = true;
      }
      std::string name = spec.y[c];
      if (!group.empty()) name += " " + spec.group_by + "=" + group;
      if (!d.empty())
        s += "<path class=\"series\" d=\"" + d + "\" fill=\"none\" stroke=\"" + colour +
             "\" stroke-width=\"1.5\"/>\n";
      const double ly = kTop + 14.0 * static_cast<double>(series);
      s += "<text class=\"legend\" x=\"" + detail::fmt(kWidth - kRight + 10) + "\" y=\"" +
           detail::fmt(ly + 8) + "\" fill=\"" + colour + "\">" + detail::xml_escape(name) + "</text>\n";
      ++series;
    }
  }
  s += "</svg>\n";
  return s;
}

/// Writes the plot to path. Nothing is written if the table or spec is invalid.
inline void emit_svg_plot(const ResultTable& table, const PlotSpec& spec, const std::string& path) {
  const std::string text = svg_plot_string(table, spec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out.flush()) throw IoError("write failed for " + path);
}

}  // namespace hdstat
