#include "reprobe/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace reprobe::svg {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 190, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  if (v != 0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-2)) {
    std::snprintf(buf, sizeof buf, "%.0e", v);
  } else {
    std::snprintf(buf, sizeof buf, "%g", v);
  }
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

std::string header(const std::string& title) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       escape_xml(title) + "</text>\n";
  return s;
}

std::string legend(const std::vector<std::string>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    const double x = kWidth - kRight + 15;
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 9) + "\" width=\"12\" height=\"12\" fill=\"" +
         color(i) + "\"/>\n";
    s += "<text x=\"" + num(x + 18) + "\" y=\"" + num(y + 1) + "\">" + escape_xml(labels[i]) + "</text>\n";
  }
  return s;
}

std::string axis_labels(const std::string& x_label, const std::string& y_label) {
  const double py = kHeight - kBottom;
  std::string s;
  s += "<text x=\"" + num((kLeft + kWidth - kRight) / 2) + "\" y=\"" + num(kHeight - 15) +
       "\" text-anchor=\"middle\">" + escape_xml(x_label) + "</text>\n";
  s += "<text transform=\"translate(18," + num((kTop + py) / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape_xml(y_label) + "</text>\n";
  return s;
}

}  // namespace

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render(const LineChart& chart) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  Range xr, yr;
  double min_pos = std::numeric_limits<double>::infinity();
  for (const auto& s : chart.series) {
    for (double x : s.x) {
      if (x > 0) min_pos = std::min(min_pos, x);
    }
  }
  if (!std::isfinite(min_pos)) min_pos = 1.0;
  auto tx = [&](double x) {
    if (!chart.log_x) return x;
    return std::log10(x > 0 ? x : min_pos / 10.0);
  };
  for (const auto& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.add(tx(s.x[i]));
      yr.add(s.y[i]);
      if (i < s.lo.size()) yr.add(s.lo[i]);
      if (i < s.hi.size()) yr.add(s.hi[i]);
    }
  }
  for (const auto& [y, cap] : chart.hlines) yr.add(y);
  xr.finish();
  yr.finish();
  const double ypad = 0.05 * (yr.hi - yr.lo);
  yr.lo -= ypad;
  yr.hi += ypad;
  auto px = [&](double x) { return kLeft + (tx(x) - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto pxt = [&](double t) { return kLeft + (t - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string s = header(chart.title);
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" +
       num(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : nice_ticks(yr.lo, yr.hi)) {
    s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(py(t)) +
         "\" y2=\"" + num(py(t)) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\">" +
         tick_label(t) + "</text>\n";
  }
  std::vector<double> xticks;
  if (chart.log_x) {
    for (double e = std::ceil(xr.lo); e <= std::floor(xr.hi); e += 1) xticks.push_back(e);
  } else {
    xticks = nice_ticks(xr.lo, xr.hi);
  }
  for (double t : xticks) {
    const std::string label = chart.log_x ? "1e" + std::to_string(static_cast<int>(t)) : tick_label(t);
    s += "<line x1=\"" + num(pxt(t)) + "\" x2=\"" + num(pxt(t)) + "\" y1=\"" + num(kTop + ph) +
         "\" y2=\"" + num(kTop + ph + 5) + "\" stroke=\"#444\"/>\n";
    s += "<text x=\"" + num(pxt(t)) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
         label + "</text>\n";
  }
  for (const auto& [y, cap] : chart.hlines) {
    s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(py(y)) +
         "\" y2=\"" + num(py(y)) + "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    s += "<text x=\"" + num(kLeft + pw - 4) + "\" y=\"" + num(py(y) - 4) +
         "\" text-anchor=\"end\" fill=\"#666\">" + escape_xml(cap) + "</text>\n";
  }
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& ser = chart.series[k];
    labels.push_back(ser.label);
    if (ser.lo.size() == ser.x.size() && ser.hi.size() == ser.x.size() && !ser.x.empty()) {
      std::string pts;
      for (std::size_t i = 0; i < ser.x.size(); ++i) pts += num(px(ser.x[i])) + "," + num(py(ser.hi[i])) + " ";
      for (std::size_t i = ser.x.size(); i-- > 0;) pts += num(px(ser.x[i])) + "," + num(py(ser.lo[i])) + " ";
      s += "<polygon points=\"" + pts + "\" fill=\"" + color(k) + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (std::isfinite(ser.y[i])) pts += num(px(ser.x[i])) + "," + num(py(ser.y[i])) + " ";
    }
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color(k) + "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (!std::isfinite(ser.y[i])) continue;
      s += "<circle cx=\"" + num(px(ser.x[i])) + "\" cy=\"" + num(py(ser.y[i])) + "\" r=\"3\" fill=\"" +
           color(k) + "\"/>\n";
    }
  }
  s += legend(labels);
  s += axis_labels(chart.x_label, chart.y_label);
  if (chart.series.empty()) {
    s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kTop + ph / 2) +
         "\" text-anchor=\"middle\" fill=\"#888\">no data</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string render(const BarChart& chart) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  Range yr;
  yr.add(0.0);
  for (const auto& g : chart.groups) {
    for (double v : g.values) yr.add(v);
  }
  yr.finish();
  const double ypad = 0.05 * (yr.hi - yr.lo);
  yr.hi += ypad;
  if (yr.lo < 0) yr.lo -= ypad;
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string s = header(chart.title);
  s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" +
       num(ph) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : nice_ticks(yr.lo, yr.hi)) {
    s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(py(t)) +
         "\" y2=\"" + num(py(t)) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(t) + 4) + "\" text-anchor=\"end\">" +
         tick_label(t) + "</text>\n";
  }
  const std::size_t ng = std::max<std::size_t>(chart.groups.size(), 1);
  const std::size_t ns = std::max<std::size_t>(chart.series_labels.size(), 1);
  const double gw = pw / static_cast<double>(ng);
  const double bw = 0.8 * gw / static_cast<double>(ns);
  for (std::size_t g = 0; g < chart.groups.size(); ++g) {
    const double gx = kLeft + gw * static_cast<double>(g) + 0.1 * gw;
    for (std::size_t k = 0; k < chart.groups[g].values.size(); ++k) {
      const double v = chart.groups[g].values[k];
      if (!std::isfinite(v)) continue;
      const double top = py(std::max(v, 0.0)), bot = py(std::min(v, 0.0));
      s += "<rect x=\"" + num(gx + bw * static_cast<double>(k)) + "\" y=\"" + num(top) + "\" width=\"" +
           num(bw * 0.95) + "\" height=\"" + num(std::max(bot - top, 0.5)) + "\" fill=\"" + color(k) + "\"/>\n";
    }
    s += "<text x=\"" + num(gx + 0.4 * gw) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
         escape_xml(chart.groups[g].label) + "</text>\n";
  }
  s += "<line x1=\"" + num(kLeft) + "\" x2=\"" + num(kLeft + pw) + "\" y1=\"" + num(py(0)) + "\" y2=\"" +
       num(py(0)) + "\" stroke=\"#444\"/>\n";
  s += legend(chart.series_labels);
  s += axis_labels("", chart.y_label);
  if (chart.groups.empty()) {
    s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kTop + ph / 2) +
         "\" text-anchor=\"middle\" fill=\"#888\">no data</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace reprobe::svg
