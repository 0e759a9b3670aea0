#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "glidenav/errors.hpp"
#include "glidenav/nav_pipeline.hpp"

namespace glidenav {

namespace {

constexpr std::size_t kMaxPoints = 2000;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color;
  bool dashed = false;
};

double nice_step(double span, int target) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

struct Range {
  double lo = 0.0, hi = 1.0;
};

Range range_of(const std::vector<Series>& series, bool use_x) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : series) {
    for (double v : use_x ? s.x : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) return {};
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

// One framed panel with ticks, labels, series and legend at (ox, oy).
std::string panel(const std::vector<Series>& series, const std::string& title,
                  const std::string& xlabel, const std::string& ylabel, double ox, double oy,
                  double w, double h) {
  const double ml = 70, mr = 20, mt = 30, mb = 45;
  const double pw = w - ml - mr, ph = h - mt - mb;
  Range xr = range_of(series, true), yr = range_of(series, false);
  const double xs = nice_step(xr.hi - xr.lo, 6), ys = nice_step(yr.hi - yr.lo, 5);
  xr = {std::floor(xr.lo / xs) * xs, std::ceil(xr.hi / xs) * xs};
  yr = {std::floor(yr.lo / ys) * ys, std::ceil(yr.hi / ys) * ys};
  auto px = [&](double x) { return ox + ml + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return oy + mt + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string s;
  s += "<g>\n";
  s += "<text x=\"" + num(ox + ml + pw / 2) + "\" y=\"" + num(oy + 18) +
       "\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
  s += "<rect x=\"" + num(ox + ml) + "\" y=\"" + num(oy + mt) + "\" width=\"" + num(pw) +
       "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#000\"/>\n";
  for (double t = xr.lo; t <= xr.hi + 0.5 * xs; t += xs) {
    s += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(oy + mt + ph) + "\" x2=\"" + num(px(t)) +
         "\" y2=\"" + num(oy + mt + ph + 5) + "\" stroke=\"#000\"/>\n";
    s += "<text x=\"" + num(px(t)) + "\" y=\"" + num(oy + mt + ph + 18) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + num(t) + "</text>\n";
  }
  for (double t = yr.lo; t <= yr.hi + 0.5 * ys; t += ys) {
    s += "<line x1=\"" + num(ox + ml - 5) + "\" y1=\"" + num(py(t)) + "\" x2=\"" + num(ox + ml) +
         "\" y2=\"" + num(py(t)) + "\" stroke=\"#000\"/>\n";
    s += "<text x=\"" + num(ox + ml - 8) + "\" y=\"" + num(py(t) + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">" + num(t) + "</text>\n";
  }
  s += "<text x=\"" + num(ox + ml + pw / 2) + "\" y=\"" + num(oy + h - 8) +
       "\" text-anchor=\"middle\" font-size=\"12\">" + escape(xlabel) + "</text>\n";
  s += "<text x=\"" + num(ox + 16) + "\" y=\"" + num(oy + mt + ph / 2) +
       "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 " + num(ox + 16) + " " +
       num(oy + mt + ph / 2) + ")\">" + escape(ylabel) + "</text>\n";

  int legend_row = 0;
  for (const auto& ser : series) {
    const std::size_t n = std::min(ser.x.size(), ser.y.size());
    if (n == 0) continue;
    const std::size_t stride = std::max<std::size_t>(1, (n + kMaxPoints - 1) / kMaxPoints);
    s += "<polyline data-label=\"" + escape(ser.label) + "\" fill=\"none\" stroke=\"" +
         ser.color + "\" stroke-width=\"1.2\"" +
         (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + " points=\"";
    for (std::size_t i = 0; i < n; i += stride) {
      s += num(px(ser.x[i])) + "," + num(py(ser.y[i])) + " ";
    }
    if ((n - 1) % stride != 0) s += num(px(ser.x[n - 1])) + "," + num(py(ser.y[n - 1]));
    s += "\"/>\n";
    const double ly = oy + mt + 14 + 16 * legend_row++;
    s += "<line x1=\"" + num(ox + ml + 10) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
         num(ox + ml + 35) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + ser.color + "\"" +
         (ser.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
    s += "<text x=\"" + num(ox + ml + 40) + "\" y=\"" + num(ly) + "\" font-size=\"11\">" +
         escape(ser.label) + "</text>\n";
  }
  s += "</g>\n";
  return s;
}

std::string document(double w, double h, const std::string& body) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n" + body + "</svg>\n";
}

const char* color(std::size_t i) { return kColors[i % (sizeof kColors / sizeof kColors[0])]; }

}  // namespace

std::string plot_errors_svg(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ConfigError("no reports to plot");
  std::vector<Series> north, east;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (r.errors.empty()) throw ConfigError("report '" + r.label + "' has an empty error series");
    Series n{r.label, {}, {}, color(i)}, e{r.label, {}, {}, color(i)};
    for (std::size_t k = 0; k < r.errors.size(); ++k) {
      n.x.push_back(double(k));
      n.y.push_back(r.errors[k].north);
      e.x.push_back(double(k));
      e.y.push_back(r.errors[k].east);
    }
    north.push_back(std::move(n));
    east.push_back(std::move(e));
  }
  const double w = 900, h = 360;
  return document(w, 2 * h,
                  panel(north, "North positioning error", "sample", "|error north| (m)", 0, 0, w,
                        h) +
                      panel(east, "East positioning error", "sample", "|error east| (m)", 0, h,
                            w, h));
}

std::string plot_track_svg(const std::vector<std::pair<std::string, Trajectory>>& tracks) {
  if (tracks.empty()) throw ConfigError("no trajectories to plot");
  std::vector<Series> series;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& [label, tr] = tracks[i];
    if (tr.est.empty()) throw ConfigError("trajectory '" + label + "' is empty");
    Series est{label + " estimate", {}, {}, color(i)};
    Series truth{label + " ground truth", {}, {}, color(i), true};
    for (std::size_t k = 0; k < tr.est.size(); ++k) {
      est.x.push_back(tr.est[k].east);
      est.y.push_back(tr.est[k].north);
      truth.x.push_back(tr.truth[k].east);
      truth.y.push_back(tr.truth[k].north);
    }
    series.push_back(std::move(est));
    series.push_back(std::move(truth));
  }
  const double w = 800, h = 700;
  return document(w, h, panel(series, "Estimated track vs ground truth", "east (m)",
                              "north (m)", 0, 0, w, h));
}

std::string plot_track3d_svg(const std::vector<std::pair<std::string, Trajectory>>& tracks) {
  if (tracks.empty()) throw ConfigError("no trajectories to plot");
  // Oblique view: east to the right, north receding up-right, depth down.
  const double c = 0.5 * std::cos(std::numbers::pi / 6), s = 0.5 * std::sin(std::numbers::pi / 6);
  std::vector<Series> series;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& [label, tr] = tracks[i];
    if (tr.est.empty()) throw ConfigError("trajectory '" + label + "' is empty");
    Series est{label + " estimate", {}, {}, color(i)};
    Series truth{label + " ground truth", {}, {}, color(i), true};
    for (std::size_t k = 0; k < tr.est.size(); ++k) {
      est.x.push_back(tr.est[k].east + c * tr.est[k].north);
      est.y.push_back(s * tr.est[k].north - tr.est[k].down);
      truth.x.push_back(tr.truth[k].east + c * tr.truth[k].north);
      truth.y.push_back(s * tr.truth[k].north - tr.truth[k].down);
    }
    series.push_back(std::move(est));
    series.push_back(std::move(truth));
  }
  const double w = 900, h = 600;
  return document(w, h, panel(series, "NED track, oblique projection",
                              "east + 0.43 north (m)", "0.25 north - depth (m)", 0, 0, w, h));
}

}  // namespace glidenav
