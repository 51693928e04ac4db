#pragma once

// Minimal SVG line chart: mean sup-risk against n, one polyline per scheme,
// +-1 standard deviation whiskers.

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "experiment.hpp"

namespace advreg {

struct PlotFilter {
  std::optional<std::string> target;  // e.g. "case1"
  std::optional<double> sigma2;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
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

}  // namespace detail

/// Aggregate rows selected by the filter; recomputed from detail rows when the
/// results carry no aggregates.
inline std::vector<ResultRow> select_aggregates(const ExperimentResults& res,
                                                const PlotFilter& filter) {
  const std::vector<ResultRow> agg = res.aggregate.empty() ? aggregate(res.detail) : res.aggregate;
  std::vector<ResultRow> out;
  for (const auto& r : agg) {
    if (filter.target && r.target != *filter.target) continue;
    if (filter.sigma2 && std::abs(r.sigma2 - *filter.sigma2) > 1e-12 * (1.0 + *filter.sigma2))
      continue;
    if (r.count == 0) continue;
    out.push_back(r);
  }
  return out;
}

inline std::string emit_plot(const ExperimentResults& res, const PlotFilter& filter) {
  const auto rows = select_aggregates(res, filter);
  if (rows.empty()) throw ConfigError("plot filter selects no results");
  std::map<std::string, std::vector<const ResultRow*>> series;
  std::vector<double> ns;
  for (const auto& r : rows) {
    series[r.scheme].push_back(&r);
    ns.push_back(static_cast<double>(r.n));
  }
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.size() < 2) throw ConfigError("plot needs at least two sample sizes");

  double ymax = 0.0;
  for (const auto& r : rows) ymax = std::max(ymax, r.sup_risk + r.sup_risk_std);
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.05;

  constexpr double W = 640, H = 400, left = 70, right = 170, top = 30, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const double nmin = ns.front(), nmax = ns.back();
  auto px = [&](double n) { return left + (n - nmin) / (nmax - nmin) * pw; };
  auto py = [&](double y) { return top + ph - std::max(0.0, y) / ymax * ph; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream s;
  s << R"(<?xml version="1.0" encoding="UTF-8"?>)" << '\n'
    << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << W << R"(" height=")" << H
    << R"(" viewBox="0 0 )" << W << ' ' << H << R"(">)" << '\n';
  s << R"(<rect x="0" y="0" width=")" << W << R"(" height=")" << H << R"(" fill="white"/>)" << '\n';
  std::string title = "sup-risk vs n";
  if (filter.target) title += " (" + *filter.target + ")";
  if (filter.sigma2) title += " sigma2=" + format_number(*filter.sigma2);
  s << R"(<text x=")" << detail::fmt(left) << R"(" y="20" font-size="14">)"
    << detail::xml_escape(title) << "</text>\n";
  // axes
  s << R"(<line class="axis" x1=")" << detail::fmt(left) << R"(" y1=")" << detail::fmt(top + ph)
    << R"(" x2=")" << detail::fmt(left + pw) << R"(" y2=")" << detail::fmt(top + ph)
    << R"(" stroke="black"/>)" << '\n';
  s << R"(<line class="axis" x1=")" << detail::fmt(left) << R"(" y1=")" << detail::fmt(top)
    << R"(" x2=")" << detail::fmt(left) << R"(" y2=")" << detail::fmt(top + ph)
    << R"(" stroke="black"/>)" << '\n';
  for (double n : ns)
    s << R"(<text x=")" << detail::fmt(px(n)) << R"(" y=")" << detail::fmt(top + ph + 18)
      << R"(" font-size="11" text-anchor="middle">)" << n << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = ymax * t / 4.0;
    s << R"(<text x=")" << detail::fmt(left - 6) << R"(" y=")" << detail::fmt(py(y) + 4)
      << R"(" font-size="11" text-anchor="end">)" << format_number(y) << "</text>\n";
  }
  s << R"(<text x=")" << detail::fmt(left + pw / 2) << R"(" y=")" << detail::fmt(H - 10)
    << R"(" font-size="12" text-anchor="middle">n</text>)" << '\n';

  std::size_t color = 0;
  for (auto& [scheme, pts] : series) {
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->n < b->n; });
    const char* c = palette[color++ % std::size(palette)];
    s << R"(<polyline class="series" data-scheme=")" << detail::xml_escape(scheme)
      << R"(" fill="none" stroke=")" << c << R"(" stroke-width="2" points=")";
    for (std::size_t i = 0; i < pts.size(); ++i)
      s << (i ? " " : "") << detail::fmt(px(static_cast<double>(pts[i]->n))) << ','
        << detail::fmt(py(pts[i]->sup_risk));
    s << R"("/>)" << '\n';
    for (const auto* p : pts) {
      const double x = px(static_cast<double>(p->n));
      s << R"(<line class="whisker" x1=")" << detail::fmt(x) << R"(" y1=")"
        << detail::fmt(py(p->sup_risk - p->sup_risk_std)) << R"(" x2=")" << detail::fmt(x)
        << R"(" y2=")" << detail::fmt(py(p->sup_risk + p->sup_risk_std)) << R"(" stroke=")" << c
        << R"("/>)" << '\n';
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(color - 1);
    s << R"(<text x=")" << detail::fmt(left + pw + 12) << R"(" y=")" << detail::fmt(ly)
      << R"(" font-size="11" fill=")" << c << R"(">)" << detail::xml_escape(scheme)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace advreg
