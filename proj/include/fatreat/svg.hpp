#pragma once

// Self-contained SVG chart of ATE_t with its HPD band.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "fatreat/inference.hpp"

namespace fatreat::svg {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Round step (1, 2 or 5 times a power of ten) giving about `target` ticks.
inline double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

}  // namespace detail

inline std::string ate_chart(const inference::AteSummary& ate, const std::optional<VectorXd>& truth = std::nullopt,
                             const std::string& title = "Average treatment effect by period") {
  using detail::num;
  const int T = static_cast<int>(ate.periods.size());
  const double width = 640, height = 400, left = 70, right = 20, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;

  double lo = 0.0, hi = 0.0;
  bool first = true;
  auto extend = [&](double v) {
    if (!std::isfinite(v)) return;
    lo = first ? v : std::min(lo, v);
    hi = first ? v : std::max(hi, v);
    first = false;
  };
  for (const auto& p : ate.periods) {
    extend(p.hpd_lo);
    extend(p.hpd_hi);
    extend(p.posterior_mean);
  }
  if (truth)
    for (Eigen::Index t = 0; t < truth->size(); ++t) extend((*truth)[t]);
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto sx = [&](double t) { return left + (T > 1 ? (t - 1.0) / (T - 1.0) : 0.5) * pw; };
  auto sy = [&](double v) { return top + (hi - v) / (hi - lo) * ph; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
       "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + title + "</text>\n";

  const double step = detail::nice_step(hi - lo, 6);
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12; v += step) {
    const double y = sy(v);
    s += "<line x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left + pw) + "\" y2=\"" + num(y) +
         "\" stroke=\"#e0e0e0\"/>\n";
    s += "<text x=\"" + num(left - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" +
         detail::label(std::abs(v) < 1e-12 ? 0.0 : v) + "</text>\n";
  }
  for (int t = 1; t <= T; ++t)
    s += "<text x=\"" + num(sx(t)) + "\" y=\"" + num(top + ph + 20) + "\" text-anchor=\"middle\">" +
         std::to_string(t) + "</text>\n";
  s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(height - 18) + "\" text-anchor=\"middle\">period</text>\n";

  std::string band;
  for (const auto& p : ate.periods) band += num(sx(p.period)) + "," + num(sy(p.hpd_hi)) + " ";
  for (auto it = ate.periods.rbegin(); it != ate.periods.rend(); ++it)
    band += num(sx(it->period)) + "," + num(sy(it->hpd_lo)) + " ";
  s += "<polygon points=\"" + band + "\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\"/>\n";

  std::string line;
  for (const auto& p : ate.periods) line += num(sx(p.period)) + "," + num(sy(p.posterior_mean)) + " ";
  s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>\n";
  for (const auto& p : ate.periods)
    s += "<circle cx=\"" + num(sx(p.period)) + "\" cy=\"" + num(sy(p.posterior_mean)) +
         "\" r=\"3.5\" fill=\"#08519c\"/>\n";

  if (truth) {
    std::string tl;
    for (Eigen::Index t = 0; t < truth->size(); ++t)
      tl += num(sx(static_cast<double>(t + 1))) + "," + num(sy((*truth)[t])) + " ";
    s += "<polyline points=\"" + tl + "\" fill=\"none\" stroke=\"#cb181d\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>\n";
  }

  const double ly = top + 14;
  const int pct = static_cast<int>(std::lround(ate.level * 100));
  s += "<rect x=\"" + num(left + 10) + "\" y=\"" + num(ly - 9) + "\" width=\"18\" height=\"10\" fill=\"#9ecae1\"/>\n";
  s += "<text x=\"" + num(left + 34) + "\" y=\"" + num(ly) + "\">" + std::to_string(pct) + "% HPD</text>\n";
  s += "<line x1=\"" + num(left + 110) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(left + 128) + "\" y2=\"" +
       num(ly - 4) + "\" stroke=\"#08519c\" stroke-width=\"2\"/>\n";
  s += "<text x=\"" + num(left + 134) + "\" y=\"" + num(ly) + "\">posterior mean</text>\n";
  if (truth) {
    s += "<line x1=\"" + num(left + 240) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(left + 258) + "\" y2=\"" +
         num(ly - 4) + "\" stroke=\"#cb181d\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>\n";
    s += "<text x=\"" + num(left + 264) + "\" y=\"" + num(ly) + "\">true</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace fatreat::svg
