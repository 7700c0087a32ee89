#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "audit/report/letter_values.hpp"
#include "audit/report/pivot.hpp"

// Deterministic SVG renderers for the three report shapes: faceted
// letter-value plots, median heatmaps with a diverging scale, and horizontal
// effect charts with confidence bars. Same input, same bytes.

namespace audit::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Rgb {
  int r = 0, g = 0, b = 0;
  std::string hex() const {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
  }
};

inline Rgb lerp(Rgb a, Rgb b, double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [t](int x, int y) { return static_cast<int>(std::lround(x + t * (y - x))); };
  return Rgb{mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

// blue -> white -> red around a midpoint
inline std::string diverging_color(double value, double lo, double mid, double hi) {
  const Rgb blue{33, 102, 172}, white{247, 247, 247}, red{178, 24, 43};
  if (value <= mid) {
    double t = lo < mid ? (value - lo) / (mid - lo) : 1.0;
    return lerp(blue, white, t).hex();
  }
  double t = hi > mid ? (value - mid) / (hi - mid) : 0.0;
  return lerp(white, red, t).hex();
}

class Doc {
 public:
  Doc(double width, double height) : width_(width), height_(height) {}

  void open_group(const std::string& cls, const std::string& id) {
    body_ << "<g class=\"" << cls << "\" id=\"" << id << "\">\n";
  }
  void close_group() { body_ << "</g>\n"; }

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none") {
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
          << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke
          << "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double stroke_width = 1.0) {
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
          << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
          << num(stroke_width) << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, double size = 10.0,
            const std::string& anchor = "start", const std::string& fill = "#222222",
            double rotate = 0.0) {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\""
          << num(size) << "\" text-anchor=\"" << anchor << "\" fill=\"" << fill
          << "\" font-family=\"sans-serif\"";
    if (rotate != 0.0)
      body_ << " transform=\"rotate(" << num(rotate) << " " << num(x) << " " << num(y)
            << ")\"";
    body_ << ">" << escape(s) << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_)
        << "\" height=\"" << num(height_) << "\" viewBox=\"0 0 " << num(width_) << " "
        << num(height_) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << num(width_) << "\" height=\""
        << num(height_) << "\" fill=\"#ffffff\" stroke=\"none\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double width_, height_;
  std::ostringstream body_;
};

struct LetterValueFacet {
  std::string title;
  std::vector<LetterValueSummary> groups;
};

namespace detail {

struct LinearScale {
  double domain_lo = 0.0, domain_hi = 1.0;
  double range_lo = 0.0, range_hi = 1.0;
  double operator()(double v) const {
    if (domain_hi == domain_lo) return 0.5 * (range_lo + range_hi);
    return range_lo + (v - domain_lo) / (domain_hi - domain_lo) * (range_hi - range_lo);
  }
};

inline std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  if (hi <= lo) return {lo};
  double span = hi - lo;
  double step = std::pow(10.0, std::floor(std::log10(span / target)));
  for (double m : {1.0, 2.0, 5.0, 10.0, 20.0}) {
    if (span / (step * m) <= target) {
      step *= m;
      break;
    }
  }
  std::vector<double> ticks;
  double first = std::ceil(lo / step) * step;
  for (double t = first; t <= hi + 1e-9 * span; t += step) ticks.push_back(t);
  return ticks;
}

inline std::string tick_label(double v) {
  char buf[32];
  if (std::fabs(v) >= 1000.0 && std::fmod(v, 1000.0) == 0.0)
    std::snprintf(buf, sizeof(buf), "%.0fk", v / 1000.0);
  else
    std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace detail

// Facet grid of letter-value plots: nested boxes narrowing with depth, red
// median line, shared y scale across panels.
inline std::string letter_value_chart(const std::vector<LetterValueFacet>& facets,
                                      const std::string& title, int columns = 0) {
  if (facets.empty()) throw std::invalid_argument("letter_value_chart: no facets");
  for (const auto& f : facets)
    if (f.groups.empty())
      throw std::invalid_argument("letter_value_chart: facet without groups");

  double lo = facets[0].groups[0].min, hi = facets[0].groups[0].max;
  std::size_t max_groups = 0;
  for (const auto& f : facets) {
    max_groups = std::max(max_groups, f.groups.size());
    for (const auto& g : f.groups) {
      lo = std::min(lo, g.min);
      hi = std::max(hi, g.max);
    }
  }
  if (hi == lo) {
    lo -= 1.0;
    hi += 1.0;
  }

  const int ncols = columns > 0 ? columns : static_cast<int>(facets.size());
  const int nrows = (static_cast<int>(facets.size()) + ncols - 1) / ncols;
  const double slot_w = 46.0;
  const double panel_w = std::max(180.0, 60.0 + slot_w * static_cast<double>(max_groups));
  const double panel_h = 240.0;
  const double margin = 46.0;
  const double width = margin * 2 + panel_w * ncols;
  const double height = margin * 2 + (panel_h + 40.0) * nrows;

  Doc doc(width, height);
  doc.text(width / 2, 24, title, 14, "middle");

  for (std::size_t f = 0; f < facets.size(); ++f) {
    const auto& facet = facets[f];
    const int row = static_cast<int>(f) / ncols;
    const int col = static_cast<int>(f) % ncols;
    const double px = margin + col * panel_w;
    const double py = margin + row * (panel_h + 40.0);
    const double plot_x = px + 50.0, plot_w = panel_w - 62.0;
    const double plot_y = py + 20.0, plot_h = panel_h - 56.0;

    doc.open_group("panel", "panel-" + std::to_string(f));
    doc.text(px + panel_w / 2, py + 12, facet.title, 11, "middle");
    doc.rect(plot_x, plot_y, plot_w, plot_h, "none", "#888888");

    std::size_t longest_label = 0;
    for (const auto& g : facet.groups)
      longest_label = std::max(longest_label, g.label.size());
    const bool rotate_labels = longest_label > 9;

    detail::LinearScale y{lo, hi, plot_y + plot_h, plot_y};
    for (double t : detail::nice_ticks(lo, hi)) {
      doc.line(plot_x - 3, y(t), plot_x, y(t), "#888888");
      doc.line(plot_x, y(t), plot_x + plot_w, y(t), "#eeeeee", 0.5);
      doc.text(plot_x - 6, y(t) + 3, detail::tick_label(t), 8, "end", "#555555");
    }

    for (std::size_t g = 0; g < facet.groups.size(); ++g) {
      const auto& lv = facet.groups[g];
      const double cx = plot_x + plot_w * (static_cast<double>(g) + 0.5) /
                                      static_cast<double>(facet.groups.size());
      const double base_w = std::min(slot_w - 10.0,
                                     plot_w / static_cast<double>(facet.groups.size()) - 8.0);
      doc.open_group("group", "panel-" + std::to_string(f) + "-group-" + std::to_string(g));
      const Rgb deep{72, 120, 168}, pale{214, 228, 240};
      // widest box first, deeper boxes overlaid narrower and paler
      for (std::size_t b = 0; b < lv.boxes.size(); ++b) {
        const auto& box = lv.boxes[lv.boxes.size() - 1 - b];  // deepest first, palest
        double w = base_w * std::pow(0.75, static_cast<double>(box.depth - 1));
        double y_top = y(box.upper), y_bot = y(box.lower);
        doc.rect(cx - w / 2, y_top, w, std::max(0.5, y_bot - y_top),
                 lerp(deep, pale, (box.depth - 1) * 0.28).hex(), "#3a566e");
      }
      double med_w = lv.boxes.empty() ? base_w * 0.6 : base_w;
      doc.line(cx - med_w / 2, y(lv.median), cx + med_w / 2, y(lv.median), "#cc2222", 2.0);
      if (rotate_labels)
        doc.text(cx, plot_y + plot_h + 10, lv.label, 8, "end", "#333333", -35.0);
      else
        doc.text(cx, plot_y + plot_h + 12, lv.label, 8, "middle", "#333333", 0.0);
      doc.close_group();
    }
    doc.close_group();
  }
  return doc.str();
}

// Median heatmap with a diverging scale centred on the median of the
// populated cells. Empty strata render hatched grey with no label.
inline std::string heatmap_chart(const PivotTable& pivot, const std::string& title) {
  if (pivot.row_labels.empty() || pivot.col_labels.empty())
    throw std::invalid_argument("heatmap_chart: empty pivot");

  std::vector<double> values;
  for (const auto& row : pivot.cells)
    for (const auto& cell : row)
      if (cell) values.push_back(*cell);
  if (values.empty()) throw std::invalid_argument("heatmap_chart: all cells empty");
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  double mid = stats::median(values);

  const double cell_w = 74.0, cell_h = 26.0;
  const double left = 230.0, top = 80.0;
  const double width = left + cell_w * static_cast<double>(pivot.col_labels.size()) + 30.0;
  const double height = top + cell_h * static_cast<double>(pivot.row_labels.size()) + 30.0;

  Doc doc(width, height);
  doc.text(width / 2, 24, title, 14, "middle");
  doc.text(left / 2, 44, pivot.row_axis + " x " + pivot.col_axis, 9, "middle", "#666666");

  for (std::size_t c = 0; c < pivot.col_labels.size(); ++c)
    doc.text(left + cell_w * (static_cast<double>(c) + 0.5), top - 8,
             pivot.col_labels[c], 9, "middle");

  for (std::size_t r = 0; r < pivot.row_labels.size(); ++r) {
    double yy = top + cell_h * static_cast<double>(r);
    doc.text(left - 8, yy + cell_h / 2 + 3, pivot.row_labels[r], 9, "end");
    for (std::size_t c = 0; c < pivot.col_labels.size(); ++c) {
      double xx = left + cell_w * static_cast<double>(c);
      const auto& cell = pivot.cells[r][c];
      if (!cell) {
        doc.rect(xx, yy, cell_w, cell_h, "#dddddd", "#ffffff");
        continue;
      }
      doc.rect(xx, yy, cell_w, cell_h, diverging_color(*cell, lo, mid, hi), "#ffffff");
      char label[32];
      std::snprintf(label, sizeof(label), "%.0f", *cell);
      doc.text(xx + cell_w / 2, yy + cell_h / 2 + 3, label, 8, "middle", "#111111");
    }
  }
  return doc.str();
}

struct EffectRow {
  std::string label;
  double estimate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

// Horizontal effect chart: one row per term, square marker at the estimate,
// line across the confidence interval, zero reference line.
inline std::string effect_chart(const std::vector<EffectRow>& rows,
                                const std::string& title) {
  if (rows.empty()) throw std::invalid_argument("effect_chart: no rows");

  double lo = 0.0, hi = 0.0;
  for (const auto& r : rows) {
    lo = std::min({lo, r.ci_lo, r.estimate});
    hi = std::max({hi, r.ci_hi, r.estimate});
  }
  if (hi == lo) {
    lo -= 1.0;
    hi += 1.0;
  }
  double pad = 0.06 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double row_h = 20.0;
  const double left = 250.0, top = 64.0;
  const double plot_w = 460.0;
  const double width = left + plot_w + 40.0;
  const double height = top + row_h * static_cast<double>(rows.size()) + 50.0;

  Doc doc(width, height);
  doc.text(width / 2, 24, title, 14, "middle");
  detail::LinearScale x{lo, hi, left, left + plot_w};

  double plot_h = row_h * static_cast<double>(rows.size());
  doc.rect(left, top, plot_w, plot_h, "none", "#888888");
  for (double t : detail::nice_ticks(lo, hi, 6)) {
    doc.line(x(t), top, x(t), top + plot_h, "#eeeeee", 0.5);
    doc.text(x(t), top + plot_h + 14, detail::tick_label(t), 8, "middle", "#555555");
  }
  doc.line(x(0.0), top, x(0.0), top + plot_h, "#999999", 1.0);

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    double cy = top + row_h * (static_cast<double>(i) + 0.5);
    doc.open_group("effect", "effect-" + std::to_string(i));
    doc.text(left - 8, cy + 3, r.label, 9, "end");
    doc.line(x(r.ci_lo), cy, x(r.ci_hi), cy, "#4878a8", 1.6);
    doc.line(x(r.ci_lo), cy - 3, x(r.ci_lo), cy + 3, "#4878a8", 1.2);
    doc.line(x(r.ci_hi), cy - 3, x(r.ci_hi), cy + 3, "#4878a8", 1.2);
    doc.rect(x(r.estimate) - 2.6, cy - 2.6, 5.2, 5.2,
             r.estimate >= 0 ? "#b2182b" : "#2166ac");
    doc.close_group();
  }
  return doc.str();
}

}  // namespace audit::svg
