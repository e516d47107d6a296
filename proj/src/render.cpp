#include "cleartrade/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "cleartrade/format.hpp"

namespace cleartrade {

Palette Palette::default_for(Index num_states) {
  if (num_states < 1) throw ConfigError("palette needs at least one state");
  Palette p;
  p.hues.push_back(0.0);
  if (num_states > 1) p.hues.push_back(120.0);
  while (p.size() < num_states) {
    std::vector<double> sorted = p.hues;
    std::sort(sorted.begin(), sorted.end());
    double best_gap = -1, best_mid = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double lo = sorted[i];
      const double hi = i + 1 < sorted.size() ? sorted[i + 1] : sorted.front() + 360.0;
      if (hi - lo > best_gap) {
        best_gap = hi - lo;
        best_mid = std::fmod(lo + (hi - lo) / 2.0, 360.0);
      }
    }
    p.hues.push_back(best_mid);
  }
  return p;
}

double Palette::hue(Index state) const {
  if (state < 0 || state >= size()) throw ConfigError("palette has no hue for state " + std::to_string(state));
  return hues[static_cast<std::size_t>(state)];
}

void Palette::validate(Index num_states) const {
  if (size() < num_states) {
    throw ConfigError("palette covers " + std::to_string(size()) + " states but the model has " +
                      std::to_string(num_states));
  }
  std::set<double> seen;
  for (Index s = 0; s < num_states; ++s) {
    const double h = hues[static_cast<std::size_t>(s)];
    if (!(h >= 0.0 && h < 360.0)) throw ConfigError("palette hue for state " + std::to_string(s) + " outside [0, 360)");
    if (!seen.insert(h).second) throw ConfigError("palette hues must be pairwise distinct");
  }
}

Rgb hsv_to_rgb(double hue_degrees, double saturation, double value) {
  const double h = std::fmod(std::fmod(hue_degrees, 360.0) + 360.0, 360.0) / 60.0;
  const double s = std::clamp(saturation, 0.0, 1.0);
  const double v = std::clamp(value, 0.0, 1.0);
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  auto byte = [](double u) { return static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0)); };
  return {byte(r + m), byte(g + m), byte(b + m)};
}

std::string to_hex(Rgb rgb) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb.r, rgb.g, rgb.b);
  return buf;
}

HsvGrid to_hsv(const StateMap& state_map, const DominanceMap& dominance, const Palette& palette) {
  const Index rows = dominance.values.rows(), cols = dominance.values.cols();
  if (state_map.states.rows() != rows || state_map.states.cols() != cols) {
    throw UsageError("to_hsv: state map and dominance map differ in shape");
  }
  HsvGrid grid{RowMatrix<double>(rows, cols), RowMatrix<double>::Ones(rows, cols), RowMatrix<double>(rows, cols)};
  const RowMatrix<double> positive = dominance.values.cwiseMax(0.0);
  const double peak = positive.size() ? positive.maxCoeff() : 0.0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      grid.hue(r, c) = palette.hue(state_map.states(r, c));
      grid.value(r, c) = peak > 0.0 ? std::min(1.0, positive(r, c) / peak) : 0.0;
    }
  }
  return grid;
}

namespace {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string state_name(const RenderMeta& meta, Index s) {
  if (s >= 0 && static_cast<std::size_t>(s) < meta.state_names.size()) return meta.state_names[static_cast<std::size_t>(s)];
  return "state " + std::to_string(s);
}

std::string prediction_line(const RenderMeta& meta) {
  std::string line;
  if (meta.predicted_state >= 0) line = "prediction: " + state_name(meta, meta.predicted_state);
  for (Index s = 0; s < meta.probabilities.size(); ++s) {
    line += (line.empty() ? "" : "  ") + std::string("p(") + state_name(meta, s) +
            ")=" + format_fixed(meta.probabilities(s), 4);
  }
  return line;
}

const RowMatrix<double>& display_values(const InputWindow& window, const RenderMeta& meta) {
  if (meta.raw_values) {
    if (meta.raw_values->rows() != window.days() || meta.raw_values->cols() != window.features()) {
      throw UsageError("render: raw values do not match the window shape");
    }
    return *meta.raw_values;
  }
  return window.values;
}

std::string header(double width, double height) {
  const std::string w = format_fixed(width, 0), h = format_fixed(height, 0);
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + w + "\" height=\"" + h +
         "\" viewBox=\"0 0 " + w + " " + h + "\" font-family=\"monospace\" font-size=\"11\">\n"
         "<rect class=\"background\" x=\"0\" y=\"0\" width=\"" + w + "\" height=\"" + h + "\" fill=\"#ffffff\"/>\n";
}

}  // namespace

std::string render_datasheet_svg(const HsvGrid& hsv, const InputWindow& window, const RenderMeta& meta) {
  const Index days = window.days(), features = window.features();
  if (hsv.value.rows() != days || hsv.value.cols() != features || hsv.hue.rows() != days ||
      hsv.hue.cols() != features) {
    throw UsageError("render_datasheet_svg: HSV grid and window differ in shape");
  }
  const RowMatrix<double>& shown = display_values(window, meta);

  constexpr double kLabelWidth = 60, kCellWidth = 96, kCellHeight = 18, kTop = 58, kLeft = 8;
  const double width = kLeft + kLabelWidth + kCellWidth * static_cast<double>(features) + 8;
  const double height = kTop + kCellHeight * static_cast<double>(days) + 8;

  std::ostringstream svg;
  svg << header(width, height);
  svg << "<text class=\"title\" x=\"" << kLeft << "\" y=\"16\">" << xml_escape(meta.title) << "</text>\n";
  svg << "<text class=\"prediction\" x=\"" << kLeft << "\" y=\"32\">" << xml_escape(prediction_line(meta))
      << "</text>\n";
  for (Index f = 0; f < features; ++f) {
    const std::string name = f < kFeatureCount ? std::string(kFeatureNames[static_cast<std::size_t>(f)])
                                               : "feature " + std::to_string(f);
    svg << "<text class=\"col-label\" x=\""
        << format_fixed(kLeft + kLabelWidth + kCellWidth * static_cast<double>(f) + 4, 1) << "\" y=\""
        << format_fixed(kTop - 6, 1) << "\">" << name << "</text>\n";
  }
  // Most recent day on top: row 0 of the sheet is window row days-1.
  for (Index line = 0; line < days; ++line) {
    const Index d = days - 1 - line;
    const double y = kTop + kCellHeight * static_cast<double>(line);
    svg << "<text class=\"row-label\" x=\"" << kLeft << "\" y=\"" << format_fixed(y + 13, 1) << "\">t-" << (line + 1)
        << "</text>\n";
    for (Index f = 0; f < features; ++f) {
      const double x = kLeft + kLabelWidth + kCellWidth * static_cast<double>(f);
      const double v = hsv.value(d, f);
      const Rgb fill = hsv_to_rgb(hsv.hue(d, f), hsv.saturation(d, f), v);
      svg << "<rect class=\"cell\" data-day=\"" << d << "\" data-feature=\"" << f << "\" x=\"" << format_fixed(x, 1)
          << "\" y=\"" << format_fixed(y, 1) << "\" width=\"" << format_fixed(kCellWidth - 1, 1) << "\" height=\""
          << format_fixed(kCellHeight - 1, 1) << "\" fill=\"" << to_hex(fill) << "\"/>\n";
      svg << "<text class=\"cell-text\" x=\"" << format_fixed(x + 4, 1) << "\" y=\"" << format_fixed(y + 13, 1)
          << "\" fill=\"" << (v < 0.5 ? "#ffffff" : "#000000") << "\">" << format_fixed(shown(d, f), 2)
          << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<double> band_widths(const Eigen::VectorXd& day_saliency) {
  const Eigen::VectorXd positive = day_saliency.cwiseMax(0.0);
  const double peak = positive.size() ? positive.maxCoeff() : 0.0;
  std::vector<double> widths;
  widths.reserve(static_cast<std::size_t>(positive.size()));
  for (Index d = 0; d < positive.size(); ++d) {
    const double t = peak > 0.0 ? positive(d) / peak : 0.0;
    widths.push_back(kMinBandWidth + (kMaxBandWidth - kMinBandWidth) * t);
  }
  return widths;
}

std::string render_price_overlay_svg(const InputWindow& window, const Eigen::VectorXd& day_saliency,
                                     const std::vector<Index>& state_per_day, const Palette& palette,
                                     const RenderMeta& meta) {
  const Index days = window.days();
  if (day_saliency.size() != days || static_cast<Index>(state_per_day.size()) != days) {
    throw UsageError("render_price_overlay_svg: need one saliency and one state per window day");
  }
  const RowMatrix<double>& shown = display_values(window, meta);
  const Eigen::VectorXd close = shown.col(kClose);

  constexpr double kWidth = 640, kHeight = 320, kLeft = 48, kRight = 16, kTop = 48, kBottom = 28;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto x_of = [&](Index d) {
    return days == 1 ? kLeft + plot_w / 2 : kLeft + plot_w * static_cast<double>(d) / static_cast<double>(days - 1);
  };
  const double lo = close.minCoeff(), hi = close.maxCoeff();
  auto y_of = [&](double price) {
    return hi > lo ? kTop + plot_h * (hi - price) / (hi - lo) : kTop + plot_h / 2;
  };

  std::ostringstream svg;
  svg << header(kWidth, kHeight);
  svg << "<text class=\"title\" x=\"8\" y=\"16\">" << xml_escape(meta.title) << "</text>\n";
  svg << "<text class=\"prediction\" x=\"8\" y=\"32\">" << xml_escape(prediction_line(meta)) << "</text>\n";

  const std::vector<double> widths = band_widths(day_saliency);
  for (Index d = 0; d < days; ++d) {
    const Rgb colour = hsv_to_rgb(palette.hue(state_per_day[static_cast<std::size_t>(d)]), 1.0, 1.0);
    const std::string x = format_fixed(x_of(d), 2);
    svg << "<line class=\"band\" data-day=\"" << d << "\" x1=\"" << x << "\" y1=\"" << format_fixed(kTop, 1)
        << "\" x2=\"" << x << "\" y2=\"" << format_fixed(kTop + plot_h, 1) << "\" stroke=\"" << to_hex(colour)
        << "\" stroke-opacity=\"0.55\" stroke-width=\"" << format_fixed(widths[static_cast<std::size_t>(d)], 3)
        << "\"/>\n";
  }
  if (days == 1) {
    svg << "<circle class=\"price-point\" cx=\"" << format_fixed(x_of(0), 2) << "\" cy=\""
        << format_fixed(y_of(close(0)), 2) << "\" r=\"3\" fill=\"#000000\"/>\n";
  } else {
    svg << "<polyline class=\"price\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\" points=\"";
    for (Index d = 0; d < days; ++d) {
      svg << (d ? " " : "") << format_fixed(x_of(d), 2) << ',' << format_fixed(y_of(close(d)), 2);
    }
    svg << "\"/>\n";
  }
  svg << "<text class=\"axis-label\" x=\"" << format_fixed(kLeft, 1) << "\" y=\"" << format_fixed(kHeight - 8, 1)
      << "\">t-" << days << "</text>\n";
  svg << "<text class=\"axis-label\" x=\"" << format_fixed(kLeft + plot_w - 24, 1) << "\" y=\""
      << format_fixed(kHeight - 8, 1) << "\">t-1</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cleartrade
