#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cleartrade/clear.hpp"
#include "cleartrade/data.hpp"

namespace cleartrade {

/// State index -> hue in degrees [0, 360).
struct Palette {
  std::vector<double> hues;

  /// 0 (fall) -> red, 1 (rise) -> green; further states are placed greedily
  /// in the middle of the widest remaining hue gap.
  static Palette default_for(Index num_states);

  Index size() const { return static_cast<Index>(hues.size()); }
  double hue(Index state) const;
  /// Throws ConfigError unless every state below num_states has a distinct hue in [0, 360).
  void validate(Index num_states) const;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// Standard HSV -> RGB with channels rounded to the nearest byte.
Rgb hsv_to_rgb(double hue_degrees, double saturation, double value);
std::string to_hex(Rgb rgb);

struct HsvGrid {
  RowMatrix<double> hue;
  RowMatrix<double> saturation;
  RowMatrix<double> value;
};

/// hue = palette(dominant state), saturation = 1, value = positive part of
/// the dominance map divided by its maximum (all zero if nothing is positive).
HsvGrid to_hsv(const StateMap& state_map, const DominanceMap& dominance, const Palette& palette);

struct RenderMeta {
  std::string title;
  std::string decision_date;
  Index predicted_state = -1;
  VectorXd probabilities;
  std::vector<std::string> state_names;  // optional; defaults to "state s"
  /// Values printed in the data-sheet cells and used for the price line.
  /// Defaults to the (normalized) window values.
  std::optional<RowMatrix<double>> raw_values;
};

/// Day x feature sheet: one rect per cell, most recent day first.
std::string render_datasheet_svg(const HsvGrid& hsv, const InputWindow& window, const RenderMeta& meta);

inline constexpr double kMinBandWidth = 0.5;
inline constexpr double kMaxBandWidth = 6.0;

/// Close-price line with one vertical band per day whose width scales
/// linearly with the day's saliency and whose colour is its state's hue.
std::string render_price_overlay_svg(const InputWindow& window, const Eigen::VectorXd& day_saliency,
                                     const std::vector<Index>& state_per_day, const Palette& palette,
                                     const RenderMeta& meta);

/// Band width used for each day, as drawn by render_price_overlay_svg.
std::vector<double> band_widths(const Eigen::VectorXd& day_saliency);

}  // namespace cleartrade
