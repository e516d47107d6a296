#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cleartrade/network.hpp"

namespace cleartrade {

using Date = std::chrono::sys_days;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD). Returns nullopt if malformed.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date date);

enum Feature : Index { kOpen = 0, kHigh = 1, kLow = 2, kClose = 3, kVolume = 4 };
inline constexpr Index kFeatureCount = 5;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {"open", "high", "low", "close", "volume"};
inline constexpr Index kDefaultWindowDays = 30;
inline constexpr Index kBinaryStates = 2;  // 0 = fall/flat, 1 = rise

struct OhlcvRow {
  Date date;
  double open = 0;
  double high = 0;
  double low = 0;
  double close = 0;
  double volume = 0;

  double feature(Index f) const;
};

/// One window_days x 5 sample. `offset` is the index of its first row in
/// the source series (or the sample index for synthetic data).
struct InputWindow {
  RowMatrix<double> values;
  Date start_date;
  Date end_date;
  std::optional<Index> label;
  Index offset = 0;

  Index days() const { return values.rows(); }
  Index features() const { return values.cols(); }
  Tensor3d as_tensor() const {
    Tensor3d t(1, values.rows(), values.cols());
    t.channel(0) = values;
    return t;
  }
};

struct NormalizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

struct DatasetSplit {
  std::vector<InputWindow> train;
  std::vector<InputWindow> eval;
  NormalizationStats normalization_stats;
};

/// Reads a `date,open,high,low,close,volume` CSV. Rows come back sorted by
/// date. Throws DataError naming the offending line.
std::vector<OhlcvRow> parse_ohlcv_csv(const std::filesystem::path& path);
std::vector<OhlcvRow> parse_ohlcv_csv(std::istream& in, const std::string& source_name);

void write_ohlcv_csv(const std::vector<OhlcvRow>& rows, std::ostream& out);

/// Stride-1 windows, one per start offset with a next-day close available.
/// Label is 1 when the following day's close is strictly higher than the
/// window's last close, otherwise 0.
std::vector<InputWindow> make_windows(const std::vector<OhlcvRow>& rows, Index window_days = kDefaultWindowDays);

/// The inference window ending the day before `rows[decision_row]`, labelled
/// with that day's move.
InputWindow window_before(const std::vector<OhlcvRow>& rows, std::size_t decision_row,
                          Index window_days = kDefaultWindowDays);

/// Per-feature mean and population standard deviation over every cell of `windows`.
NormalizationStats compute_stats(const std::vector<InputWindow>& windows);

/// Per-feature z-score; a zero-variance feature becomes an all-zero column.
std::vector<InputWindow> normalize(const std::vector<InputWindow>& windows, const NormalizationStats& stats);
InputWindow normalize(const InputWindow& window, const NormalizationStats& stats);

/// First floor(train_fraction * n) windows train; of the rest, those
/// starting strictly after the last training window ends form eval.
/// Normalization stats come from train alone and both sides are returned
/// normalized.
DatasetSplit split_chronological(const std::vector<InputWindow>& windows, double train_fraction = 0.9);

// ---------------------------------------------------------------------------
// Synthetic planted-signal data

/// Where and how strongly the label-carrying signal is planted. The label is
/// 1 iff the close feature rises across the planted rows, i.e.
/// close[signal_start + signal_length - 1] > close[signal_start].
struct PlantedSignal {
  Index window_days = kDefaultWindowDays;
  Index signal_start = kDefaultWindowDays - 4;
  Index signal_length = 4;
  double noise = 1.0;             // stddev of the i.i.d. background cells
  double signal_amplitude = 6.0;  // close ramp spans [-a/2, a/2] across the planted rows

  void validate() const;
  Index signal_end() const { return signal_start + signal_length; }
};

/// The planting rule evaluated on any window grid.
Index planted_label(const RowMatrix<double>& values, const PlantedSignal& signal);

/// Independent labelled windows on a non-overlapping synthetic calendar.
std::vector<InputWindow> generate_synthetic(const PlantedSignal& signal, Index n_samples, std::uint64_t seed);

/// A continuous OHLCV price series in which the move on each labelled day
/// follows the planted rule with probability `follow_probability` and
/// deliberately contradicts it otherwise.
struct SyntheticSeries {
  std::vector<OhlcvRow> rows;
  Index windows = 0;          // number of labelled windows the series yields
  Index rule_following = 0;   // how many of them were built to obey the rule

  double designed_agreement() const {
    return windows ? static_cast<double>(rule_following) / static_cast<double>(windows) : 0.0;
  }
};

SyntheticSeries generate_synthetic_series(const PlantedSignal& signal, Index n_rows, double follow_probability,
                                          std::uint64_t seed);

/// Fraction of windows whose label matches the planting rule applied to the
/// window's raw values.
double planted_rule_agreement(const std::vector<InputWindow>& windows, const PlantedSignal& signal);

}  // namespace cleartrade
