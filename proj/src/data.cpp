#include "cleartrade/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace cleartrade {

using namespace std::chrono;

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  auto parse = [&](std::string_view part, auto& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    return ec == std::errc() && ptr == part.data() + part.size();
  };
  if (!parse(text.substr(0, 4), y) || !parse(text.substr(5, 2), m) || !parse(text.substr(8, 2), d)) return std::nullopt;
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

std::string format_date(Date date) {
  const year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

double OhlcvRow::feature(Index f) const {
  switch (f) {
    case kOpen:
      return open;
    case kHigh:
      return high;
    case kLow:
      return low;
    case kClose:
      return close;
    case kVolume:
      return volume;
    default:
      throw UsageError("OhlcvRow::feature: index " + std::to_string(f) + " out of range");
  }
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
  }
  return fields;
}

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line) + ": "; }

}  // namespace

std::vector<OhlcvRow> parse_ohlcv_csv(std::istream& in, const std::string& source_name) {
  static constexpr std::array<std::string_view, 6> kColumns = {"date", "open", "high", "low", "close", "volume"};

  std::string line;
  std::size_t line_no = 0;
  std::array<std::size_t, 6> column_of{};
  bool have_header = false;
  std::vector<std::pair<OhlcvRow, std::size_t>> rows;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_fields(line);

    if (!have_header) {
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        const auto it = std::find(fields.begin(), fields.end(), kColumns[c]);
        if (it == fields.end()) {
          throw DataError(where(source_name, line_no) + "header is missing column '" + std::string(kColumns[c]) +
                          "' (expected date,open,high,low,close,volume)");
        }
        column_of[c] = static_cast<std::size_t>(it - fields.begin());
      }
      have_header = true;
      continue;
    }

    const std::size_t needed = *std::max_element(column_of.begin(), column_of.end()) + 1;
    if (fields.size() < needed) {
      throw DataError(where(source_name, line_no) + "expected " + std::to_string(needed) + " columns, found " +
                      std::to_string(fields.size()));
    }

    OhlcvRow row;
    const auto date = parse_date(fields[column_of[0]]);
    if (!date) throw DataError(where(source_name, line_no) + "malformed date '" + std::string(fields[column_of[0]]) + "'");
    row.date = *date;
    double* targets[5] = {&row.open, &row.high, &row.low, &row.close, &row.volume};
    for (std::size_t c = 1; c < kColumns.size(); ++c) {
      const std::string_view text = fields[column_of[c]];
      const char* begin = text.data();
      if (!text.empty() && text.front() == '+') ++begin;
      auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), *targets[c - 1]);
      if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(*targets[c - 1])) {
        throw DataError(where(source_name, line_no) + "malformed number '" + std::string(text) + "' in column " +
                        std::string(kColumns[c]));
      }
    }
    if (row.high < row.low) throw DataError(where(source_name, line_no) + "high is below low");
    if (row.low > std::min(row.open, row.close) || row.high < std::max(row.open, row.close)) {
      throw DataError(where(source_name, line_no) + "open/close outside the [low, high] range");
    }
    if (row.volume < 0) throw DataError(where(source_name, line_no) + "negative volume");
    rows.emplace_back(row, line_no);
  }
  if (!have_header) throw DataError(source_name + ": empty file, expected header date,open,high,low,close,volume");

  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first.date < b.first.date; });
  std::vector<OhlcvRow> sorted;
  sorted.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].first.date == rows[i - 1].first.date) {
      throw DataError(where(source_name, std::max(rows[i].second, rows[i - 1].second)) + "duplicate date " +
                      format_date(rows[i].first.date));
    }
    sorted.push_back(rows[i].first);
  }
  return sorted;
}

std::vector<OhlcvRow> parse_ohlcv_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file " + path.string());
  return parse_ohlcv_csv(in, path.string());
}

void write_ohlcv_csv(const std::vector<OhlcvRow>& rows, std::ostream& out) {
  out << "date,open,high,low,close,volume\n";
  char buf[64];
  for (const OhlcvRow& r : rows) {
    out << format_date(r.date);
    for (double v : {r.open, r.high, r.low, r.close}) {
      std::snprintf(buf, sizeof buf, ",%.2f", v);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.0f\n", r.volume);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Windows

namespace {

InputWindow raw_window(const std::vector<OhlcvRow>& rows, std::size_t first, Index window_days) {
  InputWindow w;
  w.values.resize(window_days, kFeatureCount);
  for (Index d = 0; d < window_days; ++d) {
    const OhlcvRow& row = rows[first + static_cast<std::size_t>(d)];
    for (Index f = 0; f < kFeatureCount; ++f) w.values(d, f) = row.feature(f);
  }
  w.start_date = rows[first].date;
  w.end_date = rows[first + static_cast<std::size_t>(window_days) - 1].date;
  w.offset = static_cast<Index>(first);
  return w;
}

}  // namespace

std::vector<InputWindow> make_windows(const std::vector<OhlcvRow>& rows, Index window_days) {
  if (window_days < 1) throw ConfigError("window_days must be at least 1");
  const auto n = static_cast<Index>(rows.size());
  if (n < window_days + 1) {
    throw DataError("need at least " + std::to_string(window_days + 1) + " rows to form one " +
                    std::to_string(window_days) + "-day window plus its label day, got " + std::to_string(n));
  }
  std::vector<InputWindow> windows;
  windows.reserve(static_cast<std::size_t>(n - window_days));
  for (Index start = 0; start + window_days < n; ++start) {
    InputWindow w = raw_window(rows, static_cast<std::size_t>(start), window_days);
    const double last = rows[static_cast<std::size_t>(start + window_days - 1)].close;
    const double next = rows[static_cast<std::size_t>(start + window_days)].close;
    w.label = next > last ? 1 : 0;
    windows.push_back(std::move(w));
  }
  return windows;
}

InputWindow window_before(const std::vector<OhlcvRow>& rows, std::size_t decision_row, Index window_days) {
  if (decision_row >= rows.size()) throw UsageError("window_before: decision row out of range");
  if (static_cast<Index>(decision_row) < window_days) {
    throw DataError("insufficient history: " + std::to_string(window_days) + " trading days before " +
                    format_date(rows[decision_row].date) + " are required, only " + std::to_string(decision_row) +
                    " available");
  }
  InputWindow w = raw_window(rows, decision_row - static_cast<std::size_t>(window_days), window_days);
  w.label = rows[decision_row].close > rows[decision_row - 1].close ? 1 : 0;
  return w;
}

NormalizationStats compute_stats(const std::vector<InputWindow>& windows) {
  if (windows.empty()) throw DataError("cannot compute normalization stats from zero windows");
  const Index features = windows.front().features();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(features);
  Index count = 0;
  for (const auto& w : windows) {
    sum += w.values.colwise().sum().transpose();
    count += w.days();
  }
  NormalizationStats stats;
  stats.mean = sum / static_cast<double>(count);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(features);
  for (const auto& w : windows) {
    sq += (w.values.rowwise() - stats.mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  stats.stddev = (sq / static_cast<double>(count)).cwiseSqrt();
  return stats;
}

InputWindow normalize(const InputWindow& window, const NormalizationStats& stats) {
  InputWindow out = window;
  for (Index f = 0; f < window.features(); ++f) {
    const double sd = stats.stddev(f);
    // Relative threshold: a column of identical values can still show
    // rounding-level spread in the computed deviation.
    if (!(sd > 1e-12 * std::max(1.0, std::abs(stats.mean(f))))) {
      out.values.col(f).setZero();
    } else {
      out.values.col(f) = (window.values.col(f).array() - stats.mean(f)) / sd;
    }
  }
  return out;
}

std::vector<InputWindow> normalize(const std::vector<InputWindow>& windows, const NormalizationStats& stats) {
  std::vector<InputWindow> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(normalize(w, stats));
  return out;
}

DatasetSplit split_chronological(const std::vector<InputWindow>& windows, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (windows.empty()) throw DataError("cannot split an empty window list");
  const auto n = windows.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw DataError("cannot form both a training and an evaluation split from " + std::to_string(n) + " window(s)");
  }
  std::vector<InputWindow> train(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(n_train));
  Date last_train_end = train.front().end_date;
  for (const auto& w : train) last_train_end = std::max(last_train_end, w.end_date);

  std::vector<InputWindow> eval;
  for (std::size_t i = n_train; i < n; ++i) {
    if (windows[i].start_date > last_train_end) eval.push_back(windows[i]);
  }
  if (eval.empty()) {
    throw DataError("evaluation split is empty: no window starts after the last training window ends (" +
                    format_date(last_train_end) + ")");
  }

  DatasetSplit split;
  split.normalization_stats = compute_stats(train);
  split.train = normalize(train, split.normalization_stats);
  split.eval = normalize(eval, split.normalization_stats);
  return split;
}

// ---------------------------------------------------------------------------
// Synthetic data

void PlantedSignal::validate() const {
  if (window_days < 2) throw ConfigError("synthetic: window_days must be at least 2");
  if (signal_length < 2) throw ConfigError("synthetic: signal_length must be at least 2");
  if (signal_start < 0 || signal_end() > window_days) {
    throw ConfigError("synthetic: signal rows [" + std::to_string(signal_start) + ", " + std::to_string(signal_end()) +
                      ") fall outside the window [0, " + std::to_string(window_days) + ")");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("synthetic: noise must be a finite value >= 0");
  if (!(signal_amplitude > 0.0) || !std::isfinite(signal_amplitude)) {
    throw ConfigError("synthetic: signal_amplitude must be positive");
  }
}

Index planted_label(const RowMatrix<double>& values, const PlantedSignal& signal) {
  return values(signal.signal_end() - 1, kClose) > values(signal.signal_start, kClose) ? 1 : 0;
}

std::vector<InputWindow> generate_synthetic(const PlantedSignal& signal, Index n_samples, std::uint64_t seed) {
  signal.validate();
  if (n_samples < 1) throw ConfigError("synthetic: n_samples must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const Date base = sys_days{year{2000} / January / 3};

  std::vector<InputWindow> windows;
  windows.reserve(static_cast<std::size_t>(n_samples));
  for (Index i = 0; i < n_samples; ++i) {
    InputWindow w;
    w.values.resize(signal.window_days, kFeatureCount);
    for (Index d = 0; d < signal.window_days; ++d)
      for (Index f = 0; f < kFeatureCount; ++f) w.values(d, f) = signal.noise * noise(rng);

    const double direction = coin(rng) ? 1.0 : -1.0;
    for (Index d = 0; d < signal.signal_length; ++d) {
      const double ramp = static_cast<double>(d) / static_cast<double>(signal.signal_length - 1) - 0.5;
      w.values(signal.signal_start + d, kClose) += direction * signal.signal_amplitude * ramp;
    }
    w.label = planted_label(w.values, signal);
    w.offset = i;
    w.start_date = base + days{i * (signal.window_days + 1)};
    w.end_date = w.start_date + days{signal.window_days - 1};
    windows.push_back(std::move(w));
  }
  return windows;
}

SyntheticSeries generate_synthetic_series(const PlantedSignal& signal, Index n_rows, double follow_probability,
                                          std::uint64_t seed) {
  signal.validate();
  if (n_rows < signal.window_days + 1) {
    throw ConfigError("synthetic: need at least " + std::to_string(signal.window_days + 1) + " rows");
  }
  if (!(follow_probability >= 0.0 && follow_probability <= 1.0)) {
    throw ConfigError("synthetic: follow probability must lie in [0, 1]");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution follows(follow_probability);

  // Closes live on an integer cent grid so the written CSV reproduces every
  // comparison exactly.
  std::vector<std::int64_t> close(static_cast<std::size_t>(n_rows));
  close[0] = 100000;
  SyntheticSeries series;
  for (Index t = 1; t < n_rows; ++t) {
    const auto prev = close[static_cast<std::size_t>(t - 1)];
    bool up = coin(rng);
    if (t >= signal.window_days) {
      const Index first = t - signal.window_days;
      const auto a = close[static_cast<std::size_t>(first + signal.signal_start)];
      const auto b = close[static_cast<std::size_t>(first + signal.signal_end() - 1)];
      const bool rule_up = b > a;
      const bool obey = follows(rng);
      up = obey ? rule_up : !rule_up;
      ++series.windows;
      if (obey) ++series.rule_following;
    }
    const double pct = std::max(0.0005, std::abs(0.01 * normal(rng)));
    const auto step = std::max<std::int64_t>(1, std::llround(static_cast<double>(prev) * pct));
    if (!up && prev - step < 100) {
      // A strict fall below 1.00 is not representable on the series' price floor.
      throw ConfigError("synthetic: price floor reached; use fewer rows or a different seed");
    }
    close[static_cast<std::size_t>(t)] = up ? prev + step : prev - step;
  }

  const Date base = sys_days{year{2015} / January / 5};
  Date date = base;
  series.rows.reserve(static_cast<std::size_t>(n_rows));
  for (Index t = 0; t < n_rows; ++t) {
    // Skip weekends so the calendar looks like trading days.
    while (weekday{date} == Saturday || weekday{date} == Sunday) date += days{1};
    OhlcvRow row;
    row.date = date;
    const double c = static_cast<double>(close[static_cast<std::size_t>(t)]) / 100.0;
    const double prev = t > 0 ? static_cast<double>(close[static_cast<std::size_t>(t - 1)]) / 100.0 : c;
    row.open = std::round(prev * (1.0 + 0.002 * normal(rng)) * 100.0) / 100.0;
    row.close = c;
    row.high = std::round(std::max(row.open, row.close) * (1.0 + 0.004 * std::abs(normal(rng))) * 100.0) / 100.0;
    row.low = std::round(std::min(row.open, row.close) * (1.0 - 0.004 * std::abs(normal(rng))) * 100.0) / 100.0;
    row.high = std::max(row.high, std::max(row.open, row.close));
    row.low = std::min(row.low, std::min(row.open, row.close));
    row.volume = std::round(1.0e6 * std::exp(0.3 * normal(rng)));
    series.rows.push_back(row);
    date += days{1};
  }
  return series;
}

double planted_rule_agreement(const std::vector<InputWindow>& windows, const PlantedSignal& signal) {
  if (windows.empty()) throw DataError("planted_rule_agreement: no windows");
  Index agree = 0;
  for (const auto& w : windows) {
    if (!w.label) throw UsageError("planted_rule_agreement: unlabelled window");
    if (planted_label(w.values, signal) == *w.label) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(windows.size());
}

}  // namespace cleartrade
