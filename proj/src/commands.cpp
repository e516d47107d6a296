#include "cleartrade/commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cleartrade/checkpoint.hpp"
#include "cleartrade/format.hpp"
#include "cleartrade/render.hpp"

namespace cleartrade {

namespace fs = std::filesystem;

namespace {

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " given");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw ConfigError(std::string(what) + " not found: " + path.string());
}

fs::path prepare_out_dir(const AppConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec || !fs::is_directory(cfg.out_dir)) {
    throw ConfigError("cannot create output directory " + cfg.out_dir.string());
  }
  return cfg.out_dir;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << contents;
  out.close();
  if (!out) throw ConfigError("failed writing " + path.string());
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream buf;
  fn(buf);
  write_file(path, buf.str());
}

std::vector<OhlcvRow> load_rows(const fs::path& csv) {
  require_file(csv, "data CSV");
  return parse_ohlcv_csv(csv);
}

Network load_model(const fs::path& checkpoint) {
  require_file(checkpoint, "checkpoint");
  return load_checkpoint(checkpoint);
}

std::string nearest_date(const std::vector<OhlcvRow>& rows, Date target) {
  const OhlcvRow* best = nullptr;
  long best_gap = 0;
  for (const auto& r : rows) {
    const long gap = std::abs((r.date - target).count());
    if (!best || gap < best_gap) {
      best = &r;
      best_gap = gap;
    }
  }
  return best ? format_date(best->date) : std::string("(none)");
}

}  // namespace

DatasetSplit load_split(const fs::path& csv, const AppConfig& cfg) {
  const auto rows = load_rows(csv);
  return split_chronological(make_windows(rows, cfg.window_days), cfg.train_fraction);
}

TrainOutcome cmd_train(const AppConfig& cfg, std::ostream& log) {
  cfg.validate();
  const DatasetSplit split = load_split(cfg.data_csv, cfg);
  const fs::path out = prepare_out_dir(cfg);

  log << "training on " << split.train.size() << " windows, evaluating on " << split.eval.size() << '\n';
  TrainOutcome outcome{train(split, cfg.train), {}, out / kCheckpointName};
  for (const auto& e : outcome.result.curve) {
    log << "epoch " << e.epoch << "  loss " << format_fixed(e.train_loss, 6) << "  eval accuracy "
        << format_fixed(e.eval_accuracy, 4) << '\n';
  }
  outcome.report = evaluate(outcome.result.network, split.eval);

  save_checkpoint(outcome.result.network, outcome.checkpoint);
  write_with(out / kLossCurveName, [&](std::ostream& os) { write_loss_curve_csv(outcome.result.curve, os); });
  write_with(out / kEvalReportName, [&](std::ostream& os) { write_eval_report_csv(outcome.report, os); });
  print_eval_report(outcome.report, log);
  log << "wrote " << outcome.checkpoint.string() << '\n';
  return outcome;
}

EvalReport cmd_eval(const AppConfig& cfg, const fs::path& checkpoint, const fs::path& csv, std::ostream& log) {
  cfg.validate();
  const Network net = load_model(checkpoint);
  const DatasetSplit split = load_split(csv, cfg);
  const fs::path out = prepare_out_dir(cfg);
  const EvalReport report = evaluate(net, split.eval);
  write_with(out / kEvalReportName, [&](std::ostream& os) { write_eval_report_csv(report, os); });
  print_eval_report(report, log);
  return report;
}

ExplainOutcome cmd_explain(const AppConfig& cfg, const fs::path& checkpoint, const fs::path& csv,
                           const std::string& date, std::ostream& log) {
  cfg.validate();
  const auto decision = parse_date(date);
  if (!decision) throw ConfigError("malformed date '" + date + "' (expected YYYY-MM-DD)");
  const Network net = load_model(checkpoint);
  const Palette palette = cfg.palette_for(net.num_states());
  const auto rows = load_rows(csv);

  const auto it = std::find_if(rows.begin(), rows.end(), [&](const OhlcvRow& r) { return r.date == *decision; });
  if (it == rows.end()) {
    throw DataError("date " + format_date(*decision) + " not found in " + csv.string() + "; nearest available date is " +
                    nearest_date(rows, *decision));
  }
  const InputWindow raw = window_before(rows, static_cast<std::size_t>(it - rows.begin()), cfg.window_days);
  // Same normalization as training: stats from the train side of this CSV.
  const NormalizationStats stats =
      split_chronological(make_windows(rows, cfg.window_days), cfg.train_fraction).normalization_stats;
  const fs::path out = prepare_out_dir(cfg);

  ExplainOutcome outcome{explain(net, normalize(raw, stats), cfg.explain), normalize(raw, stats), {}, {}};
  const Explanation& ex = outcome.explanation;
  const std::string stem = format_date(*decision);

  RenderMeta meta;
  meta.title = "Explanation for " + stem;
  meta.decision_date = stem;
  meta.predicted_state = ex.predicted_state();
  meta.probabilities = ex.probabilities();
  if (net.num_states() == kBinaryStates) meta.state_names = {"fall", "rise"};
  meta.raw_values = raw.values;

  const HsvGrid hsv = to_hsv(ex.state_map, ex.dominance, palette);
  outcome.files = {out / (stem + ".explain.csv"), out / (stem + ".sheet.svg"), out / (stem + ".overlay.svg")};
  write_with(outcome.files[0], [&](std::ostream& os) { write_explanation_csv(ex, os); });
  write_file(outcome.files[1], render_datasheet_svg(hsv, outcome.window, meta));
  write_file(outcome.files[2], render_price_overlay_svg(raw, day_saliency(ex.dominance),
                                                        day_states(ex.responses), palette, meta));

  log << "decision date: " << stem << '\n'
      << "predicted state: " << ex.predicted_state();
  if (!meta.state_names.empty()) log << " (" << meta.state_names[static_cast<std::size_t>(ex.predicted_state())] << ")";
  log << '\n' << "probabilities:";
  for (Index s = 0; s < ex.probabilities().size(); ++s) log << ' ' << format_fixed(ex.probabilities()(s), 4);
  log << '\n';

  outcome.top_days = most_attentive_days(ex.dominance, 3);
  const Eigen::VectorXd saliency = day_saliency(ex.dominance);
  log << "most attentive days:\n";
  const std::size_t first_row = static_cast<std::size_t>(it - rows.begin()) - static_cast<std::size_t>(cfg.window_days);
  for (Index row : outcome.top_days) {
    log << "  t-" << (cfg.window_days - row) << "  " << format_date(rows[first_row + static_cast<std::size_t>(row)].date)
        << "  saliency " << format_fixed(saliency(row), 6) << '\n';
  }
  for (const auto& f : outcome.files) log << "wrote " << f.string() << '\n';
  return outcome;
}

SynthOutcome cmd_synth(const AppConfig& cfg, std::ostream& log) {
  cfg.validate();
  PlantedSignal signal = cfg.synth.signal;
  signal.window_days = cfg.window_days;
  signal.validate();
  const SyntheticSeries series = generate_synthetic_series(signal, cfg.synth.rows, cfg.synth.follow_probability,
                                                           cfg.train.seed);
  const fs::path out = prepare_out_dir(cfg);

  SynthOutcome outcome;
  outcome.csv = out / cfg.synth.output;
  write_with(outcome.csv, [&](std::ostream& os) { write_ohlcv_csv(series.rows, os); });

  // Re-read the file and label it through the ordinary windowing path.
  const auto windows = make_windows(parse_ohlcv_csv(outcome.csv), cfg.window_days);
  outcome.windows = static_cast<Index>(windows.size());
  outcome.designed_agreement = series.designed_agreement();
  outcome.measured_agreement = planted_rule_agreement(windows, signal);
  log << "wrote " << outcome.csv.string() << " (" << series.rows.size() << " rows, " << outcome.windows
      << " windows)\n"
      << "planted-rule agreement: " << format_real(outcome.measured_agreement)
      << " (designed " << format_real(outcome.designed_agreement) << ")\n";
  if (outcome.measured_agreement != outcome.designed_agreement || outcome.windows != series.windows) {
    throw UsageError("synthetic series does not reproduce its designed agreement after a CSV round trip");
  }
  return outcome;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  return 4;
}

}  // namespace cleartrade
