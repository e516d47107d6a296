// cleartrade: train, evaluate and explain a rise/fall predictor on OHLCV windows.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cleartrade/commands.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> settings;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "key=value config file (see docs/config.md)")->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out, "output directory; overrides the 'out' key");
  cmd->add_option("--seed", opts.seed, "random seed; overrides the 'seed' key");
  cmd->add_option("--set", opts.settings, "extra key=value override, repeatable");
}

cleartrade::AppConfig resolve_config(const CommonOptions& opts) {
  using namespace cleartrade;
  AppConfig cfg = opts.config.empty() ? AppConfig{} : load_config(opts.config);
  for (const auto& kv : opts.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1), {});
  }
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  if (opts.seed) cfg.train.seed = *opts.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cleartrade: rise/fall prediction on OHLCV windows with per-state attentive response maps"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string csv, checkpoint, date;

  auto* train = app.add_subcommand("train", "train a model; writes model.ctck, loss_curve.csv, eval_report.csv");
  add_common(train, common);
  train->add_option("--csv", csv, "OHLCV CSV; overrides the 'data.csv' key");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the eval split of a CSV; writes eval_report.csv");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (default: <out>/model.ctck)");
  eval->add_option("--csv", csv, "OHLCV CSV (default: the 'data.csv' key)");

  auto* explain = app.add_subcommand(
      "explain", "explain the prediction for one day; writes <date>.explain.csv, <date>.sheet.svg, <date>.overlay.svg");
  add_common(explain, common);
  explain->add_option("--checkpoint", checkpoint, "checkpoint file (default: <out>/model.ctck)");
  explain->add_option("--csv", csv, "OHLCV CSV (default: the 'data.csv' key)");
  explain->add_option("--date", date, "decision day, YYYY-MM-DD; the window is the preceding trading days")
      ->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic planted-signal OHLCV CSV into the output directory");
  add_common(synth, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    using namespace cleartrade;
    AppConfig cfg = resolve_config(common);
    if (!csv.empty()) cfg.data_csv = csv;
    const std::filesystem::path ckpt = checkpoint.empty() ? cfg.out_dir / kCheckpointName : std::filesystem::path(checkpoint);

    if (train->parsed()) {
      cmd_train(cfg, std::cout);
    } else if (eval->parsed()) {
      cmd_eval(cfg, ckpt, cfg.data_csv, std::cout);
    } else if (explain->parsed()) {
      cmd_explain(cfg, ckpt, cfg.data_csv, date, std::cout);
    } else if (synth->parsed()) {
      cmd_synth(cfg, std::cout);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n' || c == '\r') c = ' ';
    }
    std::cerr << "error: " << msg << '\n';
    return cleartrade::exit_code_for(e);
  }
  return 0;
}
