#pragma once

// Subcommand bodies shared by the CLI and the tests. Every artifact lands
// in cfg.out_dir under a fixed name.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cleartrade/config.hpp"

namespace cleartrade {

inline constexpr const char* kCheckpointName = "model.ctck";
inline constexpr const char* kLossCurveName = "loss_curve.csv";
inline constexpr const char* kEvalReportName = "eval_report.csv";

struct TrainOutcome {
  TrainResult result;
  EvalReport report;
  std::filesystem::path checkpoint;
};

struct ExplainOutcome {
  Explanation explanation;
  InputWindow window;  // normalized network input
  std::vector<std::filesystem::path> files;  // explain.csv, sheet.svg, overlay.svg
  std::vector<Index> top_days;               // window rows, most attentive first
};

struct SynthOutcome {
  std::filesystem::path csv;
  double designed_agreement = 0;
  double measured_agreement = 0;  // planting rule re-applied to make_windows output
  Index windows = 0;
};

/// Windows of the CSV split as in training (stats from the train side).
DatasetSplit load_split(const std::filesystem::path& csv, const AppConfig& cfg);

TrainOutcome cmd_train(const AppConfig& cfg, std::ostream& log);
EvalReport cmd_eval(const AppConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& csv,
                    std::ostream& log);
ExplainOutcome cmd_explain(const AppConfig& cfg, const std::filesystem::path& checkpoint,
                           const std::filesystem::path& csv, const std::string& date, std::ostream& log);
SynthOutcome cmd_synth(const AppConfig& cfg, std::ostream& log);

/// Exit code for an exception escaping a subcommand: 2 configuration,
/// 3 data, 4 anything else.
int exit_code_for(const std::exception& e);

}  // namespace cleartrade
