#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "cleartrade/clear.hpp"
#include "cleartrade/data.hpp"
#include "cleartrade/render.hpp"
#include "cleartrade/trainer.hpp"

namespace cleartrade {

/// Settings for cmd_synth.
struct SynthConfig {
  PlantedSignal signal;
  Index rows = 800;
  double follow_probability = 0.9;
  std::string output = "synthetic.csv";  // file name inside the output directory
};

/// Everything a subcommand needs. Loaded from a flat key=value file; see
/// docs/config.md for the key list.
struct AppConfig {
  std::filesystem::path data_csv;
  Index window_days = kDefaultWindowDays;
  double train_fraction = 0.9;
  TrainConfig train;
  std::optional<Palette> palette;  // defaults to Palette::default_for(K)
  ExplainOptions explain;
  std::filesystem::path out_dir = "out";
  SynthConfig synth;

  /// Throws ConfigError when a numeric field is out of range.
  void validate() const;
  Palette palette_for(Index num_states) const;
};

/// Parses `key = value` lines ('#' starts a comment). Relative paths are
/// resolved against `base_dir`. Unknown keys are rejected.
AppConfig parse_config(std::istream& in, const std::filesystem::path& base_dir, const std::string& source_name);
AppConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` assignment (same keys as the file format).
void apply_setting(AppConfig& cfg, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir);

/// Renders the config back into the file format (keys in a fixed order).
std::string format_config(const AppConfig& cfg);

}  // namespace cleartrade
