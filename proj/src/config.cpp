#include "cleartrade/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cleartrade/format.hpp"

namespace cleartrade {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

Palette parse_palette(const std::string& key, const std::string& value) {
  // "0:0,1:120" (state:hue pairs)
  std::map<Index, double> entries;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("config key '" + key + "': expected state:hue, got '" + item + "'");
    const auto state = parse_number<Index>(key, trim(item.substr(0, colon)));
    const auto hue = parse_number<double>(key, trim(item.substr(colon + 1)));
    if (!entries.emplace(state, hue).second) {
      throw ConfigError("config key '" + key + "': state " + std::to_string(state) + " listed twice");
    }
  }
  Palette p;
  Index expected = 0;
  for (const auto& [state, hue] : entries) {
    if (state != expected++) throw ConfigError("config key '" + key + "': states must be 0..K-1 without gaps");
    p.hues.push_back(hue);
  }
  if (p.hues.empty()) throw ConfigError("config key '" + key + "': empty palette");
  p.validate(p.size());
  return p;
}

}  // namespace

void AppConfig::validate() const {
  if (window_days < 1) throw ConfigError("window_days must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  train.validate();
  if (synth.rows < 2) throw ConfigError("synth.rows must be >= 2");
  if (!(synth.follow_probability >= 0.0 && synth.follow_probability <= 1.0)) {
    throw ConfigError("synth.follow_probability must lie in [0, 1]");
  }
  synth.signal.validate();
  const std::filesystem::path name(synth.output);
  if (synth.output.empty() || name.has_parent_path() || name.filename() != name || synth.output == ".." ||
      synth.output == ".") {
    throw ConfigError("synth.output must be a plain file name inside the output directory, got '" + synth.output + "'");
  }
}

Palette AppConfig::palette_for(Index num_states) const {
  if (!palette) return Palette::default_for(num_states);
  palette->validate(num_states);
  return *palette;
}

void apply_setting(AppConfig& cfg, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir) {
  if (key == "data.csv") {
    cfg.data_csv = resolve(base_dir, value);
  } else if (key == "out") {
    cfg.out_dir = resolve(base_dir, value);
  } else if (key == "window_days") {
    cfg.window_days = parse_number<Index>(key, value);
    cfg.synth.signal.window_days = cfg.window_days;
  } else if (key == "train_fraction") {
    cfg.train_fraction = parse_number<double>(key, value);
  } else if (key == "arch") {
    cfg.train.architecture = parse_architecture(value);
  } else if (key == "epochs") {
    cfg.train.epochs = parse_number<Index>(key, value);
  } else if (key == "batch_size") {
    cfg.train.batch_size = parse_number<Index>(key, value);
  } else if (key == "learning_rate") {
    cfg.train.learning_rate = parse_number<double>(key, value);
  } else if (key == "momentum") {
    cfg.train.momentum = parse_number<double>(key, value);
  } else if (key == "weight_decay") {
    cfg.train.weight_decay = parse_number<double>(key, value);
  } else if (key == "seed") {
    cfg.train.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "leaky_slope") {
    cfg.train.leaky_slope = parse_number<double>(key, value);
  } else if (key == "palette") {
    cfg.palette = parse_palette(key, value);
  } else if (key == "explain.rectify") {
    cfg.explain.rectify = parse_bool(key, value);
  } else if (key == "synth.rows") {
    cfg.synth.rows = parse_number<Index>(key, value);
  } else if (key == "synth.signal_start") {
    cfg.synth.signal.signal_start = parse_number<Index>(key, value);
  } else if (key == "synth.signal_length") {
    cfg.synth.signal.signal_length = parse_number<Index>(key, value);
  } else if (key == "synth.noise") {
    cfg.synth.signal.noise = parse_number<double>(key, value);
  } else if (key == "synth.amplitude") {
    cfg.synth.signal.signal_amplitude = parse_number<double>(key, value);
  } else if (key == "synth.follow_probability") {
    cfg.synth.follow_probability = parse_number<double>(key, value);
  } else if (key == "synth.output") {
    cfg.synth.output = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

AppConfig parse_config(std::istream& in, const std::filesystem::path& base_dir, const std::string& source_name) {
  AppConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_setting(cfg, key, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path(), path.string());
}

std::string format_config(const AppConfig& cfg) {
  std::ostringstream out;
  out << "data.csv = " << cfg.data_csv.string() << '\n'
      << "window_days = " << cfg.window_days << '\n'
      << "train_fraction = " << format_real(cfg.train_fraction) << '\n'
      << "arch = " << format_architecture(cfg.train.architecture) << '\n'
      << "epochs = " << cfg.train.epochs << '\n'
      << "batch_size = " << cfg.train.batch_size << '\n'
      << "learning_rate = " << format_real(cfg.train.learning_rate) << '\n'
      << "momentum = " << format_real(cfg.train.momentum) << '\n'
      << "weight_decay = " << format_real(cfg.train.weight_decay) << '\n'
      << "seed = " << cfg.train.seed << '\n'
      << "leaky_slope = " << format_real(cfg.train.leaky_slope) << '\n';
  if (cfg.palette) {
    out << "palette = ";
    for (Index s = 0; s < cfg.palette->size(); ++s) {
      out << (s ? "," : "") << s << ':' << format_real(cfg.palette->hue(s));
    }
    out << '\n';
  }
  out << "explain.rectify = " << (cfg.explain.rectify ? "true" : "false") << '\n'
      << "out = " << cfg.out_dir.string() << '\n'
      << "synth.rows = " << cfg.synth.rows << '\n'
      << "synth.signal_start = " << cfg.synth.signal.signal_start << '\n'
      << "synth.signal_length = " << cfg.synth.signal.signal_length << '\n'
      << "synth.noise = " << format_real(cfg.synth.signal.noise) << '\n'
      << "synth.amplitude = " << format_real(cfg.synth.signal.signal_amplitude) << '\n'
      << "synth.follow_probability = " << format_real(cfg.synth.follow_probability) << '\n'
      << "synth.output = " << cfg.synth.output << '\n';
  return out.str();
}

}  // namespace cleartrade
