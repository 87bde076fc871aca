#pragma once

// Pipeline configuration and its line-oriented `key = value` file format:
//
//   [temporal]
//   epochs = 30
//   # comment
//
// Every field is addressable as `section.key`, which is also the syntax of
// command-line overrides.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "dgs/data.hpp"
#include "dgs/error.hpp"
#include "dgs/svdd.hpp"
#include "dgs/synthetic.hpp"
#include "dgs/temporal.hpp"
#include "dgs/vgae.hpp"

namespace dgs {

enum class Pooling { Flatten, Mean };
enum class Granularity { Timestamp, Segment };

struct StageTraining {
  std::size_t epochs;
  double learning_rate;
  std::size_t batch_size;
};

struct PipelineConfig {
  // paths
  std::string data_path;
  std::string test_path;
  std::string topology_path;
  std::string checkpoint_path;
  std::string output_dir = ".";
  std::string label_column;

  // data
  bool normalize = true;
  double train_fraction = 1.0;
  double calibration_fraction = 0.2;

  // windowing
  std::size_t window = 30;
  std::size_t stride = 30;

  TemporalConfig temporal;
  StageTraining temporal_training{20, 1e-3, 16};

  VgaeConfig vgae;
  StageTraining vgae_training{20, 5e-3, 16};

  SvddConfig svdd;
  StageTraining svdd_training{50, 1e-3, 32};
  double quantile = 0.99;
  Pooling pooling = Pooling::Flatten;
  bool standardize_detector_input = true;

  std::uint64_t seed = 7;

  bool use_temporal = true;
  bool use_graph_weighting = true;
  bool use_vgae = true;

  Granularity granularity = Granularity::Timestamp;

  // synthetic data
  SynthConfig synth;
  std::size_t synth_train_length = 20000;

  void validate() const;
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T v{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("config: bad value for '" + key + "': '" + text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("config: bad boolean for '" + key + "': '" + text + "'");
}

inline std::string show(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

// Named accessor for one configuration field.
struct ConfigField {
  std::string name;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

inline std::vector<ConfigField> config_fields(PipelineConfig& c) {
  std::vector<ConfigField> f;
  auto text = [&f](std::string name, std::string& ref) {
    f.push_back({std::move(name), [&ref](const std::string& v) { ref = detail::trim(v); }, [&ref] { return ref; }});
  };
  auto count = [&f](std::string name, std::size_t& ref) {
    f.push_back({name, [&ref, name](const std::string& v) { ref = detail::parse_number<std::size_t>(name, v); },
                 [&ref] { return std::to_string(ref); }});
  };
  auto real = [&f](std::string name, double& ref) {
    f.push_back({name, [&ref, name](const std::string& v) { ref = detail::parse_number<double>(name, v); },
                 [&ref] { return detail::show(ref); }});
  };
  auto flag = [&f](std::string name, bool& ref) {
    f.push_back({name, [&ref, name](const std::string& v) { ref = detail::parse_bool(name, v); },
                 [&ref] { return std::string(ref ? "true" : "false"); }});
  };

  text("paths.data", c.data_path);
  text("paths.test", c.test_path);
  text("paths.topology", c.topology_path);
  text("paths.checkpoint", c.checkpoint_path);
  text("paths.out", c.output_dir);
  text("data.label_column", c.label_column);
  flag("data.normalize", c.normalize);
  real("data.train_fraction", c.train_fraction);
  real("data.calibration_fraction", c.calibration_fraction);
  count("window.length", c.window);
  count("window.stride", c.stride);

  count("temporal.heads", c.temporal.heads);
  count("temporal.head_dim", c.temporal.head_dim);
  count("temporal.model_dim", c.temporal.model_dim);
  flag("temporal.positional_encoding", c.temporal.positional_encoding);
  count("temporal.epochs", c.temporal_training.epochs);
  real("temporal.lr", c.temporal_training.learning_rate);
  count("temporal.batch", c.temporal_training.batch_size);

  count("vgae.hidden_dim", c.vgae.hidden_dim);
  count("vgae.embedding_dim", c.vgae.embedding_dim);
  real("vgae.beta", c.vgae.kl_weight);
  count("vgae.epochs", c.vgae_training.epochs);
  real("vgae.lr", c.vgae_training.learning_rate);
  count("vgae.batch", c.vgae_training.batch_size);

  f.push_back({"svdd.widths",
               [&c](const std::string& v) {
                 std::vector<std::size_t> widths;
                 for (const auto& part : detail::split(v, ','))
                   widths.push_back(detail::parse_number<std::size_t>("svdd.widths", part));
                 c.svdd.widths = widths;
               },
               [&c] {
                 std::string s;
                 for (std::size_t i = 0; i < c.svdd.widths.size(); ++i)
                   s += (i ? "," : "") + std::to_string(c.svdd.widths[i]);
                 return s;
               }});
  real("svdd.slope", c.svdd.slope);
  real("svdd.lambda", c.svdd.weight_decay);
  count("svdd.epochs", c.svdd_training.epochs);
  real("svdd.lr", c.svdd_training.learning_rate);
  count("svdd.batch", c.svdd_training.batch_size);
  real("svdd.quantile", c.quantile);
  flag("svdd.standardize", c.standardize_detector_input);
  f.push_back({"svdd.pooling",
               [&c](const std::string& v) {
                 const std::string t = detail::lower(detail::trim(v));
                 if (t == "flatten") c.pooling = Pooling::Flatten;
                 else if (t == "mean") c.pooling = Pooling::Mean;
                 else throw ConfigError("config: svdd.pooling must be flatten or mean");
               },
               [&c] { return std::string(c.pooling == Pooling::Flatten ? "flatten" : "mean"); }});

  f.push_back({"general.seed",
               [&c](const std::string& v) { c.seed = detail::parse_number<std::uint64_t>("general.seed", v); },
               [&c] { return std::to_string(c.seed); }});

  flag("ablation.use_temporal", c.use_temporal);
  flag("ablation.use_graph_weighting", c.use_graph_weighting);
  flag("ablation.use_vgae", c.use_vgae);

  f.push_back({"eval.granularity",
               [&c](const std::string& v) {
                 const std::string t = detail::lower(detail::trim(v));
                 if (t == "timestamp") c.granularity = Granularity::Timestamp;
                 else if (t == "segment") c.granularity = Granularity::Segment;
                 else throw ConfigError("config: eval.granularity must be timestamp or segment");
               },
               [&c] { return std::string(c.granularity == Granularity::Timestamp ? "timestamp" : "segment"); }});

  count("synth.sensors", c.synth.n);
  count("synth.types", c.synth.k);
  count("synth.length", c.synth.length);
  count("synth.train_length", c.synth_train_length);
  real("synth.density", c.synth.density);
  real("synth.noise_std", c.synth.noise_std);
  real("synth.ar_coefficient", c.synth.ar_coefficient);
  f.push_back({"synth.seed",
               [&c](const std::string& v) { c.synth.seed = detail::parse_number<std::uint64_t>("synth.seed", v); },
               [&c] { return std::to_string(c.synth.seed); }});
  // Repeated key: each assignment appends one anomaly; "none" clears the list.
  f.push_back({"synth.anomaly",
               [&c](const std::string& v) {
                 const std::string t = detail::trim(v);
                 if (detail::lower(t) == "none") c.synth.anomalies.clear();
                 else c.synth.anomalies.push_back(parse_anomaly(t));
               },
               [&c] {
                 std::string s;
                 for (const auto& a : c.synth.anomalies) s += (s.empty() ? "" : "; ") + format_anomaly(a);
                 return s;
               }});
  return f;
}

// Applies one `section.key = value` assignment.
inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  for (auto& field : config_fields(c)) {
    if (field.name == key) {
      field.set(value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

// Parses "section.key=value".
inline void apply_override(PipelineConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like section.key=value: '" + assignment + "'");
  set_config_value(c, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline void parse_config(std::istream& in, PipelineConfig& c) {
  std::string section = "general";
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = detail::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(c, section + "." + detail::trim(t.substr(0, eq)), t.substr(eq + 1));
  }
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  PipelineConfig c;
  parse_config(in, c);
  return c;
}

// Writes every field grouped by section; parse_config reads it back.
inline void write_config(std::ostream& os, PipelineConfig c) {
  std::string section;
  for (auto& field : config_fields(c)) {
    const auto dot = field.name.find('.');
    const std::string sec = field.name.substr(0, dot);
    const std::string key = field.name.substr(dot + 1);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    if (key == "anomaly") {
      os << "anomaly = none\n";
      for (const auto& a : c.synth.anomalies) os << "anomaly = " << format_anomaly(a) << '\n';
    } else {
      os << key << " = " << field.get() << '\n';
    }
  }
}

inline void PipelineConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("config: ") + name + " must be positive");
  };
  positive(window, "window.length");
  positive(stride, "window.stride");
  if (window < 2) throw ConfigError("config: window.length must be >= 2");
  positive(temporal.heads, "temporal.heads");
  positive(temporal.head_dim, "temporal.head_dim");
  positive(temporal.model_dim, "temporal.model_dim");
  positive(temporal_training.batch_size, "temporal.batch");
  positive(vgae.hidden_dim, "vgae.hidden_dim");
  positive(vgae.embedding_dim, "vgae.embedding_dim");
  positive(vgae_training.batch_size, "vgae.batch");
  positive(svdd_training.batch_size, "svdd.batch");
  if (svdd.widths.empty()) throw ConfigError("config: svdd.widths must list at least one layer");
  for (std::size_t w : svdd.widths) positive(w, "svdd.widths entries");
  if (!(temporal_training.learning_rate > 0.0) || !(vgae_training.learning_rate > 0.0) ||
      !(svdd_training.learning_rate > 0.0)) {
    throw ConfigError("config: learning rates must be positive");
  }
  if (vgae.kl_weight < 0.0) throw ConfigError("config: vgae.beta must be non-negative");
  if (svdd.weight_decay < 0.0) throw ConfigError("config: svdd.lambda must be non-negative");
  if (!(quantile > 0.0 && quantile <= 1.0)) throw ConfigError("config: svdd.quantile must lie in (0, 1]");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("config: data.train_fraction must lie in (0, 1]");
  }
  if (!(calibration_fraction >= 0.0 && calibration_fraction < 1.0)) {
    throw ConfigError("config: data.calibration_fraction must lie in [0, 1)");
  }
}

}  // namespace dgs
