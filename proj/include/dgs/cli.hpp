#pragma once

// Command-line front end: synth, train, score, evaluate.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dgs/checkpoint.hpp"
#include "dgs/config.hpp"
#include "dgs/data.hpp"
#include "dgs/metrics.hpp"
#include "dgs/pipeline.hpp"
#include "dgs/synthetic.hpp"

namespace dgs {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

namespace cli {

namespace fs = std::filesystem;

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << std::setprecision(17);
  return os;
}

inline void write_trace(const fs::path& path, const LossTrace& trace) {
  auto os = open_output(path);
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) os << i + 1 << ',' << trace[i] << '\n';
}

// Synthetic dataset: data.csv (full stream), train.csv/test.csv when a split
// is configured, topology.txt and labels.csv.
inline int cmd_synth(const PipelineConfig& c, std::ostream& out) {
  const SyntheticData data = generate_synthetic(c.synth);
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  {
    auto os = open_output(dir / "topology.txt");
    write_topology(os, data.topology);
  }
  {
    auto os = open_output(dir / "data.csv");
    write_csv(os, data.stream, data.topology);
  }
  {
    auto os = open_output(dir / "labels.csv");
    os << "timestamp,label\n";
    for (std::size_t t = 0; t < data.stream.length(); ++t) os << data.stream.timestamps[t] << ',' << data.stream.labels[t] << '\n';
  }
  const std::size_t split = c.synth_train_length;
  if (split > 0 && split < data.stream.length()) {
    auto train = open_output(dir / "train.csv");
    write_csv(train, slice_stream(data.stream, 0, split), data.topology);
    auto test = open_output(dir / "test.csv");
    write_csv(test, slice_stream(data.stream, split, data.stream.length()), data.topology);
  }
  const double fraction = static_cast<double>(data.stream.anomaly_count()) / static_cast<double>(data.stream.length());
  out << "rows=" << data.stream.length() << " sensors=" << data.topology.n() << " types=" << data.topology.k()
      << " anomalous=" << data.stream.anomaly_count() << " anomaly_fraction=" << fraction << '\n';
  return kExitOk;
}

inline SensorTopology require_topology(const PipelineConfig& c) {
  if (c.topology_path.empty()) throw ConfigError("no topology file given (--topology or paths.topology)");
  return load_topology(c.topology_path);
}

inline int cmd_train(const PipelineConfig& c, std::ostream& out) {
  if (c.data_path.empty()) throw ConfigError("no training data given (--data or paths.data)");
  const SensorTopology topo = require_topology(c);
  const RawStream stream = load_csv(c.data_path, topo, c.label_column);
  TrainResult result = train_model(c, topo, stream, &out);
  const fs::path dir(c.output_dir);
  const fs::path ckpt = c.checkpoint_path.empty() ? dir / "model.ckpt" : fs::path(c.checkpoint_path);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_model(ckpt.string(), result.model);
  write_trace(dir / "loss_temporal.csv", result.report.temporal_loss);
  write_trace(dir / "loss_vgae.csv", result.report.vgae_loss);
  write_trace(dir / "loss_svdd.csv", result.report.svdd_loss);
  const TrainingReport& r = result.report;
  out << "training_rows=" << r.training_rows << " filtered_rows=" << r.filtered_rows
      << " filtered_segments=" << r.filtered_segments << " fit_segments=" << r.fit_segments
      << " calibration_segments=" << r.calibration_segments << " threshold=" << r.threshold << '\n'
      << "checkpoint=" << ckpt.string() << '\n';
  return kExitOk;
}

inline int cmd_score(const PipelineConfig& c, std::ostream& out) {
  const std::string data_path = !c.test_path.empty() ? c.test_path : c.data_path;
  if (data_path.empty()) throw ConfigError("no data to score (--data or paths.test)");
  const fs::path dir(c.output_dir);
  const fs::path ckpt = c.checkpoint_path.empty() ? dir / "model.ckpt" : fs::path(c.checkpoint_path);
  const Model model = load_model(ckpt.string());
  const RawStream stream = load_csv(data_path, model.topology, c.label_column);
  const ScoreResult r = score_stream(model, stream);
  {
    auto os = open_output(dir / "scores_segments.csv");
    os << "segment,start,end,score,threshold,predicted\n";
    for (const auto& s : r.segments)
      os << s.index << ',' << s.start << ',' << s.end << ',' << s.score << ',' << r.threshold << ',' << s.label << '\n';
  }
  {
    auto os = open_output(dir / "scores_timestamps.csv");
    os << "timestamp_index,score,threshold,predicted\n";
    for (const auto& t : r.timestamps)
      os << t.index << ',' << t.score << ',' << r.threshold << ',' << t.label << '\n';
  }
  std::size_t flagged = 0;
  for (const auto& s : r.segments) flagged += static_cast<std::size_t>(s.label);
  out << "segments=" << r.segments.size() << " flagged=" << flagged << " threshold=" << r.threshold << '\n';
  return kExitOk;
}

struct ScoreTable {
  bool timestamp_level = true;
  std::vector<std::size_t> index, start, end;
  std::vector<double> score;
  std::vector<int> predicted;
};

inline ScoreTable read_scores(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open score file '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw DataError("score file '" + path + "' is empty");
  const auto header = detail::split(detail::trim(line), ',');
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return i;
    return std::nullopt;
  };
  ScoreTable t;
  const auto ts = col("timestamp_index");
  const auto seg_start = col("start");
  const auto seg_end = col("end");
  const auto sc = col("score");
  const auto pr = col("predicted");
  if (!sc || !pr) throw DataError("score file '" + path + "' lacks score/predicted columns");
  if (!ts && !(seg_start && seg_end)) throw DataError("score file '" + path + "' lacks index columns");
  t.timestamp_level = ts.has_value();
  std::size_t row = 0;
  auto num = [&](const std::string& cell) {
    const auto v = detail::parse_double(cell);
    if (!v) throw DataError("score file row " + std::to_string(row) + ": bad number '" + cell + "'");
    return *v;
  };
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split(detail::trim(line), ',');
    if (cells.size() != header.size()) throw DataError("score file row " + std::to_string(row) + ": wrong cell count");
    if (t.timestamp_level) {
      t.index.push_back(static_cast<std::size_t>(num(cells[*ts])));
    } else {
      t.start.push_back(static_cast<std::size_t>(num(cells[*seg_start])));
      t.end.push_back(static_cast<std::size_t>(num(cells[*seg_end])));
    }
    t.score.push_back(num(cells[*sc]));
    const double p = num(cells[*pr]);
    if (p != 0.0 && p != 1.0) throw DataError("score file row " + std::to_string(row) + ": predicted must be 0 or 1");
    t.predicted.push_back(static_cast<int>(p));
  }
  return t;
}

// Reads the `label` column (or the configured one) of any CSV.
inline std::vector<int> read_labels(const std::string& path, const std::string& label_column) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open label file '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw DataError("label file '" + path + "' is empty");
  const auto header = detail::split(detail::trim(line), ',');
  std::optional<std::size_t> lc;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (detail::is_label_header(detail::trim(header[i]), label_column)) lc = i;
  if (!lc) throw DataError("label file '" + path + "' has no label column");
  std::vector<int> labels;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split(line, ',');
    if (*lc >= cells.size()) throw DataError("label file row " + std::to_string(row) + ": missing label cell");
    const auto l = detail::parse_label(cells[*lc]);
    if (!l) throw DataError("label file row " + std::to_string(row) + ": bad label '" + cells[*lc] + "'");
    labels.push_back(*l);
  }
  return labels;
}

inline int cmd_evaluate(const PipelineConfig& c, const std::string& scores_path, const std::string& labels_path,
                        std::ostream& out) {
  if (scores_path.empty()) throw ConfigError("evaluate needs --scores");
  if (labels_path.empty()) throw ConfigError("evaluate needs --labels");
  const ScoreTable table = read_scores(scores_path);
  const std::vector<int> all_labels = read_labels(labels_path, c.label_column);
  std::vector<int> labels;
  if (table.timestamp_level) {
    for (std::size_t i : table.index) {
      if (i >= all_labels.size()) throw DataError("score index " + std::to_string(i) + " beyond label file");
      labels.push_back(all_labels[i]);
    }
  } else {
    for (std::size_t k = 0; k < table.start.size(); ++k) {
      if (table.end[k] > all_labels.size() || table.start[k] >= table.end[k]) {
        throw DataError("segment " + std::to_string(k) + " outside label file");
      }
      int l = 0;
      for (std::size_t t = table.start[k]; t < table.end[k]; ++t) l |= all_labels[t];
      labels.push_back(l);
    }
  }
  const std::vector<int> adjusted = point_adjust(labels, table.predicted);
  MetricReport report = prf(labels, adjusted);
  const bool both_classes = std::count(labels.begin(), labels.end(), 1) > 0 &&
                            std::count(labels.begin(), labels.end(), 0) > 0;
  report.auc = both_classes ? auc(labels, table.score) : std::numeric_limits<double>::quiet_NaN();
  const fs::path dir(c.output_dir);
  {
    auto os = open_output(dir / "metrics.txt");
    write_report_text(os, report);
  }
  {
    auto os = open_output(dir / "metrics.kv");
    write_report_kv(os, report);
  }
  write_report_text(out, report);
  return kExitOk;
}

}  // namespace cli

// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-stream one-class anomaly detector for sensor networks"};
  app.require_subcommand(1);
  std::string config_path, out_dir, data, test, topology, checkpoint, scores, labels;
  std::optional<std::uint64_t> seed;
  std::optional<double> train_fraction;
  std::vector<std::string> overrides;
  bool no_temporal = false, no_weighting = false, no_vgae = false;

  app.add_option("--config", config_path, "Configuration file (key = value with [sections])");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--set", overrides, "Override a config field: section.key=value");
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
  auto* train = app.add_subcommand("train", "Train the detector and write a checkpoint");
  auto* score = app.add_subcommand("score", "Score a stream with a trained checkpoint");
  auto* evaluate = app.add_subcommand("evaluate", "Point-adjusted metrics for a score file");
  for (auto* sub : {synth, train, score, evaluate}) sub->fallthrough();
  for (auto* sub : {train, score}) {
    sub->add_option("--data", data, "Input CSV");
    sub->add_option("--checkpoint", checkpoint, "Model file");
  }
  train->add_option("--topology", topology, "Topology file");
  train->add_flag("--no-temporal", no_temporal, "Replace the temporal encoder with the raw window");
  train->add_flag("--no-graph-weighting", no_weighting, "Use the binary physical adjacency");
  train->add_flag("--no-vgae", no_vgae, "Feed the node attributes to the detector directly");
  train->add_option("--train-fraction", train_fraction, "Use only this leading fraction of the training rows");
  evaluate->add_option("--scores", scores, "Score CSV written by `score`")->required();
  evaluate->add_option("--labels", labels, "CSV with a label column")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    for (const auto& o : overrides) apply_override(c, o);
    if (seed) {
      c.seed = *seed;
      c.synth.seed = *seed;
    }
    if (!out_dir.empty()) c.output_dir = out_dir;
    if (!data.empty()) c.data_path = data;
    if (!data.empty() && *score) c.test_path.clear();
    if (!topology.empty()) c.topology_path = topology;
    if (!checkpoint.empty()) c.checkpoint_path = checkpoint;
    if (train_fraction) c.train_fraction = *train_fraction;
    if (no_temporal) c.use_temporal = false;
    if (no_weighting) c.use_graph_weighting = false;
    if (no_vgae) c.use_vgae = false;
    c.validate();

    if (*synth) return cli::cmd_synth(c, out);
    if (*train) return cli::cmd_train(c, out);
    if (*score) return cli::cmd_score(c, out);
    return cli::cmd_evaluate(c, scores, labels, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace dgs
