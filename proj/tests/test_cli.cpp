#include <gtest/gtest.h>

#include <sstream>

#include "dgs/cli.hpp"
#include "support/fixtures.hpp"

using namespace dgs;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "dgs");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path write_config_file(const fs::path& dir, const PipelineConfig& c) {
  const fs::path p = dir / "run.conf";
  std::ofstream os(p);
  write_config(os, c);
  return p;
}

// Synthesizes and trains the small fixture once per directory.
fs::path trained_run(const std::string& name) {
  const fs::path dir = fixture::scratch(name);
  const fs::path conf = write_config_file(dir, fixture::small_config());
  EXPECT_EQ(invoke({"--config", conf.string(), "--out", dir.string(), "synth"}).code, 0);
  const CliRun t = invoke({"--config", conf.string(), "--out", dir.string(), "train", "--data", (dir / "train.csv").string(),
                     "--topology", (dir / "topology.txt").string()});
  EXPECT_EQ(t.code, 0) << t.err;
  return dir;
}

}  // namespace

TEST(CliSynth, SameSeedGivesByteEqualFiles) {
  const fs::path a = fixture::scratch("synth_a"), b = fixture::scratch("synth_b");
  const fs::path conf = write_config_file(a, fixture::small_config());
  ASSERT_EQ(invoke({"--config", conf.string(), "--seed", "7", "--out", a.string(), "synth"}).code, 0);
  ASSERT_EQ(invoke({"--config", conf.string(), "--seed", "7", "--out", b.string(), "synth"}).code, 0);
  for (const char* f : {"data.csv", "topology.txt", "labels.csv", "train.csv", "test.csv"})
    EXPECT_EQ(fixture::read_file(a / f), fixture::read_file(b / f)) << f;
}

TEST(CliSynth, AnomalyFractionIsReported) {
  PipelineConfig c = fixture::small_config();
  c.synth.length = 10000;
  c.synth_train_length = 0;
  c.synth.anomalies = {parse_anomaly("offset start=1000 duration=100 sensor=1 magnitude=1"),
                       parse_anomaly("drift start=4000 duration=100 sensor=2 magnitude=1"),
                       parse_anomaly("cascade start=8000 duration=100 sensor=0 magnitude=1")};
  const fs::path dir = fixture::scratch("synth_frac");
  const CliRun r = invoke({"--config", write_config_file(dir, c).string(), "--out", dir.string(), "synth"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("anomaly_fraction=0.03"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(dir / "train.csv"));
}

TEST(CliSynth, NoAnomaliesGivesZeroLabels) {
  PipelineConfig c = fixture::small_config();
  c.synth.anomalies.clear();
  const fs::path dir = fixture::scratch("synth_clean");
  ASSERT_EQ(invoke({"--config", write_config_file(dir, c).string(), "--out", dir.string(), "synth"}).code, 0);
  const std::vector<int> labels = cli::read_labels((dir / "labels.csv").string(), "");
  EXPECT_EQ(labels.size(), c.synth.length);
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), 0);
}

TEST(CliTrain, CheckpointsAreByteIdentical) {
  // The checkpoint embeds the run's paths, so both runs use one directory.
  const fs::path a = trained_run("train_twice");
  const std::string first = fixture::read_file(a / "model.ckpt");
  EXPECT_EQ(trained_run("train_twice"), a);
  EXPECT_EQ(fixture::read_file(a / "model.ckpt"), first);
  for (const char* f : {"loss_temporal.csv", "loss_vgae.csv", "loss_svdd.csv"}) EXPECT_TRUE(fs::exists(a / f)) << f;
}

TEST(CliTrain, MissingInputsAreErrors) {
  const fs::path dir = fixture::scratch("train_missing");
  EXPECT_EQ(invoke({"--out", dir.string(), "train", "--topology", "nowhere.txt", "--data", "x.csv"}).code, kExitData);
  EXPECT_EQ(invoke({"--out", dir.string(), "train"}).code, kExitUsage);
  EXPECT_EQ(invoke({"bogus"}).code, kExitUsage);
  EXPECT_EQ(invoke({"--set", "svdd.quantile=2", "synth"}).code, kExitUsage);
}

TEST(CliScore, TrainingDataFalseAlarmsAndDeterminism) {
  const fs::path dir = trained_run("score");
  const auto score = [&](const fs::path& data) {
    const CliRun r = invoke({"--out", dir.string(), "score", "--data", data.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return fixture::read_file(dir / "scores_segments.csv");
  };
  const std::string first = score(dir / "test.csv");
  EXPECT_EQ(first, score(dir / "test.csv"));
  EXPECT_EQ(first.rfind("segment,start,end,score,threshold,predicted\n", 0), 0u);

  const cli::ScoreTable t = [&] {
    score(dir / "train.csv");
    return cli::read_scores((dir / "scores_segments.csv").string());
  }();
  const double alarms = static_cast<double>(std::count(t.predicted.begin(), t.predicted.end(), 1));
  EXPECT_LE(alarms / static_cast<double>(t.predicted.size()), 1.0 - 0.99 + 0.02);
}

TEST(CliScore, EmptyFileGivesHeaderOnly) {
  const fs::path dir = trained_run("score_empty");
  {
    std::ofstream os(dir / "empty.csv");
    std::ifstream in(dir / "test.csv");
    std::string header;
    std::getline(in, header);
    os << header << '\n';
  }
  const CliRun r = invoke({"--out", dir.string(), "score", "--data", (dir / "empty.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(fixture::read_file(dir / "scores_segments.csv"), "segment,start,end,score,threshold,predicted\n");
  EXPECT_EQ(fixture::read_file(dir / "scores_timestamps.csv"), "timestamp_index,score,threshold,predicted\n");
}

TEST(CliScore, VersionMismatchExitsWithDataError) {
  const fs::path dir = trained_run("score_version");
  std::string bytes = fixture::read_file(dir / "model.ckpt");
  bytes[8] = 9;
  std::ofstream(dir / "model.ckpt", std::ios::binary) << bytes;
  EXPECT_EQ(invoke({"--out", dir.string(), "score", "--data", (dir / "test.csv").string()}).code, kExitData);
}

TEST(CliEvaluate, HandExampleThroughFiles) {
  const fs::path dir = fixture::scratch("evaluate");
  std::ofstream(dir / "scores.csv") << "timestamp_index,score,threshold,predicted\n"
                                       "0,0.1,0.5,0\n1,0.2,0.5,0\n2,0.9,0.5,1\n3,0.3,0.5,0\n4,0.4,0.5,0\n";
  std::ofstream(dir / "labels.csv") << "timestamp,label\n0,0\n1,1\n2,1\n3,0\n4,1\n";
  const CliRun r = invoke({"--out", dir.string(), "evaluate", "--scores", (dir / "scores.csv").string(), "--labels",
                     (dir / "labels.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string kv = fixture::read_file(dir / "metrics.kv");
  EXPECT_NE(kv.find("precision=1\n"), std::string::npos) << kv;
  EXPECT_NE(kv.find("recall=0.66666"), std::string::npos) << kv;
  EXPECT_NE(kv.find("f1=0.8"), std::string::npos) << kv;
  EXPECT_TRUE(fs::exists(dir / "metrics.txt"));
}

TEST(CliEvaluate, PerfectScoresGiveF1One) {
  const fs::path dir = fixture::scratch("evaluate_perfect");
  std::ofstream(dir / "scores.csv") << "timestamp_index,score,threshold,predicted\n0,0,1,0\n1,2,1,1\n2,0,1,0\n";
  std::ofstream(dir / "labels.csv") << "label\n0\n1\n0\n";
  ASSERT_EQ(invoke({"--out", dir.string(), "evaluate", "--scores", (dir / "scores.csv").string(), "--labels",
                 (dir / "labels.csv").string()}).code, 0);
  EXPECT_NE(fixture::read_file(dir / "metrics.kv").find("f1=1\n"), std::string::npos);
}

TEST(CliEvaluate, MissingLabelColumnIsError) {
  const fs::path dir = fixture::scratch("evaluate_nolabel");
  std::ofstream(dir / "scores.csv") << "timestamp_index,score,threshold,predicted\n0,0,1,0\n";
  std::ofstream(dir / "labels.csv") << "timestamp,value\n0,3\n";
  const CliRun r = invoke({"--out", dir.string(), "evaluate", "--scores", (dir / "scores.csv").string(), "--labels",
                     (dir / "labels.csv").string()});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("label"), std::string::npos);
}
