#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support/oracles.hpp"

using namespace dgs;

namespace {

SensorTopology three_sensors() { return oracle::path_topology({0, 1, 0}, 2); }

RawStream stream_from(std::vector<std::vector<double>> rows, std::vector<int> labels = {}) {
  RawStream s;
  s.values = Matrix(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < rows[t].size(); ++j) s.values(t, j) = rows[t][j];
  s.labels = labels.empty() ? std::vector<int>(rows.size(), 0) : labels;
  for (std::size_t t = 0; t < rows.size(); ++t) s.timestamps.push_back(std::to_string(t));
  return s;
}

RawStream ramp_stream(std::size_t length, std::size_t sensors) {
  RawStream s;
  s.values = Matrix(length, sensors);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t j = 0; j < sensors; ++j) s.values(t, j) = static_cast<double>(t * 10 + j);
  s.labels.assign(length, 0);
  for (std::size_t t = 0; t < length; ++t) s.timestamps.push_back(std::to_string(t));
  return s;
}

}  // namespace

TEST(Topology, ParsesSensorsAndEdges) {
  std::istringstream in("# plant\nsensor FIT101 flow\nsensor LIT101 level\nsensor P101 flow\n"
                        "edge FIT101 LIT101\nedge LIT101 P101\n");
  const SensorTopology t = parse_topology(in);
  EXPECT_EQ(t.n(), 3u);
  EXPECT_EQ(t.k(), 2u);
  EXPECT_EQ(t.type_of, (std::vector<std::size_t>{0, 1, 0}));
  EXPECT_EQ(t.adjacency, (Matrix{{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}));
  std::ostringstream out;
  write_topology(out, t);
  std::istringstream again(out.str());
  EXPECT_EQ(parse_topology(again).adjacency, t.adjacency);
}

TEST(Topology, UnknownEdgeEndpointIsError) {
  std::istringstream in("sensor a x\nsensor b x\nedge a c\n");
  EXPECT_THROW(parse_topology(in), DataError);
}

TEST(Csv, ThreeRowsWithLabels) {
  std::istringstream in("timestamp,s0,s1,s2,label\n0,1,2,3,0\n1,4,5,6,1\n2,7,8,9,0\n");
  const RawStream s = read_csv(in, three_sensors());
  EXPECT_EQ(s.length(), 3u);
  EXPECT_EQ(s.anomaly_count(), 1u);
  EXPECT_EQ(s.values(1, 2), 6.0);
}

TEST(Csv, ColumnsAreReorderedToTopology) {
  std::istringstream in("timestamp,s2,s0,s1\n0,3,1,2\n");
  const RawStream s = read_csv(in, three_sensors());
  EXPECT_EQ(s.values, (Matrix{{1, 2, 3}}));
  EXPECT_EQ(s.anomaly_count(), 0u);
}

TEST(Csv, SwatStyleHeaderAndTextLabels) {
  std::istringstream in(" Timestamp,s0,s1,s2,Normal/Attack\n a,1,2,3,Normal\n b,4,5,6,A ttack\n");
  const RawStream s = read_csv(in, three_sensors());
  EXPECT_EQ(s.labels, (std::vector<int>{0, 1}));
}

TEST(Csv, MissingSensorColumnIsError) {
  std::istringstream in("timestamp,s0,s1\n0,1,2\n");
  EXPECT_THROW(read_csv(in, three_sensors()), DataError);
}

TEST(Csv, UnparseableCellNamesRowAndColumn) {
  std::istringstream in("timestamp,s0,s1,s2\n0,1,2,3\n1,4,oops,6\n");
  try {
    read_csv(in, three_sensors());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("s1"), std::string::npos) << msg;
    EXPECT_NE(msg.find('2'), std::string::npos) << msg;
  }
}

TEST(Csv, WriteReadRoundTrip) {
  const SensorTopology t = three_sensors();
  const RawStream s = stream_from({{0.1, -2.5, 1e-7}, {3.25, 4.0, -0.0}}, {0, 1});
  std::stringstream io;
  write_csv(io, s, t);
  const RawStream back = read_csv(io, t);
  EXPECT_EQ(back.values, s.values);
  EXPECT_EQ(back.labels, s.labels);
}

TEST(Normalizer, ConstantSensorMapsToZero) {
  const RawStream s = stream_from({{2}, {2}, {2}});
  const RawStream z = apply_normalizer(fit_normalizer(s, 0, 3), s);
  EXPECT_EQ(z.values, Matrix(3, 1));
  EXPECT_GE(fit_normalizer(s, 0, 3).stddev[0], kStdFloor);
}

TEST(Normalizer, HandZScore) {
  const RawStream s = stream_from({{0}, {10}});
  const NormalizationStats st = fit_normalizer(s, 0, 2);
  EXPECT_DOUBLE_EQ(st.mean[0], 5.0);
  EXPECT_DOUBLE_EQ(st.stddev[0], 5.0);
  EXPECT_EQ(apply_normalizer(st, s).values, (Matrix{{-1}, {1}}));
}

TEST(Normalizer, FittingDataHasZeroMeanAndTwiceIsNotIdentity) {
  Rng rng(8);
  RawStream s = stream_from({});
  s.values = rng.uniform_matrix(40, 3, -5.0, 9.0);
  s.labels.assign(40, 0);
  const NormalizationStats st = fit_normalizer(s, 0, 40);
  const RawStream once = apply_normalizer(st, s);
  const Matrix means = column_mean(once.values);
  for (double m : means.data()) EXPECT_NEAR(m, 0.0, 1e-9);
  EXPECT_NE(apply_normalizer(st, once).values, once.values);
}

TEST(Normalizer, EmptyRangeIsError) {
  const RawStream s = stream_from({{1}, {2}});
  EXPECT_THROW(fit_normalizer(s, 1, 1), DataError);
}

TEST(Normalizer, IsAffinePerSensor) {
  Rng rng(21);
  RawStream s = stream_from({});
  s.values = rng.uniform_matrix(60, 2, -3.0, 3.0);
  s.labels.assign(60, 0);
  const RawStream z = apply_normalizer(fit_normalizer(s, 0, 30), s);
  for (std::size_t j = 0; j < 2; ++j) {
    double mx = 0, mz = 0;
    for (std::size_t t = 0; t < 60; ++t) mx += s.values(t, j), mz += z.values(t, j);
    mx /= 60, mz /= 60;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t t = 0; t < 60; ++t) {
      const double dx = s.values(t, j) - mx, dz = z.values(t, j) - mz;
      sxy += dx * dz, sxx += dx * dx, syy += dz * dz;
    }
    EXPECT_NEAR(sxy / std::sqrt(sxx * syy), 1.0, 1e-12);
  }
}

TEST(Segmentation, OverlappingStarts) {
  const auto segs = segment_stream(ramp_stream(10, 2), 4, 2);
  ASSERT_EQ(segs.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(segs[i].start, 2 * i);
  EXPECT_EQ(segs[0].T.rows(), 2u);
  EXPECT_EQ(segs[0].T.cols(), 4u);
  EXPECT_EQ(segs[1].T(1, 0), 21.0);  // sensor 1 at t=2
}

TEST(Segmentation, SingleWindowHasNoSuccessor) {
  const auto segs = segment_stream(ramp_stream(4, 2), 4, 1);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_FALSE(segs[0].successor.has_value());
}

TEST(Segmentation, DisjointTilingAndSuccessors) {
  const auto segs = segment_stream(ramp_stream(23, 1), 5, 5);
  ASSERT_EQ(segs.size(), 4u);
  ASSERT_TRUE(segs[2].successor.has_value());
  EXPECT_EQ(*segs[2].successor, segs[3].T);
  EXPECT_FALSE(segs[3].successor.has_value());  // only 3 rows remain after it
}

TEST(Segmentation, CountFormulaAndCoverage) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t window = 2 + rng.index(8);
    const std::size_t stride = 1 + rng.index(window);
    const std::size_t length = window + rng.index(60);
    RawStream s = ramp_stream(length, 1);
    for (auto& l : s.labels) l = rng.uniform() < 0.2 ? 1 : 0;
    const auto segs = segment_stream(s, window, stride);
    ASSERT_EQ(segs.size(), (length - window) / stride + 1);
    EXPECT_EQ(segment_count(length, window, stride), segs.size());
    std::vector<int> seen(length, 0);
    for (const Segment& g : segs) {
      int any = 0;
      for (std::size_t i = 0; i < window; ++i) {
        seen[g.start + i] = 1;
        any |= g.labels[i];
        EXPECT_EQ(g.labels[i], s.labels[g.start + i]);
      }
      EXPECT_EQ(g.segment_label, any);
    }
    // Every labeled timestamp before the dropped remainder is covered.
    const std::size_t covered_end = segs.back().end();
    for (std::size_t t = 0; t < covered_end; ++t)
      if (s.labels[t]) {
        EXPECT_TRUE(seen[t]);
      }
  }
}

TEST(Segmentation, InvalidArguments) {
  EXPECT_THROW(segment_stream(ramp_stream(10, 1), 1, 1), ConfigError);
  EXPECT_THROW(segment_stream(ramp_stream(10, 1), 4, 0), ConfigError);
  EXPECT_THROW(segment_stream(ramp_stream(3, 1), 4, 1), DataError);
}
