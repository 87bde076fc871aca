#pragma once

// Labeled synthetic cyber-physical sensor streams. Normal behaviour is a
// per-type superposition of sinusoids plus AR(1) noise; anomalies are
// injected additively after the normal regime is drawn, so the normal part
// of a stream depends only on the seed and the topology parameters.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "dgs/data.hpp"
#include "dgs/error.hpp"
#include "dgs/random.hpp"

namespace dgs {

enum class Archetype { DelayedDrift, SustainedOffset, Cascading };

inline std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::DelayedDrift: return "drift";
    case Archetype::SustainedOffset: return "offset";
    case Archetype::Cascading: return "cascade";
  }
  return "?";
}

struct AnomalySpec {
  Archetype kind = Archetype::SustainedOffset;
  std::size_t start = 0;     // labeled onset
  std::size_t duration = 0;  // labeled window length
  std::size_t sensor = 0;    // target (seed sensor for cascades)
  double magnitude = 3.0;
  std::size_t delay = 0;     // drift: ramp begins this many steps after onset
  std::size_t lag = 5;       // cascade: per-hop onset lag
  double attenuation = 0.8;  // cascade: per-hop magnitude factor

  std::size_t end() const { return start + duration; }
};

struct SynthConfig {
  std::size_t n = 12;
  std::size_t k = 3;
  std::size_t length = 28000;
  double density = 0.25;  // probability of each extra (non-tree) edge
  std::vector<AnomalySpec> anomalies;
  std::uint64_t seed = 7;
  double noise_std = 0.1;
  double ar_coefficient = 0.7;
  std::size_t components = 3;  // sinusoids per type
  double min_period = 15.0;
  double max_period = 120.0;
};

struct SyntheticData {
  SensorTopology topology;
  RawStream stream;
};

// Parses "<drift|offset|cascade> key=value ..." (keys: start, duration,
// sensor, magnitude, delay, lag, attenuation). `sensor` may be an index.
inline AnomalySpec parse_anomaly(const std::string& text) {
  std::istringstream is(text);
  std::string kind;
  is >> kind;
  AnomalySpec spec;
  if (kind == "drift") spec.kind = Archetype::DelayedDrift;
  else if (kind == "offset") spec.kind = Archetype::SustainedOffset;
  else if (kind == "cascade") spec.kind = Archetype::Cascading;
  else throw ConfigError("anomaly: unknown archetype '" + kind + "'");
  std::string kv;
  while (is >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("anomaly: expected key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    try {
      if (key == "start") spec.start = std::stoul(val);
      else if (key == "duration") spec.duration = std::stoul(val);
      else if (key == "sensor") spec.sensor = std::stoul(val);
      else if (key == "magnitude") spec.magnitude = std::stod(val);
      else if (key == "delay") spec.delay = std::stoul(val);
      else if (key == "lag") spec.lag = std::stoul(val);
      else if (key == "attenuation") spec.attenuation = std::stod(val);
      else throw ConfigError("anomaly: unknown key '" + key + "'");
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("anomaly: bad value for '" + key + "': " + val);
    }
  }
  return spec;
}

inline std::string format_anomaly(const AnomalySpec& a) {
  std::ostringstream os;
  os << to_string(a.kind) << " start=" << a.start << " duration=" << a.duration
     << " sensor=" << a.sensor << " magnitude=" << a.magnitude;
  if (a.kind == Archetype::DelayedDrift) os << " delay=" << a.delay;
  if (a.kind == Archetype::Cascading) os << " lag=" << a.lag << " attenuation=" << a.attenuation;
  return os.str();
}

// Random connected topology: sensor i > 0 links to a random earlier sensor,
// then each remaining pair is linked with probability `density`. Types are
// assigned round-robin so every type is used.
inline SensorTopology generate_topology(std::size_t n, std::size_t k, double density, Rng& rng) {
  SensorTopology topo;
  for (std::size_t t = 0; t < k; ++t) topo.type_names.push_back("type" + std::to_string(t));
  for (std::size_t i = 0; i < n; ++i) {
    std::string name = (i < 10 ? "s0" : "s") + std::to_string(i);
    topo.sensor_names.push_back(std::move(name));
    topo.type_of.push_back(i % k);
  }
  topo.adjacency = Matrix(n, n);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t j = rng.index(i);
    topo.adjacency(i, j) = topo.adjacency(j, i) = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double u = rng.uniform();
      if (topo.adjacency(i, j) == 0.0 && u < density) topo.adjacency(i, j) = topo.adjacency(j, i) = 1.0;
    }
  return topo;
}

// Normal-regime stream over a fixed topology.
inline Matrix generate_normal(const SensorTopology& topo, const SynthConfig& cfg, Rng& rng) {
  const std::size_t n = topo.n();
  struct Wave {
    double amplitude, period, phase;
  };
  std::vector<std::vector<Wave>> waves(topo.k());
  for (auto& type_waves : waves) {
    for (std::size_t c = 0; c < cfg.components; ++c) {
      Wave w;
      w.amplitude = rng.uniform(0.5, 1.5) / static_cast<double>(c + 1);
      w.period = rng.uniform(cfg.min_period, cfg.max_period);
      w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      type_waves.push_back(w);
    }
  }
  std::vector<double> gain(n), offset(n), jitter(n);
  for (std::size_t s = 0; s < n; ++s) {
    gain[s] = rng.uniform(0.8, 1.2);
    offset[s] = rng.uniform(-1.0, 1.0);
    jitter[s] = rng.uniform(-0.3, 0.3);
  }
  Matrix values(cfg.length, n);
  std::vector<double> ar(n, 0.0);
  for (std::size_t t = 0; t < cfg.length; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      double base = 0.0;
      for (const Wave& w : waves[topo.type_of[s]]) {
        base += w.amplitude *
                std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / w.period + w.phase + jitter[s]);
      }
      ar[s] = cfg.ar_coefficient * ar[s] + cfg.noise_std * rng.normal();
      values(t, s) = gain[s] * base + offset[s] + ar[s];
    }
  }
  return values;
}

// Hop distances from `seed` (unreachable sensors get no value).
inline std::vector<std::optional<std::size_t>> hop_distances(const SensorTopology& topo,
                                                             std::size_t seed) {
  std::vector<std::optional<std::size_t>> dist(topo.n());
  const auto nbrs = topo.neighbors();
  std::queue<std::size_t> q;
  dist[seed] = 0;
  q.push(seed);
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    for (std::size_t v : nbrs[u]) {
      if (!dist[v]) {
        dist[v] = *dist[u] + 1;
        q.push(v);
      }
    }
  }
  return dist;
}

// Adds one anomaly to `values` in place and marks its labeled window.
inline void inject_anomaly(const SensorTopology& topo, const AnomalySpec& a, Matrix& values,
                           std::vector<int>& labels) {
  const std::size_t length = values.rows();
  if (a.duration == 0 || a.end() > length) {
    throw ConfigError("anomaly window [" + std::to_string(a.start) + "," + std::to_string(a.end()) +
                      ") outside stream of length " + std::to_string(length));
  }
  if (a.sensor >= topo.n()) throw ConfigError("anomaly sensor index out of range");
  for (std::size_t t = a.start; t < a.end(); ++t) labels[t] = 1;
  switch (a.kind) {
    case Archetype::SustainedOffset:
      for (std::size_t t = a.start; t < a.end(); ++t) values(t, a.sensor) += a.magnitude;
      break;
    case Archetype::DelayedDrift: {
      if (a.delay >= a.duration) throw ConfigError("drift delay must be shorter than its window");
      const std::size_t onset = a.start + a.delay;
      const double span = static_cast<double>(a.end() - onset);
      for (std::size_t t = onset; t < a.end(); ++t)
        values(t, a.sensor) += a.magnitude * static_cast<double>(t - onset + 1) / span;
      break;
    }
    case Archetype::Cascading: {
      const auto dist = hop_distances(topo, a.sensor);
      for (std::size_t s = 0; s < topo.n(); ++s) {
        if (!dist[s]) continue;
        const std::size_t onset = a.start + *dist[s] * a.lag;
        const double m = a.magnitude * std::pow(a.attenuation, static_cast<double>(*dist[s]));
        for (std::size_t t = onset; t < a.end(); ++t) values(t, s) += m;
      }
      break;
    }
  }
}

inline SyntheticData generate_synthetic(const SynthConfig& cfg) {
  if (cfg.n < 4) throw ConfigError("synthetic: need n >= 4 sensors");
  if (cfg.k < 2 || cfg.k > cfg.n) throw ConfigError("synthetic: need 2 <= k <= n types");
  if (cfg.length == 0) throw ConfigError("synthetic: length must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  for (const auto& a : cfg.anomalies) {
    if (a.duration == 0 || a.end() > cfg.length) {
      throw ConfigError("anomaly window [" + std::to_string(a.start) + "," +
                        std::to_string(a.end()) + ") outside stream of length " +
                        std::to_string(cfg.length));
    }
    for (const auto& [s, e] : windows)
      if (a.start < e && s < a.end()) throw ConfigError("anomaly windows overlap");
    windows.emplace_back(a.start, a.end());
  }

  Rng rng(cfg.seed);
  SyntheticData out;
  out.topology = generate_topology(cfg.n, cfg.k, cfg.density, rng);
  out.topology.validate();
  out.stream.values = generate_normal(out.topology, cfg, rng);
  out.stream.labels.assign(cfg.length, 0);
  out.stream.timestamps.reserve(cfg.length);
  for (std::size_t t = 0; t < cfg.length; ++t) out.stream.timestamps.push_back(std::to_string(t));
  for (const auto& a : cfg.anomalies) inject_anomaly(out.topology, a, out.stream.values, out.stream.labels);
  return out;
}

}  // namespace dgs
