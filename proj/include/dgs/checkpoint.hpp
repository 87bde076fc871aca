#pragma once

// Binary model container.
//
//   magic    8 bytes  "DGSSVDD\0"
//   version  u32
//   count    u32      number of blocks
//   block*   u32 name length, name bytes, u8 kind,
//            kind 0 (matrix): u64 rows, u64 cols, rows*cols f64
//            kind 1 (text):   u64 length, bytes
//
// All integers and floats are little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "dgs/config.hpp"
#include "dgs/pipeline.hpp"

namespace dgs {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::array<char, 8> kCheckpointMagic{'D', 'G', 'S', 'S', 'V', 'D', 'D', '\0'};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(buf, 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  os.write(buf, 4);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4)) throw DataError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline std::string get_bytes(std::istream& is, std::uint64_t n) {
  if (n > (std::uint64_t{1} << 32)) throw DataError("checkpoint: implausible block length");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint: truncated file");
  return s;
}

}  // namespace detail

// In-memory view of a checkpoint: named matrices and text blocks.
struct CheckpointBlocks {
  std::map<std::string, Matrix> matrices;
  std::map<std::string, std::string> texts;
  std::vector<std::string> order;  // write order

  void add(const std::string& name, Matrix m) {
    order.push_back(name);
    matrices[name] = std::move(m);
  }
  void add_text(const std::string& name, std::string t) {
    order.push_back(name);
    texts[name] = std::move(t);
  }

  const Matrix& matrix(const std::string& name) const {
    const auto it = matrices.find(name);
    if (it == matrices.end()) throw DataError("checkpoint: missing block '" + name + "'");
    return it->second;
  }
  const std::string& text(const std::string& name) const {
    const auto it = texts.find(name);
    if (it == texts.end()) throw DataError("checkpoint: missing block '" + name + "'");
    return it->second;
  }
};

inline void write_blocks(std::ostream& os, const CheckpointBlocks& blocks) {
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(blocks.order.size()));
  for (const std::string& name : blocks.order) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    if (const auto it = blocks.matrices.find(name); it != blocks.matrices.end()) {
      os.put(0);
      detail::put_u64(os, it->second.rows());
      detail::put_u64(os, it->second.cols());
      for (double v : it->second.data()) detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
    } else {
      const std::string& t = blocks.texts.at(name);
      os.put(1);
      detail::put_u64(os, t.size());
      os.write(t.data(), static_cast<std::streamsize>(t.size()));
    }
  }
}

inline CheckpointBlocks read_blocks(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw DataError("checkpoint: not a model file (bad magic)");
  }
  const std::uint32_t version = detail::get_u32(is);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: format version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t count = detail::get_u32(is);
  CheckpointBlocks blocks;
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::string name = detail::get_bytes(is, detail::get_u32(is));
    const int kind = is.get();
    if (kind == 0) {
      const std::uint64_t rows = detail::get_u64(is);
      const std::uint64_t cols = detail::get_u64(is);
      if (rows * cols > (std::uint64_t{1} << 28)) throw DataError("checkpoint: implausible matrix shape");
      std::vector<double> data(rows * cols);
      for (double& v : data) v = std::bit_cast<double>(detail::get_u64(is));
      blocks.add(name, Matrix(rows, cols, std::move(data)));
    } else if (kind == 1) {
      blocks.add_text(name, detail::get_bytes(is, detail::get_u64(is)));
    } else {
      throw DataError("checkpoint: unknown block kind in '" + name + "'");
    }
  }
  return blocks;
}

inline CheckpointBlocks to_blocks(const Model& m) {
  CheckpointBlocks b;
  std::ostringstream cfg;
  write_config(cfg, m.config);
  b.add_text("config", cfg.str());
  std::ostringstream topo;
  write_topology(topo, m.topology);
  b.add_text("topology", topo.str());
  if (m.normalization) {
    b.add("normalization.mean", Matrix::row_vector(m.normalization->mean));
    b.add("normalization.std", Matrix::row_vector(m.normalization->stddev));
  }
  if (m.temporal)
    for (const Parameter* p : m.temporal->parameters()) b.add(p->name, p->value);
  if (m.vgae) {
    b.add(m.vgae->layer0.name, m.vgae->layer0.value);
    b.add(m.vgae->layer1.name, m.vgae->layer1.value);
  }
  if (m.detector_scaling) {
    b.add("detector.mean", Matrix::row_vector(m.detector_scaling->mean));
    b.add("detector.std", Matrix::row_vector(m.detector_scaling->stddev));
  }
  for (const Parameter& p : m.svdd.layers) b.add(p.name, p.value);
  b.add("svdd.center", m.svdd.center);
  b.add("threshold", Matrix(1, 1, m.threshold));
  return b;
}

namespace detail {
inline void restore(Parameter& p, const CheckpointBlocks& b) {
  const Matrix& v = b.matrix(p.name);
  if (!v.same_shape(p.value)) {
    throw DataError("checkpoint: block '" + p.name + "' has shape " + v.shape() + ", expected " + p.value.shape());
  }
  p.value = v;
  p.zero_grad();
}
}  // namespace detail

inline Model from_blocks(const CheckpointBlocks& b) {
  Model m;
  std::istringstream cfg(b.text("config"));
  parse_config(cfg, m.config);
  m.config.validate();
  std::istringstream topo(b.text("topology"));
  m.topology = parse_topology(topo);
  if (b.matrices.count("normalization.mean")) {
    const Matrix& mean = b.matrix("normalization.mean");
    const Matrix& sd = b.matrix("normalization.std");
    m.normalization = NormalizationStats{mean.data(), sd.data()};
  }
  Rng scratch(0);
  if (m.config.use_temporal) {
    TemporalConfig tc = m.config.temporal;
    tc.window = m.config.window;
    m.temporal = TemporalEncoderParams::init(m.topology.n(), tc, scratch);
    for (Parameter* p : m.temporal->parameters()) detail::restore(*p, b);
  }
  if (m.config.use_vgae) {
    const Matrix& layer0 = b.matrix("vgae.layer0");
    m.vgae = VgaeParams::init(layer0.rows(), m.config.vgae, scratch);
    detail::restore(m.vgae->layer0, b);
    detail::restore(m.vgae->layer1, b);
  }
  if (b.matrices.count("detector.mean")) {
    m.detector_scaling = NormalizationStats{b.matrix("detector.mean").data(), b.matrix("detector.std").data()};
  }
  const Matrix& first = b.matrix("svdd.layer0");
  m.svdd = SvddNet::init(first.rows(), m.config.svdd, scratch);
  for (Parameter& p : m.svdd.layers) detail::restore(p, b);
  m.svdd.center = b.matrix("svdd.center");
  if (m.svdd.center.rows() != 1 || m.svdd.center.cols() != m.svdd.output_dim()) {
    throw DataError("checkpoint: center shape " + m.svdd.center.shape() + " does not match network output");
  }
  m.svdd.trained = true;
  m.threshold = b.matrix("threshold")[0];
  return m;
}

inline void save_model(const std::string& path, const Model& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint '" + path + "'");
  write_blocks(os, to_blocks(m));
  if (!os) throw DataError("failed writing checkpoint '" + path + "'");
}

inline Model load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint '" + path + "'");
  return from_blocks(read_blocks(is));
}

}  // namespace dgs
