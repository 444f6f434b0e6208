#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spire/mat.hpp"

namespace spire {

// Directory container: a UTF-8 JSON manifest plus one raw little-endian
// float32 row-major .bin file per array. Used for datasets and checkpoints;
// readable from any language with a JSON parser and fromfile().

struct RegionInfo {
  std::string name;
  int n_rows = 0;
  int contacts_per_row = 0;
};

struct ArrayEntry {
  std::string name;
  std::vector<long long> shape;
  std::string dtype = "f32";
  std::string file;
};

struct Manifest {
  int schema_version = 1;
  std::string kind;  // "dataset" | "checkpoint"
  std::string preset;
  std::uint64_t seed = 0;
  long long n_trials = 0;
  long long T = 0;
  double fs = 0.0;
  std::vector<RegionInfo> regions;
  std::vector<ArrayEntry> arrays;
  std::string extra;  // serialized JSON object for domain-specific keys

  bool has_array(const std::string& name) const;
  const ArrayEntry& array(const std::string& name) const;
};

class ContainerWriter {
 public:
  explicit ContainerWriter(const std::string& dir);

  Manifest& manifest() { return m_; }

  void add_array(const std::string& name, const float* data, std::size_t count,
                 std::vector<long long> shape);
  // Row-major (rows, cols) serialization of a column-major Eigen matrix.
  void add_matrix(const std::string& name, const Matf& m);
  // (n_trials, T, C) stack of per-trial T-by-C matrices.
  void add_trials(const std::string& name, const std::vector<Matf>& trials);
  void add_vector(const std::string& name, const Vecf& v);

  // Writes manifest.json. Call last.
  void finish();

 private:
  std::string dir_;
  Manifest m_;
  bool finished_ = false;
};

class ContainerReader {
 public:
  explicit ContainerReader(const std::string& dir);

  const Manifest& manifest() const { return m_; }
  const std::string& dir() const { return dir_; }

  std::vector<float> read_raw(const std::string& name, std::vector<long long>* shape = nullptr) const;
  Matf read_matrix(const std::string& name) const;
  std::vector<Matf> read_trials(const std::string& name) const;
  Vecf read_vector(const std::string& name) const;

 private:
  std::string dir_;
  Manifest m_;
};

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

}  // namespace spire
