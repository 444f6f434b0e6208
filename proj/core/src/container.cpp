#include "spire/container.hpp"

#include <bit>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spire/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "container format assumes a little-endian host");

namespace spire {

namespace fs = std::filesystem;
using nlohmann::json;

bool Manifest::has_array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return true;
  return false;
}

const ArrayEntry& Manifest::array(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw DataError("container has no array named '" + name + "'");
}

std::string manifest_to_json(const Manifest& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["kind"] = m.kind;
  if (!m.preset.empty()) j["preset"] = m.preset;
  j["seed"] = m.seed;
  j["n_trials"] = m.n_trials;
  j["T"] = m.T;
  j["fs"] = m.fs;
  j["regions"] = json::array();
  for (const auto& r : m.regions) {
    j["regions"].push_back({{"name", r.name},
                            {"n_rows", r.n_rows},
                            {"contacts_per_row", r.contacts_per_row}});
  }
  j["arrays"] = json::array();
  for (const auto& a : m.arrays) {
    j["arrays"].push_back(
        {{"name", a.name}, {"shape", a.shape}, {"dtype", a.dtype}, {"file", a.file}});
  }
  if (!m.extra.empty()) j["extra"] = json::parse(m.extra);
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  json j = json::parse(text);
  Manifest m;
  m.schema_version = j.at("schema_version").get<int>();
  m.kind = j.value("kind", "");
  m.preset = j.value("preset", "");
  m.seed = j.value("seed", std::uint64_t{0});
  m.n_trials = j.value("n_trials", 0LL);
  m.T = j.value("T", 0LL);
  m.fs = j.value("fs", 0.0);
  for (const auto& r : j.value("regions", json::array())) {
    m.regions.push_back({r.at("name").get<std::string>(), r.at("n_rows").get<int>(),
                         r.at("contacts_per_row").get<int>()});
  }
  for (const auto& a : j.value("arrays", json::array())) {
    ArrayEntry e;
    e.name = a.at("name").get<std::string>();
    e.shape = a.at("shape").get<std::vector<long long>>();
    e.dtype = a.at("dtype").get<std::string>();
    e.file = a.at("file").get<std::string>();
    m.arrays.push_back(std::move(e));
  }
  if (j.contains("extra")) m.extra = j["extra"].dump();
  return m;
}

ContainerWriter::ContainerWriter(const std::string& dir) : dir_(dir) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create container directory " + dir_ + ": " + ec.message());
}

void ContainerWriter::add_array(const std::string& name, const float* data, std::size_t count,
                                std::vector<long long> shape) {
  long long prod = 1;
  for (auto d : shape) prod *= d;
  check_shape(prod == static_cast<long long>(count),
              "array '" + name + "': shape does not match element count");
  ArrayEntry e;
  e.name = name;
  e.shape = std::move(shape);
  e.file = name + ".bin";
  std::ofstream out(fs::path(dir_) / e.file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (fs::path(dir_) / e.file).string());
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
  if (!out) throw IoError("short write to " + e.file);
  m_.arrays.push_back(std::move(e));
}

void ContainerWriter::add_matrix(const std::string& name, const Matf& m) {
  std::vector<float> buf(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) buf[k++] = m(i, j);
  add_array(name, buf.data(), buf.size(), {m.rows(), m.cols()});
}

void ContainerWriter::add_trials(const std::string& name, const std::vector<Matf>& trials) {
  check_shape(!trials.empty(), "array '" + name + "': empty trial list");
  const Eigen::Index T = trials[0].rows(), C = trials[0].cols();
  std::vector<float> buf(trials.size() * static_cast<std::size_t>(T * C));
  std::size_t k = 0;
  for (const auto& m : trials) {
    check_shape(m.rows() == T && m.cols() == C, "array '" + name + "': ragged trials");
    for (Eigen::Index i = 0; i < T; ++i)
      for (Eigen::Index j = 0; j < C; ++j) buf[k++] = m(i, j);
  }
  add_array(name, buf.data(), buf.size(), {static_cast<long long>(trials.size()), T, C});
}

void ContainerWriter::add_vector(const std::string& name, const Vecf& v) {
  add_array(name, v.data(), static_cast<std::size_t>(v.size()), {v.size()});
}

void ContainerWriter::finish() {
  if (finished_) return;
  std::ofstream out(fs::path(dir_) / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + dir_);
  out << manifest_to_json(m_);
  finished_ = true;
}

ContainerReader::ContainerReader(const std::string& dir) : dir_(dir) {
  std::ifstream in(fs::path(dir_) / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + dir_);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    m_ = manifest_from_json(text);
  } catch (const json::exception& e) {
    throw DataError("malformed manifest in " + dir_ + ": " + e.what());
  }
}

std::vector<float> ContainerReader::read_raw(const std::string& name,
                                             std::vector<long long>* shape) const {
  const ArrayEntry& e = m_.array(name);
  if (e.dtype != "f32") throw DataError("array '" + name + "': unsupported dtype " + e.dtype);
  long long count = 1;
  for (auto d : e.shape) count *= d;
  std::ifstream in(fs::path(dir_) / e.file, std::ios::binary);
  if (!in) throw IoError("cannot open " + e.file + " in " + dir_);
  std::vector<float> buf(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(buf.data()), count * 4);
  if (in.gcount() != count * 4) throw DataError("array '" + name + "': truncated file");
  if (shape) *shape = e.shape;
  return buf;
}

Matf ContainerReader::read_matrix(const std::string& name) const {
  std::vector<long long> shape;
  auto buf = read_raw(name, &shape);
  if (shape.size() != 2) throw DataError("array '" + name + "' is not 2-d");
  Matf m(shape[0], shape[1]);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = buf[k++];
  return m;
}

std::vector<Matf> ContainerReader::read_trials(const std::string& name) const {
  std::vector<long long> shape;
  auto buf = read_raw(name, &shape);
  if (shape.size() != 3) throw DataError("array '" + name + "' is not 3-d");
  std::vector<Matf> trials(static_cast<std::size_t>(shape[0]));
  std::size_t k = 0;
  for (auto& m : trials) {
    m.resize(shape[1], shape[2]);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = buf[k++];
  }
  return trials;
}

Vecf ContainerReader::read_vector(const std::string& name) const {
  std::vector<long long> shape;
  auto buf = read_raw(name, &shape);
  if (shape.size() != 1) throw DataError("array '" + name + "' is not 1-d");
  return Eigen::Map<const Vecf>(buf.data(), static_cast<Eigen::Index>(buf.size()));
}

}  // namespace spire
