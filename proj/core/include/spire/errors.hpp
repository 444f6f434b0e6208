#pragma once

#include <stdexcept>
#include <string>

namespace spire {

// Exit-code categories surfaced by the CLI. Library code throws the typed
// exceptions below; main() maps them back to these codes.
enum class ErrorCode : int {
  ok = 0,
  config = 2,
  data = 3,
  divergence = 4,
  io = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorCode::config, msg) {}
};

struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(ErrorCode::data, msg) {}
};

// Tensor/geometry mismatches; a kind of data error for exit-code purposes.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(ErrorCode::data, msg) {}
};

struct DivergenceError : Error {
  explicit DivergenceError(const std::string& msg) : Error(ErrorCode::divergence, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorCode::io, msg) {}
};

inline void check_config(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

inline void check_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace spire
