#pragma once

#include <stdexcept>
#include <string>

namespace formlab {

/// Shape, range or ordering violation detected at an API boundary.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A NaN or infinity surfaced during training. The message carries the
/// phase and step where it happened.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration text or an invalid value. `line` is 0 when the
/// problem is not tied to a line of a file (overrides, semantic checks).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, int line, std::string key, const std::string& what)
      : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : "") +
                           (key.empty() ? "" : ": '" + key + "'") + ": " + what),
        source_(std::move(source)),
        line_(line),
        key_(std::move(key)) {}
  const std::string& source() const { return source_; }
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  std::string source_;
  int line_;
  std::string key_;
};

/// An input artifact (checkpoint, dataset) required by a command is absent
/// or was produced for a different setting.
class MissingDependency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw StructuralError(msg);
}

}  // namespace formlab
