#pragma once

#include <stdexcept>
#include <string>

namespace parabolic {

// Malformed input text. Line and column are 1-based; 0 means unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column)
      : std::runtime_error(what + " (line " + std::to_string(line) +
                           ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Well-formed input whose content is inconsistent (dimensions, indices).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input uses a feature the importer deliberately does not handle.
class UnsupportedFeature : public std::runtime_error {
 public:
  explicit UnsupportedFeature(const std::string& feature)
      : std::runtime_error("unsupported feature: " + feature),
        feature_(feature) {}
  const std::string& feature() const { return feature_; }

 private:
  std::string feature_;
};

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EtaSearchFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GapUndefined : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace parabolic
