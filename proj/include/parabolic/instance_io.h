#pragma once

#include <optional>
#include <string>

#include "parabolic/qcqp.h"

namespace parabolic::io {

constexpr const char* kSchemaName = "parabolic-qcqp";
constexpr int kSchemaVersion = 1;

struct InstanceDocument {
  std::string name;
  QcqpInstance instance;
  std::optional<double> reference_objective;
  std::optional<Matrix> reference_solution;
};

enum class Format { kNativeJson, kQplib };

// By extension: .qplib is QPLIB, anything else native JSON.
Format detect_format(const std::string& path);

/// Throws ParseError for malformed text, SchemaError for inconsistent content
/// and UnsupportedFeature for QPLIB files outside the continuous QCQP subset.
InstanceDocument parse_instance(const std::string& text, Format format);
InstanceDocument read_instance(const std::string& path, std::optional<Format> format = {});

/// Native JSON. Doubles are written in shortest round-trip form, so parsing the
/// output reproduces every numeric field exactly. Infinite bounds are "inf"/"-inf".
std::string serialize_instance(const InstanceDocument& doc);
void write_instance(const InstanceDocument& doc, const std::string& path);

std::string read_text_file(const std::string& path);
// I/O failures throw std::runtime_error carrying the system error text.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace parabolic::io
