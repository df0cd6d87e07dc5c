#pragma once

#include <iosfwd>
#include <json.hpp>
#include <string>
#include <vector>

#include "hyperq/model.hpp"

namespace hyperq::cli {

struct ParsedInstance {
  RawInstance raw;
  nlohmann::json metadata;
  std::vector<std::string> unknown_keys;
};

/// Reads an instance document. Unknown top-level keys raise ParseError unless
/// `lenient`, in which case they are returned for the caller to warn about.
ParsedInstance parse_instance(const nlohmann::json& doc, bool lenient);
ParsedInstance read_instance_file(const std::string& path, bool lenient);

nlohmann::ordered_json instance_to_json(const RawInstance& raw, const nlohmann::json& metadata = nullptr);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Shortest text that reads back to the same double.
std::string format_double(double x);

}  // namespace hyperq::cli
