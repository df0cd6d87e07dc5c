#include "instance_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hyperq/error.hpp"

namespace hyperq::cli {

namespace {

constexpr std::array kKnownKeys{"n_units",      "n_nodes",         "arrival_rate", "demand_fractions",
                                "service_rates", "preferences",    "buffer_capacity", "travel_times",
                                "metadata"};

template <class T>
T field(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(ErrorCode::ParseError, std::string("missing key '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::ParseError, std::string("key '") + key + "' has the wrong type");
  }
}

}  // namespace

ParsedInstance parse_instance(const nlohmann::json& doc, bool lenient) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "instance must be a JSON object");
  ParsedInstance out;
  for (const auto& [key, value] : doc.items()) {
    bool known = false;
    for (const char* k : kKnownKeys) known |= key == k;
    if (!known) out.unknown_keys.push_back(key);
  }
  if (!out.unknown_keys.empty() && !lenient)
    throw Error(ErrorCode::ParseError, "unknown key '" + out.unknown_keys.front() + "'");

  auto& raw = out.raw;
  raw.n_units = field<int>(doc, "n_units");
  raw.n_nodes = field<int>(doc, "n_nodes");
  raw.arrival_rate = field<double>(doc, "arrival_rate");
  raw.demand_fractions = field<std::vector<double>>(doc, "demand_fractions");
  raw.service_rates = field<std::vector<double>>(doc, "service_rates");
  raw.preferences = field<std::vector<std::vector<int>>>(doc, "preferences");
  raw.buffer_capacity = doc.contains("buffer_capacity") ? field<int>(doc, "buffer_capacity") : 0;
  if (doc.contains("travel_times") && !doc.at("travel_times").is_null())
    raw.travel_times = field<std::vector<std::vector<double>>>(doc, "travel_times");
  if (doc.contains("metadata")) out.metadata = doc.at("metadata");
  return out;
}

ParsedInstance read_instance_file(const std::string& path, bool lenient) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  return parse_instance(doc, lenient);
}

nlohmann::ordered_json instance_to_json(const RawInstance& raw, const nlohmann::json& metadata) {
  nlohmann::ordered_json ordered;
  ordered["n_units"] = raw.n_units;
  ordered["n_nodes"] = raw.n_nodes;
  ordered["arrival_rate"] = raw.arrival_rate;
  ordered["demand_fractions"] = raw.demand_fractions;
  ordered["service_rates"] = raw.service_rates;
  ordered["preferences"] = raw.preferences;
  ordered["buffer_capacity"] = raw.buffer_capacity;
  if (raw.travel_times) ordered["travel_times"] = *raw.travel_times;
  if (!metadata.is_null()) ordered["metadata"] = metadata;
  return ordered;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::ParseError, "write failed for " + path);
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace hyperq::cli
