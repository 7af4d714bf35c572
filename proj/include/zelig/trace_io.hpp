#pragma once

// Line-oriented JSON formats: event traces in, action logs out. Every
// record carries schema_version so readers can reject future formats.

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "zelig/runtime.hpp"

namespace zelig {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t line, const std::string& msg)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

[[nodiscard]] inline std::string_view event_kind(const Event& e) {
  switch (e.payload.index()) {
    case 0: return "tick";
    case 1: return "utterance";
    case 2: return "intensity";
    default: return "move";
  }
}

[[nodiscard]] inline Json payload_to_json(const Event& e) {
  Json p = Json::object();
  if (const auto* u = std::get_if<UtteranceEvent>(&e.payload)) p["text"] = u->text;
  if (const auto* i = std::get_if<IntensityEvent>(&e.payload)) {
    p["variable"] = i->variable;
    p["x"] = i->x;
  }
  if (const auto* m = std::get_if<MoveEvent>(&e.payload)) p["zone"] = m->zone;
  return p;
}

[[nodiscard]] inline Json event_to_json(const Event& e) {
  return Json{{"schema_version", kSchemaVersion}, {"t", e.t}, {"kind", event_kind(e)}, {"payload", payload_to_json(e)}};
}

namespace detail {

inline const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline std::string require_string(const Json& j, const char* key) {
  const Json& v = require(j, key);
  if (!v.is_string()) throw std::invalid_argument(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline void check_version(const Json& j) {
  if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
    throw std::invalid_argument("unsupported schema_version " + j.at("schema_version").dump());
}

}  // namespace detail

/// Builds the payload of an event of `kind` at tick `t`. Throws
/// std::invalid_argument on an unknown kind or missing fields.
[[nodiscard]] inline Event event_from_parts(std::int64_t t, std::string_view kind, const Json& payload) {
  if (kind == "tick") return Event::tick(t);
  if (kind == "utterance") return Event::utterance(t, detail::require_string(payload, "text"));
  if (kind == "move") return Event::move(t, detail::require_string(payload, "zone"));
  if (kind == "intensity") {
    const Json& x = detail::require(payload, "x");
    if (!x.is_number()) throw std::invalid_argument("field 'x' must be a number");
    return Event::intensity(t, detail::require_string(payload, "variable"), x.get<double>());
  }
  throw std::invalid_argument("unknown event kind '" + std::string(kind) + "'");
}

[[nodiscard]] inline Event event_from_json(const Json& j) {
  detail::check_version(j);
  const Json& t = detail::require(j, "t");
  if (!t.is_number_integer() || t.get<std::int64_t>() < 0)
    throw std::invalid_argument("field 't' must be a non-negative integer");
  const Json payload = j.contains("payload") ? j.at("payload") : Json::object();
  return event_from_parts(t.get<std::int64_t>(), detail::require_string(j, "kind"), payload);
}

/// One JSON event per line; blank lines and lines starting with '#' are skipped.
[[nodiscard]] inline std::vector<Event> parse_trace(std::string_view text) {
  std::vector<Event> out;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back(event_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw FormatError(n, e.what());
    }
  }
  return out;
}

[[nodiscard]] inline std::string write_trace(const std::vector<Event>& events) {
  std::string out;
  for (const auto& e : events) out += event_to_json(e).dump() + "\n";
  return out;
}

[[nodiscard]] inline Json degrees_to_json(const DegreeVector& v) {
  Json terms = Json::object();
  for (const auto& d : v.degrees) terms[d.term] = d.degree;
  return Json{{"variable", v.variable_id}, {"terms", terms}, {std::string(kNotp), v.notp}};
}

[[nodiscard]] inline DegreeVector degrees_from_json(const Json& j) {
  DegreeVector v;
  v.variable_id = detail::require_string(j, "variable");
  for (const auto& [term, d] : detail::require(j, "terms").items()) v.degrees.push_back({term, d.get<double>()});
  v.notp = detail::require(j, std::string(kNotp).c_str()).get<double>();
  return v;
}

[[nodiscard]] inline Json entry_to_json(const ActionLogEntry& e) {
  Json degrees = Json::array();
  for (const auto& d : e.degrees) degrees.push_back(degrees_to_json(d));
  return Json{{"schema_version", kSchemaVersion},
              {"seq", e.seq},
              {"t", e.t},
              {"step", e.step},
              {"cause", to_string(e.cause)},
              {"source", e.source},
              {"action", e.action_id},
              {"performer", e.performer},
              {"text", e.text},
              {"degrees", degrees}};
}

[[nodiscard]] inline ActionLogEntry entry_from_json(const Json& j) {
  detail::check_version(j);
  ActionLogEntry e;
  e.seq = detail::require(j, "seq").get<std::uint64_t>();
  e.t = detail::require(j, "t").get<std::int64_t>();
  e.step = detail::require_string(j, "step");
  const auto cause = cause_from_string(detail::require_string(j, "cause"));
  if (!cause) throw std::invalid_argument("unknown cause");
  e.cause = *cause;
  e.source = detail::require_string(j, "source");
  e.action_id = detail::require_string(j, "action");
  e.performer = detail::require_string(j, "performer");
  e.text = detail::require_string(j, "text");
  for (const auto& d : detail::require(j, "degrees")) e.degrees.push_back(degrees_from_json(d));
  return e;
}

[[nodiscard]] inline std::string write_log(const std::vector<ActionLogEntry>& log) {
  std::string out;
  for (const auto& e : log) out += entry_to_json(e).dump() + "\n";
  return out;
}

[[nodiscard]] inline std::vector<ActionLogEntry> parse_log(std::string_view text) {
  std::vector<ActionLogEntry> out;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(entry_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw FormatError(n, e.what());
    }
  }
  return out;
}

}  // namespace zelig
