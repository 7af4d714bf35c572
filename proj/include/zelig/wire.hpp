#pragma once

// Frames exchanged with play clients. Client frames carry events; server
// frames are updates (a function of the state and the entries just added)
// or errors.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "zelig/trace_io.hpp"

namespace zelig::wire {

enum class ErrorCode { UnknownSession, StaleEvent, MalformedPayload, BadEvent, SessionEnded, NotFound, Internal };

[[nodiscard]] inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownSession: return "unknown_session";
    case ErrorCode::StaleEvent: return "stale_event";
    case ErrorCode::MalformedPayload: return "malformed_payload";
    case ErrorCode::BadEvent: return "bad_event";
    case ErrorCode::SessionEnded: return "session_ended";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Internal: return "internal";
  }
  return "internal";
}

struct WireError {
  ErrorCode code = ErrorCode::Internal;
  std::string message;
};

[[nodiscard]] inline ErrorCode error_code_for(SessionError::Code c) {
  switch (c) {
    case SessionError::Code::StaleEvent: return ErrorCode::StaleEvent;
    case SessionError::Code::SessionEnded: return ErrorCode::SessionEnded;
    case SessionError::Code::BadEvent: return ErrorCode::BadEvent;
    default: return ErrorCode::Internal;
  }
}

[[nodiscard]] inline std::string error_frame(const WireError& e) {
  return Json{{"schema_version", kSchemaVersion}, {"type", "error"}, {"code", to_string(e.code)}, {"message", e.message}}
      .dump();
}

/// Parses {"type":"event","kind":...,"payload":{...}[,"t":N][,"session_id":...]}.
/// A missing t means "now" (the session clock).
[[nodiscard]] inline std::variant<Event, WireError> parse_event_frame(std::string_view text, std::int64_t clock,
                                                                      std::string_view session_id) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    return WireError{ErrorCode::MalformedPayload, std::string("not JSON: ") + e.what()};
  }
  try {
    if (!j.is_object()) throw std::invalid_argument("frame must be an object");
    if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion)
      throw std::invalid_argument("unsupported schema_version");
    if (!j.contains("type") || j.at("type") != "event") throw std::invalid_argument("frame type must be \"event\"");
    if (j.contains("session_id") && j.at("session_id") != session_id)
      return WireError{ErrorCode::UnknownSession, "frame addressed to another session"};
    std::int64_t t = clock;
    if (j.contains("t")) {
      if (!j.at("t").is_number_integer()) throw std::invalid_argument("field 't' must be an integer");
      t = j.at("t").get<std::int64_t>();
    }
    if (!j.contains("kind") || !j.at("kind").is_string()) throw std::invalid_argument("missing field 'kind'");
    const Json payload = j.contains("payload") ? j.at("payload") : Json::object();
    return event_from_parts(t, j.at("kind").get<std::string>(), payload);
  } catch (const std::exception& e) {
    return WireError{ErrorCode::MalformedPayload, e.what()};
  }
}

[[nodiscard]] inline std::string_view status_text(SessionStatus s) {
  return s == SessionStatus::Running ? "running" : "ended";
}

/// Scored cells of every matrix active in the current step.
[[nodiscard]] inline Json matrices_json(const SessionState& s) {
  Json out = Json::array();
  if (s.status != SessionStatus::Running) return out;
  const auto& step = s.script->scenes[s.cursor.scene].steps[s.cursor.step];
  for (std::size_t item : s.active_matrices) {
    const auto* m = s.script->find_matrix(std::get<MatrixDirective>(step.items[item].node).matrix_id);
    if (m == nullptr) continue;
    auto vec = [&](const std::string& var) {
      if (auto it = s.latest.find(var); it != s.latest.end()) return it->second;
      std::vector<TermDegree> zero;
      if (const auto* v = s.script->find_variable(var))
        for (const auto& t : v->terms) zero.push_back({t.id, 0.0});
      return make_degree_vector(var, std::move(zero));
    };
    Json cells = Json::array();
    for (const auto& c : evaluate_matrix(*m, vec(m->row_variable), vec(m->col_variable)))
      cells.push_back(Json{{"row", c.row_term}, {"col", c.col_term}, {"score", c.score}, {"actions", c.actions}});
    out.push_back(Json{{"id", m->id}, {"cells", cells}});
  }
  return out;
}

[[nodiscard]] inline Json agents_json(const SessionState& s) {
  Json out = Json::array();
  for (const auto& a : s.arbitration) {
    Json act = Json::object();
    for (const auto& [id, v] : a.activation) act[id] = v;
    out.push_back(Json{{"character", a.character},
                       {"module", a.module ? Json(*a.module) : Json(nullptr)},
                       {"plot", a.plot},
                       {"theta", a.theta},
                       {"activation", act}});
  }
  return out;
}

[[nodiscard]] inline std::string update_frame(const std::string& session_id, const SessionState& s,
                                              const std::vector<ActionLogEntry>& entries) {
  Json es = Json::array();
  for (const auto& e : entries) es.push_back(entry_to_json(e));
  Json degrees = Json::array();
  for (const auto& [var, v] : s.latest) degrees.push_back(degrees_to_json(v));
  return Json{{"schema_version", kSchemaVersion},
              {"type", "update"},
              {"session_id", session_id},
              {"step", s.scene_id + "/" + s.step_id},
              {"clock", s.clock},
              {"status", status_text(s.status)},
              {"entries", es},
              {"degrees", degrees},
              {"agents", agents_json(s)},
              {"matrices", matrices_json(s)}}
      .dump();
}

}  // namespace zelig::wire
