#include <gtest/gtest.h>

#include "zelig/loader.hpp"
#include "zelig/trace_io.hpp"
#include "zelig/wire.hpp"

using namespace zelig;

TEST(TraceIo, EventsRoundTrip) {
  const std::vector<Event> events{Event::tick(1), Event::utterance(2, "what's \"up\"\n"),
                                  Event::intensity(3, "tension", 0.125), Event::move(3, "lamp_zone")};
  EXPECT_EQ(parse_trace(write_trace(events)), events);
}

TEST(TraceIo, CommentsAndBlankLinesAreSkipped) {
  const auto events = parse_trace(
      "# header\n\n{\"t\":1,\"kind\":\"tick\"}\n   \n  # indented comment\n"
      "{\"schema_version\":1,\"t\":4,\"kind\":\"utterance\",\"payload\":{\"text\":\"hi\"}}\n");
  EXPECT_EQ(events, (std::vector<Event>{Event::tick(1), Event::utterance(4, "hi")}));
}

TEST(TraceIo, FormatErrorsCarryLineNumbers) {
  const std::vector<std::pair<std::string, std::size_t>> cases{
      {"{\"t\":1,\"kind\":\"tick\"}\n{not json\n", 2},
      {"# c\n\n{\"t\":1,\"kind\":\"dance\"}\n", 3},
      {"{\"t\":-1,\"kind\":\"tick\"}\n", 1},
      {"{\"t\":1,\"kind\":\"utterance\",\"payload\":{}}\n", 1},
      {"{\"t\":1,\"kind\":\"intensity\",\"payload\":{\"variable\":\"v\",\"x\":\"high\"}}\n", 1},
      {"{\"schema_version\":2,\"t\":1,\"kind\":\"tick\"}\n", 1},
      {"{\"kind\":\"tick\"}\n", 1},
  };
  for (const auto& [text, line] : cases) {
    try {
      (void)parse_trace(text);
      ADD_FAILURE() << text;
    } catch (const FormatError& e) {
      EXPECT_EQ(e.line(), line) << text;
      EXPECT_NE(std::string(e.what()).find("line " + std::to_string(line)), std::string::npos);
    }
  }
}

TEST(TraceIo, ActionLogRoundTripsThroughJson) {
  const auto doc = load_script(ZELIG_SOURCE_DIR "/scripts/angry_scene.drama");
  const auto trace = parse_trace(read_text_file(ZELIG_SOURCE_DIR "/scripts/traces/angry.jsonl"));
  const auto log = run_trace(doc, trace, {}, 0).log;
  ASSERT_FALSE(log.empty());
  const std::string text = write_log(log);
  EXPECT_EQ(parse_log(text), log);
  EXPECT_EQ(write_log(parse_log(text)), text);
}

TEST(TraceIo, LogEntriesUseTheWireFieldNames) {
  ActionLogEntry e{3, 7, "Sc1/SS2", Cause::Notp, "Sc1/SS2/1/notp", "policeman_arrives_asks", "POLICEMAN", "text", {}};
  const Json j = entry_to_json(e);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"schema_version", "seq", "t", "step", "cause", "source", "action",
                                            "performer", "text", "degrees"}));
  EXPECT_EQ(j.at("cause"), "notp");
  EXPECT_EQ(j.at("schema_version"), kSchemaVersion);
}

TEST(TraceIo, MalformedLogLinesReportTheirLine) {
  try {
    (void)parse_log("\n{\"seq\":0}\n");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(WireFrames, EventFrameDefaultsToTheSessionClock) {
  const auto r = wire::parse_event_frame(R"({"type":"event","kind":"utterance","payload":{"text":"hello"}})", 12, "s1");
  ASSERT_TRUE(std::holds_alternative<Event>(r));
  EXPECT_EQ(std::get<Event>(r), Event::utterance(12, "hello"));
  const auto t = wire::parse_event_frame(R"({"type":"event","kind":"tick","t":15,"session_id":"s1"})", 12, "s1");
  EXPECT_EQ(std::get<Event>(t), Event::tick(15));
}

TEST(WireFrames, BadFramesMapToErrorCodes) {
  auto code = [](std::string_view text) {
    const auto r = wire::parse_event_frame(text, 0, "s1");
    return std::holds_alternative<wire::WireError>(r) ? std::get<wire::WireError>(r).code : wire::ErrorCode::Internal;
  };
  EXPECT_EQ(code("{oops"), wire::ErrorCode::MalformedPayload);
  EXPECT_EQ(code("[1,2]"), wire::ErrorCode::MalformedPayload);
  EXPECT_EQ(code(R"({"type":"hello"})"), wire::ErrorCode::MalformedPayload);
  EXPECT_EQ(code(R"({"type":"event","kind":"fly"})"), wire::ErrorCode::MalformedPayload);
  EXPECT_EQ(code(R"({"type":"event","kind":"tick","t":"soon"})"), wire::ErrorCode::MalformedPayload);
  EXPECT_EQ(code(R"({"type":"event","kind":"tick","session_id":"s2"})"), wire::ErrorCode::UnknownSession);
  const Json err = Json::parse(wire::error_frame({wire::ErrorCode::StaleEvent, "late"}));
  EXPECT_EQ(err.at("type"), "error");
  EXPECT_EQ(err.at("code"), "stale_event");
  EXPECT_EQ(err.at("message"), "late");
}

TEST(WireFrames, UpdateFrameCarriesStateAndEntries) {
  const auto doc = std::make_shared<const ScriptDoc>(load_script(ZELIG_SOURCE_DIR "/scripts/angry_scene.drama"));
  auto s = start_session(doc, {}, 0);
  (void)apply_event(s, Event::tick(1));
  const auto added = apply_event(s, Event::intensity(1, "toward_table", 0.9));
  const Json u = Json::parse(wire::update_frame("abc", s, added));
  EXPECT_EQ(u.at("type"), "update");
  EXPECT_EQ(u.at("session_id"), "abc");
  EXPECT_EQ(u.at("clock"), 1);
  EXPECT_EQ(u.at("status"), "running");
  EXPECT_EQ(u.at("entries").size(), added.size());
  ASSERT_EQ(u.at("degrees").size(), s.latest.size());
  EXPECT_EQ(u.at("agents").size(), s.arbitration.size());
  ASSERT_EQ(u.at("matrices").size(), 1u);
  for (const auto& m : u.at("matrices"))
    for (const auto& c : m.at("cells")) {
      EXPECT_GE(c.at("score").get<double>(), 0.0);
      EXPECT_LE(c.at("score").get<double>(), 1.0);
    }
}
