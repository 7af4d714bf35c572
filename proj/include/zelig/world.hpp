#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace zelig {

/// subject.predicate=value, where value is "true", "false" or a symbolic tag.
struct Fact {
  std::string subject;
  std::string predicate;
  std::string value = "true";

  [[nodiscard]] std::string str() const { return subject + "." + predicate + "=" + value; }
  friend bool operator==(const Fact&, const Fact&) = default;
};

inline constexpr std::string_view kOnStage = "on_stage";
inline constexpr std::string_view kZone = "zone";

/// Parses "SUBJECT.pred=value". Returns nullopt on malformed input.
[[nodiscard]] inline std::optional<Fact> parse_fact(std::string_view text) {
  const auto dot = text.find('.');
  const auto eq = text.find('=');
  if (dot == std::string_view::npos || eq == std::string_view::npos || dot == 0 || eq <= dot + 1 ||
      eq + 1 >= text.size())
    return std::nullopt;
  Fact f{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1, eq - dot - 1)),
         std::string(text.substr(eq + 1))};
  for (const auto* part : {&f.subject, &f.predicate, &f.value})
    for (char c : *part)
      if (c == ' ' || c == '\t' || c == '=' || (c == '.' && part != &f.value)) return std::nullopt;
  return f;
}

/// Characters, props and their facts. Character position lives in the
/// on_stage/zone predicates so every query goes through the same map.
class WorldState {
 public:
  void declare_character(const std::string& id, bool participant, bool on_stage, const std::string& zone) {
    characters_.insert(id);
    if (participant) participant_ = id;
    set(id, std::string(kOnStage), on_stage || participant ? "true" : "false");
    if (!zone.empty()) set(id, std::string(kZone), zone);
  }

  void set(const std::string& subject, const std::string& predicate, std::string value) {
    facts_[{subject, predicate}] = std::move(value);
  }

  [[nodiscard]] std::optional<std::string> get(const std::string& subject, const std::string& predicate) const {
    if (auto it = facts_.find({subject, predicate}); it != facts_.end()) return it->second;
    return std::nullopt;
  }

  /// Missing facts read as "false".
  [[nodiscard]] bool holds(const Fact& f) const {
    auto v = get(f.subject, f.predicate);
    return v ? *v == f.value : f.value == "false";
  }

  /// Applies an effect. The participant can never leave the stage.
  void apply(const Fact& f) {
    if (f.subject == participant_ && f.predicate == kOnStage) return;
    set(f.subject, f.predicate, f.value);
  }

  void move_participant(const std::string& zone) {
    if (!participant_.empty()) set(participant_, std::string(kZone), zone);
  }

  [[nodiscard]] bool on_stage(const std::string& id) const { return holds({id, std::string(kOnStage), "true"}); }
  [[nodiscard]] std::string zone(const std::string& id) const {
    return get(id, std::string(kZone)).value_or(std::string{});
  }
  [[nodiscard]] const std::string& participant() const { return participant_; }
  [[nodiscard]] const std::set<std::string>& characters() const { return characters_; }
  [[nodiscard]] const std::map<std::pair<std::string, std::string>, std::string>& facts() const { return facts_; }

  friend bool operator==(const WorldState&, const WorldState&) = default;

 private:
  std::map<std::pair<std::string, std::string>, std::string> facts_;
  std::set<std::string> characters_;
  std::string participant_;
};

}  // namespace zelig
