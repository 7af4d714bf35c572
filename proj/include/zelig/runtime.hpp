#pragma once

// Deterministic event-driven execution of a validated script. Time is the
// integer tick carried by events; every executed action is appended to an
// ordered log with its cause and the degrees that triggered it.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "zelig/agents.hpp"
#include "zelig/fuzzy.hpp"
#include "zelig/intent.hpp"
#include "zelig/matrix.hpp"
#include "zelig/parser.hpp"
#include "zelig/script.hpp"
#include "zelig/validate.hpp"
#include "zelig/world.hpp"

namespace zelig {

struct RuntimeConfig {
  Degree theta_fire = 0.5;
  std::int64_t tau_notp = 10;
  std::int64_t max_ticks = 1'000'000;
  Degree intent_threshold = 0.6;  // weaker intent matches score 0
  bool agents_act = false;        // idle agent behaviors are logged when set
  NetworkParams agents;

  friend bool operator==(const RuntimeConfig& a, const RuntimeConfig& b) {
    return a.theta_fire == b.theta_fire && a.tau_notp == b.tau_notp && a.max_ticks == b.max_ticks &&
           a.intent_threshold == b.intent_threshold && a.agents_act == b.agents_act &&
           a.agents.gamma == b.agents.gamma && a.agents.delta == b.agents.delta && a.agents.beta == b.agents.beta &&
           a.agents.theta_exec == b.agents.theta_exec && a.agents.delta_theta == b.agents.delta_theta;
  }
};

class SessionError : public std::runtime_error {
 public:
  enum class Code { InvalidScript, InvalidConfig, SessionEnded, StaleEvent, BadEvent, UnmetPrecondition };
  SessionError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] Code code() const { return code_; }

 private:
  Code code_;
};

[[nodiscard]] inline std::string_view to_string(SessionError::Code c) {
  switch (c) {
    case SessionError::Code::InvalidScript: return "InvalidScript";
    case SessionError::Code::InvalidConfig: return "InvalidConfig";
    case SessionError::Code::SessionEnded: return "SessionEnded";
    case SessionError::Code::StaleEvent: return "StaleEvent";
    case SessionError::Code::BadEvent: return "BadEvent";
    case SessionError::Code::UnmetPrecondition: return "UnmetPrecondition";
  }
  return "?";
}

inline void check_config(const RuntimeConfig& c) {
  auto bad = [](const std::string& m) { throw SessionError(SessionError::Code::InvalidConfig, m); };
  if (!(c.theta_fire > 0.0 && c.theta_fire <= 0.5)) bad("theta_fire must be in (0, 0.5]");
  if (c.tau_notp < 1) bad("tau_notp must be at least 1");
  if (c.max_ticks < 0) bad("max_ticks must be non-negative");
  if (!(c.intent_threshold >= 0.0 && c.intent_threshold <= 1.0)) bad("intent_threshold must be in [0, 1]");
  const auto& p = c.agents;
  if (p.gamma < 0 || p.delta < 0 || p.theta_exec < 0 || p.delta_theta < 0 || !(p.beta >= 0 && p.beta < 1))
    bad("agent parameters must be non-negative with beta < 1");
}

struct TickEvent {
  friend bool operator==(const TickEvent&, const TickEvent&) = default;
};
struct UtteranceEvent {
  std::string text;
  friend bool operator==(const UtteranceEvent&, const UtteranceEvent&) = default;
};
struct IntensityEvent {
  std::string variable;
  double x = 0.0;
  friend bool operator==(const IntensityEvent&, const IntensityEvent&) = default;
};
struct MoveEvent {
  std::string zone;
  friend bool operator==(const MoveEvent&, const MoveEvent&) = default;
};

struct Event {
  std::int64_t t = 0;
  std::variant<TickEvent, UtteranceEvent, IntensityEvent, MoveEvent> payload;

  static Event tick(std::int64_t t) { return {t, TickEvent{}}; }
  static Event utterance(std::int64_t t, std::string text) { return {t, UtteranceEvent{std::move(text)}}; }
  static Event intensity(std::int64_t t, std::string var, double x) { return {t, IntensityEvent{std::move(var), x}}; }
  static Event move(std::int64_t t, std::string zone) { return {t, MoveEvent{std::move(zone)}}; }
  friend bool operator==(const Event&, const Event&) = default;
};

enum class Cause { Ambient, Stated, Rule, Matrix, Notp, Bracket, Agent, End };

[[nodiscard]] inline std::string_view to_string(Cause c) {
  switch (c) {
    case Cause::Ambient: return "ambient";
    case Cause::Stated: return "stated";
    case Cause::Rule: return "rule";
    case Cause::Matrix: return "matrix";
    case Cause::Notp: return "notp";
    case Cause::Bracket: return "bracket";
    case Cause::Agent: return "agent";
    case Cause::End: return "end";
  }
  return "?";
}

[[nodiscard]] inline std::optional<Cause> cause_from_string(std::string_view s) {
  for (Cause c : {Cause::Ambient, Cause::Stated, Cause::Rule, Cause::Matrix, Cause::Notp, Cause::Bracket,
                  Cause::Agent, Cause::End})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

inline constexpr std::string_view kNarrator = "NARRATOR";
inline constexpr std::string_view kAmbientAction = "AMBIENT";
inline constexpr std::string_view kEndAction = "END";

struct ActionLogEntry {
  std::uint64_t seq = 0;
  std::int64_t t = 0;
  std::string step;    // "SCENE/STEP"
  Cause cause = Cause::Stated;
  std::string source;  // script path of the item, rule, matrix or agent module
  std::string action_id;
  std::string performer;
  std::string text;
  std::vector<DegreeVector> degrees;
  friend bool operator==(const ActionLogEntry&, const ActionLogEntry&) = default;
};

enum class SessionStatus { Running, Ended };

/// Position inside the current step. `path` descends from the rule block
/// at `item` through nested blocks by rule index (rules.size() is NOTP).
struct Cursor {
  std::size_t scene = 0;
  std::size_t step = 0;
  std::size_t item = 0;
  std::vector<std::size_t> path;
  friend bool operator==(const Cursor&, const Cursor&) = default;
};

struct AgentChoice {
  std::string character;
  std::optional<std::string> module;
  bool plot = false;
  double theta = 0.0;
  std::map<std::string, double> activation;
  friend bool operator==(const AgentChoice&, const AgentChoice&) = default;
};

struct SessionState {
  std::shared_ptr<const ScriptDoc> script;
  RuntimeConfig config;
  std::string scene_id;
  std::string step_id;
  Cursor cursor;
  bool listening = false;  // the cursor rests on a rule block
  std::int64_t clock = 0;
  std::int64_t step_entered_at = 0;  // tick the current block started listening
  bool fired_since_entry = false;
  std::set<std::vector<std::size_t>> notp_fired;  // blocks (item + path) whose NOTP fired this step entry
  std::vector<std::size_t> active_matrices;       // DECIDE items reached in this step
  WorldState world;
  std::map<std::string, DegreeVector> latest;     // last fuzzified value per variable
  Degree notp_level = 1.0;                        // NOTP degree of the current block
  std::vector<BehaviorNetwork> agents;
  std::vector<AgentChoice> arbitration;
  std::vector<ActionLogEntry> log;
  std::uint64_t rng_seed = 0;
  SessionStatus status = SessionStatus::Running;

  friend bool operator==(const SessionState& a, const SessionState& b) {
    const bool same_script = a.script == b.script || (a.script && b.script && *a.script == *b.script);
    return same_script && a.config == b.config && a.scene_id == b.scene_id && a.step_id == b.step_id &&
           a.cursor == b.cursor && a.listening == b.listening && a.clock == b.clock &&
           a.step_entered_at == b.step_entered_at && a.fired_since_entry == b.fired_since_entry &&
           a.notp_fired == b.notp_fired && a.active_matrices == b.active_matrices && a.world == b.world &&
           a.latest == b.latest && a.notp_level == b.notp_level && a.arbitration == b.arbitration &&
           a.log == b.log && a.rng_seed == b.rng_seed && a.status == b.status && agents_equal(a, b);
  }

 private:
  static bool agents_equal(const SessionState& a, const SessionState& b) {
    if (a.agents.size() != b.agents.size()) return false;
    for (std::size_t i = 0; i < a.agents.size(); ++i)
      if (a.agents[i].activation != b.agents[i].activation || a.agents[i].theta != b.agents[i].theta) return false;
    return true;
  }
};

struct PlannedAction {
  std::string action_id;
  bool inserted = false;  // bracketed action run for consistency
};

namespace detail {

[[noreturn]] inline void unmet(const ActionDef& def, const Fact& pre) {
  throw SessionError(SessionError::Code::UnmetPrecondition,
                     "action '" + def.id + "' requires " + pre.str() + " and no bracketed action establishes it");
}

inline void establish(const ScriptDoc& doc, const ActionDef& def, WorldState& world,
                      const std::vector<std::string>& brackets, std::set<std::string>& used,
                      std::vector<std::string>& out) {
  for (const auto& pre : def.preconditions) {
    if (world.holds(pre)) continue;
    for (const auto& b : brackets) {
      if (used.contains(b)) continue;
      const ActionDef* bd = doc.find_action(b);
      if (bd == nullptr || std::find(bd->effects.begin(), bd->effects.end(), pre) == bd->effects.end()) continue;
      used.insert(b);
      establish(doc, *bd, world, brackets, used, out);
      out.push_back(b);
      for (const auto& e : bd->effects) world.apply(e);
      break;
    }
    if (!world.holds(pre)) unmet(def, pre);
  }
}

}  // namespace detail

/// Bracketed actions to run before `action` so its preconditions hold,
/// in execution order. Each bracket is used at most once.
[[nodiscard]] inline std::vector<std::string> resolve_consistency(const ScriptDoc& doc, const ActionDef& action,
                                                                  const WorldState& world,
                                                                  const std::vector<std::string>& brackets) {
  WorldState w = world;
  std::set<std::string> used;
  std::vector<std::string> out;
  detail::establish(doc, action, w, brackets, used, out);
  return out;
}

/// Full execution order of a consequence: unbracketed actions in order,
/// each preceded by the brackets it needs.
[[nodiscard]] inline std::vector<PlannedAction> plan_actions(const ScriptDoc& doc, const WorldState& world,
                                                             const std::vector<ActionRef>& refs) {
  std::vector<std::string> brackets;
  for (const auto& r : refs)
    if (r.bracketed) brackets.push_back(r.action_id);
  WorldState w = world;
  std::set<std::string> used;
  std::vector<PlannedAction> out;
  for (const auto& r : refs) {
    if (r.bracketed) continue;
    const ActionDef* def = doc.find_action(r.action_id);
    if (def == nullptr)
      throw SessionError(SessionError::Code::InvalidScript, "unknown action '" + r.action_id + "'");
    std::vector<std::string> inserted;
    detail::establish(doc, *def, w, brackets, used, inserted);
    for (auto& id : inserted) out.push_back({std::move(id), true});
    out.push_back({def->id, false});
    for (const auto& e : def->effects) w.apply(e);
  }
  return out;
}

/// Truth of an agent proposition: "S.p=v" is crisp, "var.term" is the
/// necessity of the term in the variable's last degree vector, "!" negates.
[[nodiscard]] inline Degree proposition_truth(const SessionState& s, std::string_view prop) {
  if (!prop.empty() && prop.front() == '!') return 1.0 - proposition_truth(s, prop.substr(1));
  if (prop.find('=') != std::string_view::npos) {
    auto f = parse_fact(prop);
    return f && s.world.holds(*f) ? 1.0 : 0.0;
  }
  const auto dot = prop.find('.');
  if (dot == std::string_view::npos) return 0.0;
  auto it = s.latest.find(std::string(prop.substr(0, dot)));
  if (it == s.latest.end()) return 0.0;
  return measure_of(it->second, prop.substr(dot + 1)).nec;
}

/// One network per non-participant character: the shared plot goal plus
/// the character's declared goals and modules.
[[nodiscard]] inline std::vector<BehaviorNetwork> build_networks(const ScriptDoc& doc, const NetworkParams& p) {
  std::vector<BehaviorNetwork> out;
  for (const auto& c : doc.characters) {
    if (c.participant) continue;
    BehaviorNetwork net;
    net.character = c.id;
    net.theta = p.theta_exec;
    net.goals.push_back({std::string(kPlotGoal), std::string(kPlotGoal), 1.0, 0.0});
    for (const auto& g : doc.goals)
      if (g.character == c.id) net.goals.push_back({g.id, g.id, g.importance, g.relevance});
    for (const auto& m : doc.modules) {
      if (m.character != c.id) continue;
      CompetenceModule cm{m.id, m.character, m.preconditions, m.action_id, {}, {m.action_id}, false};
      for (const auto& e : m.effects) cm.effects.emplace_back(e.proposition, e.degree);
      net.modules.push_back(std::move(cm));
    }
    out.push_back(std::move(net));
  }
  return out;
}

namespace detail {

class Engine {
 public:
  explicit Engine(SessionState& s) : s_(s), doc_(*s.script) {}

  void start() {
    s_.world = initial_world(doc_);
    s_.agents = build_networks(doc_, s_.config.agents);
    s_.status = SessionStatus::Running;
    for (std::size_t sc = 0; sc < doc_.scenes.size(); ++sc) {
      s_.cursor = {sc, 0, 0, {}};
      s_.scene_id = doc_.scenes[sc].id;
      log_ambient();
      if (!doc_.scenes[sc].steps.empty()) {
        enter({sc, 0}, false);
        return;
      }
    }
    s_.status = SessionStatus::Ended;
  }

  void handle(const Event& e) {
    if (s_.status == SessionStatus::Ended) throw SessionError(SessionError::Code::SessionEnded, "session has ended");
    if (e.t < s_.clock)
      throw SessionError(SessionError::Code::StaleEvent,
                         "event at t=" + std::to_string(e.t) + " precedes clock " + std::to_string(s_.clock));
    s_.clock = e.t;
    ev_ = {};
    std::visit([this](const auto& p) { absorb(p); }, e.payload);
    if (s_.listening && ev_.intensity) run_matrices();
    if (s_.status == SessionStatus::Running && s_.listening) score_block();
    if (s_.status == SessionStatus::Running && ev_.tick) agent_cycle();
  }

  Degree sync_plot_goal() {
    const Degree rel = s_.listening ? s_.notp_level : 0.0;
    for (auto& net : s_.agents) {
      for (auto& g : net.goals)
        if (g.id == kPlotGoal) g.relevance = rel;
      std::erase_if(net.modules, [](const CompetenceModule& m) { return m.plot; });
    }
    if (!s_.listening) return rel;
    const RuleBlock& b = block_at(s_.cursor.path);
    if (!b.notp || s_.notp_fired.contains(block_key(s_.cursor.path))) return rel;
    std::vector<PlannedAction> plan;
    try {
      plan = plan_actions(doc_, s_.world, b.notp->consequence.actions);
    } catch (const SessionError&) {
      return rel;
    }
    const PlannedAction* lead = nullptr;
    for (const auto& p : plan)
      if (!p.inserted) {
        lead = &p;
        break;
      }
    if (lead == nullptr) return rel;
    const std::string& performer = doc_.find_action(lead->action_id)->performer;
    for (auto& net : s_.agents) {
      if (net.character != performer) continue;
      CompetenceModule m{"plot:" + rule_source(s_.cursor.path, b.rules.size()), performer, {}, lead->action_id,
                         {{std::string(kPlotGoal), 1.0}}, {}, true};
      for (const auto& p : plan) m.payload.push_back(p.action_id);
      net.modules.insert(net.modules.begin(), std::move(m));
    }
    return rel;
  }

 private:
  struct EventView {
    bool tick = false;
    std::optional<std::vector<MatchResult>> intents;
    std::optional<std::string> intensity;  // variable id
    std::vector<DegreeVector> snapshot;
  };

  // ---- event intake ----

  void absorb(const TickEvent&) { ev_.tick = true; }

  void absorb(const UtteranceEvent& u) {
    const Lexicon lex = doc_.lexicon();
    ev_.intents = match_intent(u.text, lex);
    std::vector<TermDegree> terms;
    for (const auto& i : lex.intents) terms.push_back({i.id, intent_degree(*ev_.intents, i.id)});
    ev_.snapshot.push_back(make_degree_vector("intent", std::move(terms)));
  }

  void absorb(const IntensityEvent& i) {
    const LinguisticVariable* var = doc_.find_variable(i.variable);
    if (var == nullptr) throw SessionError(SessionError::Code::BadEvent, "unknown variable '" + i.variable + "'");
    if (!std::isfinite(i.x)) throw SessionError(SessionError::Code::BadEvent, "intensity must be finite");
    auto v = fuzzify(*var, i.x);
    s_.latest[i.variable] = v;
    ev_.intensity = i.variable;
    ev_.snapshot.push_back(std::move(v));
  }

  void absorb(const MoveEvent& m) {
    if (m.zone.empty() || !detail::is_id(m.zone))
      throw SessionError(SessionError::Code::BadEvent, "invalid zone '" + m.zone + "'");
    s_.world.move_participant(m.zone);
  }

  // ---- addressing ----

  const Scene& scene() const { return doc_.scenes[s_.cursor.scene]; }
  const SceneStep& step() const { return scene().steps[s_.cursor.step]; }
  std::string step_path() const { return scene().id + "/" + step().id; }
  std::string item_source(std::size_t item) const { return step_path() + "/" + std::to_string(item + 1); }

  const RuleBlock& block_at(const std::vector<std::size_t>& path) const {
    const RuleBlock* b = &std::get<RuleBlock>(step().items[s_.cursor.item].node);
    for (std::size_t r : path) b = &b->rule_at(r).consequence.nested.front();
    return *b;
  }

  std::vector<std::size_t> block_key(const std::vector<std::size_t>& path) const {
    std::vector<std::size_t> key{s_.cursor.item};
    key.insert(key.end(), path.begin(), path.end());
    return key;
  }

  std::string rule_source(const std::vector<std::size_t>& block_path, std::size_t r) const {
    std::string out = item_source(s_.cursor.item);
    const RuleBlock* b = &std::get<RuleBlock>(step().items[s_.cursor.item].node);
    auto label = [](const RuleBlock& blk, std::size_t i) {
      return i < blk.rules.size() ? "r" + std::to_string(i + 1) : std::string("notp");
    };
    for (std::size_t i : block_path) {
      out += "/" + label(*b, i);
      b = &b->rule_at(i).consequence.nested.front();
    }
    return out + "/" + label(*b, r);
  }

  // ---- logging and execution ----

  void log(Cause cause, std::string source, std::string action, std::string performer, std::string text,
           std::vector<DegreeVector> degrees) {
    s_.log.push_back({s_.log.size(), s_.clock, s_.scene_id + "/" + s_.step_id, cause, std::move(source),
                      std::move(action), std::move(performer), std::move(text), std::move(degrees)});
  }

  void log_ambient() {
    const Scene& sc = doc_.scenes[s_.cursor.scene];
    for (std::size_t i = 0; i < sc.ambient.size(); ++i)
      s_.log.push_back({s_.log.size(), s_.clock, sc.id, Cause::Ambient, sc.id + "/ambient/" + std::to_string(i + 1),
                        std::string(kAmbientAction), std::string(kNarrator), sc.ambient[i], {}});
  }

  void execute(const std::vector<ActionRef>& refs, Cause cause, const std::string& source,
               const std::vector<DegreeVector>& degrees) {
    for (const auto& p : plan_actions(doc_, s_.world, refs)) {
      const ActionDef& def = *doc_.find_action(p.action_id);
      log(p.inserted ? Cause::Bracket : cause, source, def.id, def.performer, def.description, degrees);
      for (const auto& e : def.effects) s_.world.apply(e);
    }
  }

  void end(const std::string& source) {
    log(Cause::End, source, std::string(kEndAction), std::string(kNarrator), std::string(kEndAction), {});
    s_.status = SessionStatus::Ended;
    s_.listening = false;
  }

  // ---- step flow ----

  void enter(StepRef r, bool log_scene_ambient) {
    const bool new_scene = r.scene != s_.cursor.scene;
    s_.cursor = {r.scene, r.step, 0, {}};
    s_.scene_id = scene().id;
    s_.step_id = step().id;
    s_.listening = false;
    s_.notp_fired.clear();
    s_.active_matrices.clear();
    s_.fired_since_entry = false;
    s_.step_entered_at = s_.clock;
    if (new_scene && log_scene_ambient) log_ambient();
    run_items(0);
  }

  void arm(std::vector<std::size_t> path) {
    s_.cursor.path = std::move(path);
    s_.listening = true;
    s_.step_entered_at = s_.clock;
    s_.fired_since_entry = false;
    s_.notp_level = 1.0;
  }

  void run_items(std::size_t i) {
    s_.listening = false;
    const auto& items = step().items;
    for (; i < items.size(); ++i) {
      const auto& node = items[i].node;
      if (const auto* st = std::get_if<StatedAction>(&node)) {
        execute({{st->action.action_id, false}}, Cause::Stated, item_source(i), {});
      } else if (std::holds_alternative<MatrixDirective>(node)) {
        s_.active_matrices.push_back(i);
      } else if (std::holds_alternative<RuleBlock>(node)) {
        s_.cursor.item = i;
        arm({});
        return;
      } else {
        end(item_source(i));
        return;
      }
    }
    fall_through();
  }

  void fall_through() {
    s_.listening = false;
    if (auto n = next_step(doc_, {s_.cursor.scene, s_.cursor.step}))
      enter(*n, true);
    else
      s_.status = SessionStatus::Ended;
  }

  // Stated actions after the current block, stopping at END.
  void trailing() {
    s_.listening = false;
    const auto& items = step().items;
    for (std::size_t i = s_.cursor.item + 1; i < items.size(); ++i) {
      if (const auto* st = std::get_if<StatedAction>(&items[i].node)) {
        execute({{st->action.action_id, false}}, Cause::Stated, item_source(i), {});
      } else if (std::holds_alternative<EndMarker>(items[i].node)) {
        end(item_source(i));
        return;
      }
    }
  }

  void follow(const Rule& rule, const std::vector<std::size_t>& block_path, std::size_t r) {
    auto rule_path = block_path;
    rule_path.push_back(r);
    if (!rule.consequence.nested.empty()) {
      arm(std::move(rule_path));
      return;
    }
    control(rule.consequence.control, rule_path, rule.is_notp());
  }

  void control(const Control& c, const std::vector<std::size_t>& rule_path, bool is_notp) {
    std::vector<std::size_t> block_path(rule_path.begin(), rule_path.end() - 1);
    switch (c.kind) {
      case ControlKind::Stay:
      case ControlKind::Wait:
        if (is_notp) {
          s_.cursor.path = std::move(block_path);
          s_.listening = true;
        } else {
          arm(std::move(block_path));
        }
        return;
      case ControlKind::End:
        end(rule_source(block_path, rule_path.back()));
        return;
      case ControlKind::NextStep:
        trailing();
        if (s_.status == SessionStatus::Running) fall_through();
        return;
      case ControlKind::Goto: {
        auto target = resolve_step(doc_, s_.cursor.scene, c.target);
        if (!target) throw SessionError(SessionError::Code::InvalidScript, "unknown step '" + c.target + "'");
        trailing();
        if (s_.status == SessionStatus::Running) enter(*target, true);
        return;
      }
      case ControlKind::Continue:
        if (block_path.empty()) {
          run_items(s_.cursor.item + 1);
        } else {
          std::vector<std::size_t> parent_block(block_path.begin(), block_path.end() - 1);
          const Rule& parent = block_at(parent_block).rule_at(block_path.back());
          control(parent.consequence.control, block_path, parent.is_notp());
        }
        return;
    }
  }

  // ---- evaluation ----

  DegreeVector latest_or_silent(const std::string& var_id) const {
    if (auto it = s_.latest.find(var_id); it != s_.latest.end()) return it->second;
    std::vector<TermDegree> zero;
    if (const auto* v = doc_.find_variable(var_id))
      for (const auto& t : v->terms) zero.push_back({t.id, 0.0});
    return make_degree_vector(var_id, std::move(zero));
  }

  void run_matrices() {
    for (std::size_t item : std::vector<std::size_t>(s_.active_matrices)) {
      const auto& md = std::get<MatrixDirective>(step().items[item].node);
      const DecisionMatrix* m = doc_.find_matrix(md.matrix_id);
      if (m == nullptr || (*ev_.intensity != m->row_variable && *ev_.intensity != m->col_variable)) continue;
      const DegreeVector rv = latest_or_silent(m->row_variable);
      const DegreeVector cv = latest_or_silent(m->col_variable);
      const ActionSet selected = select_actions(evaluate_matrix(*m, rv, cv), s_.config.theta_fire);
      WorldState projected = s_.world;
      for (const auto& a : selected)
        if (const auto* def = doc_.find_action(a))
          for (const auto& e : def->effects) projected.apply(e);
      const ActionSet resolved = resolve_incompatibilities(selected, m->incompatibilities,
                                                           [&](const Fact& f) { return projected.holds(f); });
      std::vector<ActionRef> refs;
      for (const auto& a : resolved) refs.push_back({a, false});
      execute(refs, Cause::Matrix, item_source(item) + "/" + m->id, {rv, cv});
    }
  }

  Degree score(const Condition& c) const {
    if (const auto* i = std::get_if<IntentCond>(&c)) {
      if (!ev_.intents) return 0.0;
      const Degree d = intent_degree(*ev_.intents, i->intent_id);
      return reaches(d, s_.config.intent_threshold) ? d : 0.0;
    }
    if (const auto* t = std::get_if<TermCond>(&c)) {
      if (ev_.intensity != t->variable_id) return 0.0;
      return s_.latest.at(t->variable_id).at(t->term_id);
    }
    if (const auto* to = std::get_if<TimeoutCond>(&c)) return s_.clock - s_.step_entered_at >= to->ticks ? 1.0 : 0.0;
    if (const auto* st = std::get_if<StateCond>(&c)) return s_.world.holds(st->fact) ? 1.0 : 0.0;
    return 0.0;
  }

  void score_block() {
    const auto path = s_.cursor.path;
    const RuleBlock& b = block_at(path);
    std::vector<Degree> degrees;
    std::vector<std::size_t> fired;
    for (std::size_t i = 0; i < b.rules.size(); ++i) {
      degrees.push_back(score(b.rules[i].condition));
      if (reaches(degrees.back(), s_.config.theta_fire)) fired.push_back(i);
    }
    s_.notp_level = notp_degree(degrees);
    if (!fired.empty()) {
      s_.fired_since_entry = true;
      for (std::size_t i : fired) execute(b.rules[i].consequence.actions, Cause::Rule, rule_source(path, i), ev_.snapshot);
      follow(b.rules[fired.front()], path, fired.front());
      return;
    }
    if (!b.notp || s_.notp_fired.contains(block_key(path))) return;
    const std::int64_t delay = b.notp_after.value_or(s_.config.tau_notp);
    const bool due = b.notp_mode == NotpMode::Immediate ||
                     (ev_.tick && !s_.fired_since_entry && s_.clock - s_.step_entered_at >= delay);
    if (!due) return;
    s_.notp_fired.insert(block_key(path));
    execute(b.notp->consequence.actions, Cause::Notp, rule_source(path, b.rules.size()), ev_.snapshot);
    follow(*b.notp, path, b.rules.size());
  }

  void agent_cycle() {
    sync_plot_goal();
    const auto truth = [this](const std::string& p) { return proposition_truth(s_, p); };
    s_.arbitration.clear();
    for (auto& net : s_.agents) {
      net.activation = spread_activation(net, s_.config.agents);
      const auto chosen = select_behavior(net, s_.config.agents, truth);
      AgentChoice snap{net.character, std::nullopt, false, net.theta, net.activation};
      if (chosen) {
        const CompetenceModule& m = net.modules[*chosen];
        snap.module = m.id;
        snap.plot = m.plot;
        if (s_.config.agents_act && !m.plot) act(net, m);
      }
      s_.arbitration.push_back(std::move(snap));
    }
  }

  // Idle behavior: logged when its action's preconditions hold; the module's
  // activation is spent by acting.
  void act(BehaviorNetwork& net, const CompetenceModule& m) {
    for (const auto& id : m.payload) {
      const ActionDef* def = doc_.find_action(id);
      if (def == nullptr) return;
      for (const auto& pre : def->preconditions)
        if (!s_.world.holds(pre)) return;
    }
    for (const auto& id : m.payload) {
      const ActionDef& def = *doc_.find_action(id);
      log(Cause::Agent, "agent/" + net.character + "/" + m.id, def.id, def.performer, def.description, {});
      for (const auto& e : def.effects) s_.world.apply(e);
    }
    net.activation[m.id] = 0.0;
  }

  SessionState& s_;
  const ScriptDoc& doc_;
  EventView ev_;
};

}  // namespace detail

[[nodiscard]] inline SessionState start_session(std::shared_ptr<const ScriptDoc> script, const RuntimeConfig& config,
                                                std::uint64_t seed) {
  check_config(config);
  if (!script) throw SessionError(SessionError::Code::InvalidScript, "no script");
  const auto report = validate_script(*script);
  if (!report.ok()) {
    std::string msg = "script has " + std::to_string(report.error_count()) + " validation error(s)";
    for (const auto& f : report.findings)
      if (f.severity == Severity::Error) {
        msg += ": " + f.message;
        break;
      }
    throw SessionError(SessionError::Code::InvalidScript, msg);
  }
  SessionState s;
  s.script = std::move(script);
  s.config = config;
  s.rng_seed = seed;
  detail::Engine(s).start();
  return s;
}

[[nodiscard]] inline SessionState start_session(const ScriptDoc& script, const RuntimeConfig& config,
                                                std::uint64_t seed) {
  return start_session(std::make_shared<const ScriptDoc>(script), config, seed);
}

/// Applies one event in place and returns the entries it produced. On an
/// exception the state is left unchanged.
inline std::vector<ActionLogEntry> apply_event(SessionState& state, const Event& event) {
  SessionState next = state;
  detail::Engine(next).handle(event);
  std::vector<ActionLogEntry> added(next.log.begin() + static_cast<std::ptrdiff_t>(state.log.size()), next.log.end());
  state = std::move(next);
  return added;
}

[[nodiscard]] inline std::pair<SessionState, std::vector<ActionLogEntry>> handle_event(const SessionState& state,
                                                                                       const Event& event) {
  SessionState next = state;
  auto added = apply_event(next, event);
  return {std::move(next), std::move(added)};
}

/// Sets the plot goal's relevance to the current block's NOTP degree and
/// wires the block's NOTP consequence in as its performer's plot module.
inline Degree sync_plot_goal(SessionState& state) { return detail::Engine(state).sync_plot_goal(); }

class TraceError : public SessionError {
 public:
  TraceError(const SessionError& e, std::size_t index)
      : SessionError(e.code(), "event " + std::to_string(index + 1) + ": " + e.what()), index_(index) {}
  [[nodiscard]] std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// start_session followed by every event with t <= max_ticks, stopping at END.
[[nodiscard]] inline SessionState run_trace(std::shared_ptr<const ScriptDoc> script, const std::vector<Event>& trace,
                                            const RuntimeConfig& config, std::uint64_t seed) {
  SessionState s = start_session(std::move(script), config, seed);
  for (std::size_t i = 0; i < trace.size() && s.status == SessionStatus::Running; ++i) {
    if (trace[i].t > config.max_ticks) break;
    try {
      detail::Engine(s).handle(trace[i]);
    } catch (const SessionError& e) {
      throw TraceError(e, i);
    }
  }
  return s;
}

[[nodiscard]] inline SessionState run_trace(const ScriptDoc& script, const std::vector<Event>& trace,
                                            const RuntimeConfig& config, std::uint64_t seed) {
  return run_trace(std::make_shared<const ScriptDoc>(script), trace, config, seed);
}

/// Replays a log against the initial world; returns the first entry whose
/// action's preconditions do not hold at its position, if any. Preconditions
/// on the participant's zone are skipped since moves are not logged.
[[nodiscard]] inline std::optional<std::size_t> first_unsound_entry(const ScriptDoc& doc,
                                                                    const std::vector<ActionLogEntry>& log) {
  WorldState w = initial_world(doc);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const ActionDef* def = doc.find_action(log[i].action_id);
    if (def == nullptr) continue;
    for (const auto& pre : def->preconditions) {
      if (pre.subject == w.participant() && pre.predicate == kZone) continue;
      if (!w.holds(pre)) return i;
    }
    for (const auto& e : def->effects) w.apply(e);
  }
  return std::nullopt;
}

}  // namespace zelig
