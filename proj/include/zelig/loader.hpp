#pragma once

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "zelig/parser.hpp"

namespace zelig {

/// The file could not be read; what() carries the OS message.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[nodiscard]] inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": " + std::strerror(errno));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

template <typename T, typename IdFn>
void merge_unique(std::vector<T>& into, std::vector<T>& from, IdFn id, std::string_view kind) {
  for (auto& item : from) {
    for (const auto& existing : into)
      if (id(existing) == id(item))
        throw ParseError(item.loc, "duplicate " + std::string(kind) + " id '" + id(item) + "' (also declared at " +
                                       existing.loc.file + ":" + std::to_string(existing.loc.line) + ")");
    into.push_back(std::move(item));
  }
}

inline void merge_into(ScriptDoc& doc, ScriptDoc&& inc) {
  merge_unique(doc.characters, inc.characters, [](const auto& c) { return c.id; }, "entity");
  merge_unique(doc.props, inc.props, [](const auto& p) { return p.id; }, "entity");
  for (const auto& p : doc.props)
    if (doc.find_character(p.id) != nullptr) throw ParseError(p.loc, "duplicate entity id '" + p.id + "'");
  merge_unique(doc.actions, inc.actions, [](const auto& a) { return a.id; }, "action");
  merge_unique(doc.variables, inc.variables, [](const auto& v) { return v.variable.id; }, "variable");
  merge_unique(doc.intents, inc.intents, [](const auto& i) { return i.intent.id; }, "intent");
  merge_unique(doc.matrices, inc.matrices, [](const auto& m) { return m.matrix.id; }, "matrix");
  merge_unique(doc.goals, inc.goals, [](const auto& g) { return g.id; }, "goal");
  merge_unique(doc.modules, inc.modules, [](const auto& m) { return m.id; }, "module");
  merge_unique(doc.scenes, inc.scenes, [](const auto& s) { return s.id; }, "scene");
}

inline ScriptDoc load_recursive(const std::filesystem::path& path, std::set<std::filesystem::path>& active) {
  const auto canonical = std::filesystem::weakly_canonical(path);
  ScriptDoc doc = parse_script(read_text_file(path), path.string());
  active.insert(canonical);
  auto includes = std::move(doc.includes);
  doc.includes.clear();
  for (const auto& inc : includes) {
    const auto target = path.parent_path() / inc.path;
    if (active.contains(std::filesystem::weakly_canonical(target)))
      throw ParseError(inc.loc, "circular INCLUDE of '" + inc.path + "'");
    ScriptDoc sub;
    try {
      sub = load_recursive(target, active);
    } catch (const LoadError& e) {
      throw ParseError(inc.loc, std::string("cannot include: ") + e.what());
    }
    merge_into(doc, std::move(sub));
  }
  active.erase(canonical);
  return doc;
}

}  // namespace detail

/// Reads a script file and splices in every INCLUDE (paths relative to the
/// including file). The result has no includes left.
[[nodiscard]] inline ScriptDoc load_script(const std::filesystem::path& path) {
  std::set<std::filesystem::path> active;
  return detail::load_recursive(path, active);
}

}  // namespace zelig
