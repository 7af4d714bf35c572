#include <gtest/gtest.h>

#include <deque>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "zelig/loader.hpp"
#include "zelig/validate.hpp"

using namespace zelig;
namespace fs = std::filesystem;

namespace {

const fs::path kScripts = fs::path(ZELIG_SOURCE_DIR) / "scripts";

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string join(const std::vector<std::string>& ls) {
  std::string s;
  for (const auto& l : ls) s += l + "\n";
  return s;
}

// Loads edited script text from a scratch directory that also holds the
// shared include.
ScriptDoc load_edited(const std::string& text, const std::string& name = "edited.drama") {
  const fs::path dir = fs::temp_directory_path() / "zelig_validate_test";
  fs::create_directories(dir);
  fs::copy_file(kScripts / "angry_table.drama", dir / "angry_table.drama", fs::copy_options::overwrite_existing);
  std::ofstream(dir / name) << text;
  return load_script(dir / name);
}

std::string drunk_text() { return read_text_file(kScripts / "drunk_keys.drama"); }
std::string angry_text() { return read_text_file(kScripts / "angry_scene.drama"); }

std::string dump(const ValidationReport& r) {
  std::string s;
  for (const auto& f : r.findings) s += std::string(to_string(f.code)) + ": " + f.message + "\n";
  return s;
}

}  // namespace

TEST(Validate, ShippedScriptsAreClean) {
  for (const char* f : {"drunk_keys.drama", "angry_scene.drama"}) {
    const auto r = validate_script(load_script(kScripts / f));
    EXPECT_TRUE(r.findings.empty()) << f << "\n" << dump(r);
  }
}

TEST(Validate, DeletingAnyNotpLineGivesExactlyOneMissingNotp) {
  for (const auto& text : {drunk_text(), angry_text()}) {
    const auto ls = lines_of(text);
    int edits = 0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      if (ls[i].find_first_not_of(' ') == std::string::npos || ls[i].substr(ls[i].find_first_not_of(' '), 5) != "NOTP ")
        continue;
      auto edited = ls;
      edited.erase(edited.begin() + static_cast<long>(i));
      const auto r = validate_script(load_edited(join(edited)));
      EXPECT_EQ(r.count(FindingCode::MissingNotp), 1u) << "line " << i + 1 << "\n" << dump(r);
      ++edits;
    }
    EXPECT_GE(edits, 1);
  }
}

TEST(Validate, MissingMatrixNotpRowIsIncompleteMatrix) {
  auto ls = lines_of(read_text_file(kScripts / "angry_table.drama"));
  std::erase_if(ls, [](const std::string& l) { return l.find("ROW NOTP:") != std::string::npos; });
  const fs::path dir = fs::temp_directory_path() / "zelig_validate_incomplete";
  fs::create_directories(dir);
  std::ofstream(dir / "angry_table.drama") << join(ls);
  std::ofstream(dir / "angry_scene.drama") << angry_text();
  const auto r = validate_script(load_script(dir / "angry_scene.drama"));
  EXPECT_GE(r.count(FindingCode::IncompleteMatrix), 1u) << dump(r);
}

TEST(Validate, ReintroducedIncompatiblePairGivesOneFinding) {
  auto doc = load_script(kScripts / "angry_scene.drama");
  auto& m = doc.matrices.front().matrix;
  *m.cell("very_angry", "runs") = {"A1", "B3"};
  const auto r = validate_script(doc);
  EXPECT_EQ(r.count(FindingCode::Incompatibility), 1u) << dump(r);
}

TEST(Validate, CuttingTheEndPathGivesNoEndReachable) {
  auto ls = lines_of(drunk_text());
  std::erase_if(ls, [](const std::string& l) { return l == "    END"; });
  const auto r = validate_script(load_edited(join(ls)));
  EXPECT_EQ(r.count(FindingCode::NoEndReachable), 1u) << dump(r);
}

TEST(Validate, GotoDeletedStepIsUnresolved) {
  auto text = drunk_text();
  text.replace(text.find("THEN NEXT\n"), 9, "THEN GOTO SS9");
  const auto r = validate_script(load_edited(text));
  EXPECT_EQ(r.count(FindingCode::UnresolvedRef), 1u) << dump(r);
}

TEST(Validate, UnknownReferencesAreUnresolved) {
  auto text = drunk_text();
  text.replace(text.find("DO drunk_searches"), 17, "DO drunk_vanishes");
  text.replace(text.find("SAYS ~ask_sure"), 14, "SAYS ~ask_later");
  const auto r = validate_script(load_edited(text));
  EXPECT_EQ(r.count(FindingCode::UnresolvedRef), 2u) << dump(r);
}

TEST(Validate, EndBehindUnfirableRuleOnly) {
  const std::string src = R"(CHARACTERS
  ZELIG PARTICIPANT
VARS
  VAR v 0 1
    TERM never 0:0 1:0
    TERM some 0:1 1:0
SCENE S
  STEP A
    IF v IS never THEN END
    NOTP THEN WAIT
)";
  const auto r = validate_script(parse_script(src));
  EXPECT_EQ(r.count(FindingCode::NoEndReachable), 1u) << dump(r);
  EXPECT_EQ(r.count(FindingCode::UnfirableRule), 1u) << dump(r);
}

TEST(Validate, ParticipantRules) {
  const auto none = validate_script(parse_script("SCENE S\n  STEP A\n    END\n"));
  EXPECT_EQ(none.count(FindingCode::MissingParticipant), 1u);
  const auto off = validate_script(parse_script("CHARACTERS\n  Z PARTICIPANT OFFSTAGE\nSCENE S\n  STEP A\n    END\n"));
  EXPECT_EQ(off.count(FindingCode::MissingParticipant), 1u);
}

TEST(Validate, FindingsCarryLocations) {
  auto ls = lines_of(drunk_text());
  std::size_t notp_line = 0;
  for (std::size_t i = 0; i < ls.size(); ++i)
    if (ls[i].find("NOTP THEN policeman_arrives_asks") != std::string::npos) notp_line = i;
  ls.erase(ls.begin() + static_cast<long>(notp_line));
  const auto r = validate_script(load_edited(join(ls)));
  ASSERT_EQ(r.count(FindingCode::MissingNotp), 1u);
  for (const auto& f : r.findings)
    if (f.code == FindingCode::MissingNotp) {
      EXPECT_EQ(f.loc.line, static_cast<int>(notp_line) - 1);  // first rule of the SS2 block
      EXPECT_NE(f.loc.file.find("edited.drama"), std::string::npos);
    }
}

// ---- reachability against a brute-force step-graph oracle ----

namespace {

struct GenStep {
  std::vector<std::string> controls;  // one per rule, NOTP last
  bool end_item = false;
};

std::string render(const std::vector<GenStep>& steps) {
  std::ostringstream o;
  o << "CHARACTERS\n  ZELIG PARTICIPANT\nSCENE S\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    o << "  STEP T" << i << "\n";
    for (std::size_t r = 0; r + 1 < steps[i].controls.size(); ++r)
      o << "    IF TIMEOUT " << r + 1 << " THEN " << steps[i].controls[r] << "\n";
    o << "    NOTP THEN " << steps[i].controls.back() << "\n";
    if (steps[i].end_item) o << "    END\n";
  }
  return o.str();
}

struct Oracle {
  std::set<std::size_t> reachable;
  bool end = false;
};

Oracle bfs(const std::vector<GenStep>& steps) {
  Oracle o;
  std::deque<std::size_t> q{0};
  o.reachable.insert(0);
  auto go = [&](std::size_t to) {
    if (to < steps.size() && o.reachable.insert(to).second) q.push_back(to);
  };
  while (!q.empty()) {
    const std::size_t s = q.front();
    q.pop_front();
    for (const auto& c : steps[s].controls) {
      if (c == "END") {
        o.end = true;
      } else if (c == "WAIT") {
      } else if (c.rfind("GOTO T", 0) == 0) {
        if (steps[s].end_item)
          o.end = true;
        else
          go(std::stoul(c.substr(6)));
      } else {  // NEXT, CONTINUE: trailing END or the following step
        if (steps[s].end_item)
          o.end = true;
        else
          go(s + 1);
      }
    }
  }
  return o;
}

}  // namespace

TEST(Validate, ReachabilityMatchesBruteForceOracle) {
  std::mt19937_64 rng(4242);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<GenStep> steps(1 + pick(7));
    for (auto& st : steps) {
      const std::size_t rules = 1 + pick(3);
      for (std::size_t r = 0; r < rules; ++r) {
        switch (pick(6)) {
          case 0: st.controls.push_back("END"); break;
          case 1: st.controls.push_back("WAIT"); break;
          case 2: st.controls.push_back("CONTINUE"); break;
          case 3: st.controls.push_back("NEXT"); break;
          default: st.controls.push_back("GOTO T" + std::to_string(pick(steps.size()))); break;
        }
      }
      st.end_item = pick(8) == 0;
    }
    const std::string src = render(steps);
    const auto doc = parse_script(src);
    const auto oracle = bfs(steps);
    const auto r = validate_script(doc);
    ASSERT_EQ(r.count(FindingCode::NoEndReachable), oracle.end ? 0u : 1u) << src << dump(r);
    std::set<std::string> unreachable;
    for (const auto& f : r.findings)
      if (f.code == FindingCode::UnreachableStep) unreachable.insert(f.message);
    ASSERT_EQ(unreachable.size(), steps.size() - oracle.reachable.size()) << src << dump(r);
    for (std::size_t i = 0; i < steps.size(); ++i)
      if (!oracle.reachable.contains(i))
        ASSERT_TRUE(unreachable.contains("step S/T" + std::to_string(i) + " is unreachable")) << src;
  }
}
