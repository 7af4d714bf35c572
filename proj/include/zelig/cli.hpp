#pragma once

// Command-line front end. Kept in a header so tests can drive it with
// in-memory streams.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "zelig/loader.hpp"
#include "zelig/runtime.hpp"
#include "zelig/trace_io.hpp"
#include "zelig/validate.hpp"

namespace zelig::cli {

enum ExitCode : int {
  kOk = 0,
  kValidationFailed = 1,
  kInputError = 2,  // unreadable or unparsable script, trace or golden file
  kRuntimeError = 3,
  kGoldenMismatch = 4,
};

[[nodiscard]] inline Json finding_to_json(const Finding& f) {
  return Json{{"schema_version", kSchemaVersion}, {"severity", to_string(f.severity)}, {"code", to_string(f.code)},
              {"file", f.loc.file},         {"line", f.loc.line},
              {"column", f.loc.column},     {"message", f.message}};
}

inline void print_report(const ValidationReport& report, bool json, std::ostream& out) {
  std::size_t warnings = 0;
  for (const auto& f : report.findings) {
    warnings += f.severity == Severity::Warning;
    if (json)
      out << finding_to_json(f).dump() << '\n';
    else
      out << f.loc.file << ':' << f.loc.line << ':' << f.loc.column << ": " << to_string(f.severity) << ": ["
          << to_string(f.code) << "] " << f.message << '\n';
  }
  if (json)
    out << Json{{"schema_version", kSchemaVersion}, {"errors", report.error_count()}, {"warnings", warnings}}.dump()
        << '\n';
  else
    out << (report.ok() ? "ok" : "invalid") << ": " << report.error_count() << " error(s), " << warnings
        << " warning(s)\n";
}

/// Loads a script; prints the failure and returns nullopt on IO or parse errors.
[[nodiscard]] inline std::optional<ScriptDoc> load_or_report(const std::string& path, std::ostream& err) {
  try {
    return load_script(path);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
  }
  return std::nullopt;
}

inline int validate(const std::string& path, bool json, std::ostream& out, std::ostream& err) {
  auto doc = load_or_report(path, err);
  if (!doc) return kInputError;
  const auto report = validate_script(*doc);
  print_report(report, json, out);
  return report.ok() ? kOk : kValidationFailed;
}

struct RunOptions {
  std::string script;
  std::string trace;
  std::uint64_t seed = 0;
  RuntimeConfig config;
  std::optional<std::string> golden;
};

/// First differing line of two texts, 1-based; 0 when equal.
[[nodiscard]] inline std::size_t first_difference(const std::string& a, const std::string& b) {
  std::istringstream sa(a), sb(b);
  std::string la, lb;
  for (std::size_t n = 1;; ++n) {
    const bool ha = static_cast<bool>(std::getline(sa, la));
    const bool hb = static_cast<bool>(std::getline(sb, lb));
    if (!ha && !hb) return 0;
    if (ha != hb || la != lb) return n;
  }
}

inline int run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  auto doc = load_or_report(opt.script, err);
  if (!doc) return kInputError;
  if (const auto report = validate_script(*doc); !report.ok()) {
    print_report(report, false, err);
    return kValidationFailed;
  }
  std::vector<Event> trace;
  try {
    trace = parse_trace(read_text_file(opt.trace));
  } catch (const std::exception& e) {
    err << "trace error: " << opt.trace << ": " << e.what() << '\n';
    return kInputError;
  }
  std::string log;
  try {
    log = write_log(run_trace(*doc, trace, opt.config, opt.seed).log);
  } catch (const SessionError& e) {
    err << "runtime error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == SessionError::Code::InvalidConfig ? kInputError : kRuntimeError;
  }
  out << log;
  if (!opt.golden) return kOk;
  std::string golden;
  try {
    golden = read_text_file(*opt.golden);
  } catch (const LoadError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  if (const auto line = first_difference(log, golden); line != 0) {
    err << "golden mismatch at line " << line << " of " << *opt.golden << '\n';
    return kGoldenMismatch;
  }
  return kOk;
}

struct ServeOptions {
  std::string script;
  unsigned short port = 8080;
  std::string address = "127.0.0.1";
  int tick_ms = 1000;
  std::optional<std::string> record_dir;
  std::uint64_t seed = 0;
  RuntimeConfig config;
};

/// Runs the session server until interrupted; supplied by the service layer.
using ServeFn = int (*)(const ServeOptions&, std::ostream&, std::ostream&);

inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err, ServeFn serve = nullptr) {
  CLI::App app{"zelig: interactive drama engine"};
  app.require_subcommand(1);

  bool json = false;
  std::string validate_path;
  auto* v = app.add_subcommand("validate", "check a script");
  v->add_option("file", validate_path, "script file")->required();
  v->add_flag("--json", json, "machine-readable findings, one JSON object per line");

  RunOptions run_opt;
  std::string golden;
  auto* r = app.add_subcommand("run", "replay an event trace and print the action log");
  r->add_option("file", run_opt.script, "script file")->required();
  r->add_option("--trace", run_opt.trace, "event trace (JSON lines)")->required();
  r->add_option("--seed", run_opt.seed, "session seed");
  r->add_option("--theta", run_opt.config.theta_fire, "rule firing threshold");
  r->add_option("--tau", run_opt.config.tau_notp, "NOTP delay in ticks");
  r->add_option("--max-ticks", run_opt.config.max_ticks, "ignore events after this tick");
  r->add_option("--golden", golden, "expected log; exit 4 on difference");
  r->add_flag("--agents", run_opt.config.agents_act, "let idle character agents act");

  ServeOptions serve_opt;
  std::string record_dir;
  auto* s = app.add_subcommand("serve", "host live sessions over HTTP and WebSocket");
  s->add_option("file", serve_opt.script, "script file")->required();
  s->add_option("--port", serve_opt.port, "TCP port (0 picks a free one)")->required();
  s->add_option("--address", serve_opt.address, "listen address");
  s->add_option("--tick-ms", serve_opt.tick_ms, "wall-clock milliseconds per tick")->check(CLI::PositiveNumber);
  s->add_option("--record-dir", record_dir, "write one event trace per session here");
  s->add_option("--theta", serve_opt.config.theta_fire, "rule firing threshold");
  s->add_option("--tau", serve_opt.config.tau_notp, "NOTP delay in ticks");
  s->add_flag("--agents", serve_opt.config.agents_act, "let idle character agents act");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kInputError;
  }

  if (v->parsed()) return validate(validate_path, json, out, err);
  if (r->parsed()) {
    if (!golden.empty()) run_opt.golden = golden;
    return run(run_opt, out, err);
  }
  if (!serve) {
    err << "serve is not available in this build\n";
    return kInputError;
  }
  if (!record_dir.empty()) serve_opt.record_dir = record_dir;
  return serve(serve_opt, out, err);
}

}  // namespace zelig::cli
