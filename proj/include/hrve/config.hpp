#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hrve/experiments.hpp"

namespace hrve {

#ifndef HRVE_VERSION
#define HRVE_VERSION "unknown"
#endif
inline constexpr const char* kVersion = HRVE_VERSION;

/// Process exit statuses of the command-line front end.
enum class ExitStatus : int { ok = 0, usage = 1, numerical = 2, assertion = 3 };

enum class ValueType { integer, unsigned_integer, real, text, list, flag, choice };

struct KeySpec {
  std::string name;
  ValueType type;
  std::string fallback; // default value; empty means unset
  std::string help;
  std::vector<std::string> choices; // ValueType::choice
};

/// Every recognized key, in manifest order.
const std::vector<KeySpec>& config_schema();
const std::vector<std::string>& subcommands();

/// Effective configuration: schema defaults, then file values, then flags.
/// Every value is type- and range-checked when it is set.
class RunConfig {
public:
  explicit RunConfig(std::string command = "");

  const std::string& command() const { return command_; }
  /// Throws usage error for names outside subcommands().
  void set_command(const std::string& name);
  /// Throws usage error naming the key on unknown keys, type mismatches and
  /// range violations.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  bool is_explicit(const std::string& key) const;

  std::string text(const std::string& key) const;
  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;

  /// key = value lines, schema order, unset keys omitted.
  std::vector<std::pair<std::string, std::string>> effective() const;

  // Typed views used by dispatch; each validates before any solve.
  EnsembleSpec ensemble() const;
  SolverOptions solver() const;
  int threads() const;
  SweepConfig sweep() const;
  DecayConfig decay() const;
  TwoScaleConfig two_scale() const;

private:
  std::string command_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

/// Reads `key = value` lines (# comments, blank lines). Keys starting with
/// "manifest." are ignored so a manifest can be replayed as a config.
void load_config_file(RunConfig& cfg, const std::string& path);
void load_config_text(RunConfig& cfg, std::istream& is, const std::string& origin);

/// args[0] is the subcommand; flags are `--key value`, `--key=value` or a
/// bare `--flag`. Dashes in keys read as underscores. `--config path`
/// loads a file first; flags then override it.
RunConfig parse_config(std::span<const std::string> args);

std::string usage_text();

/// Runs a subcommand. Progress and errors go to `err`, summaries to `out`.
ExitStatus dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err);

} // namespace hrve
