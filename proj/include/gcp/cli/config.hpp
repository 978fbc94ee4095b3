#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcp/errors.hpp"

namespace gcp::cli {

using Json = nlohmann::json;

enum class KeyKind { Int, Real, Seed, Text };

struct KeySpec {
  std::string name;
  KeyKind kind;
  std::string help;
  std::vector<std::string> choices;  // Text keys only; empty means free text
};

inline const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"N", KeyKind::Int, "number of agents", {}},
      {"d", KeyKind::Int, "number of topics", {}},
      {"alpha", KeyKind::Real, "sampling scale (Model A)", {}},
      {"beta", KeyKind::Real, "inertia in [0, 1) (Model A)", {}},
      {"gamma", KeyKind::Real, "drift toward the mean (Model B)", {}},
      {"dt", KeyKind::Real, "time step (Model B)", {}},
      {"steps", KeyKind::Int, "number of steps", {}},
      {"t-end", KeyKind::Real, "final time (Model B)", {}},
      {"replicas", KeyKind::Int, "independent replicas", {}},
      {"seed", KeyKind::Seed, "RNG seed (unsigned 64-bit)", {}},
      {"tol", KeyKind::Real, "regime tolerance on lambda1", {}},
      {"out", KeyKind::Text, "output path, - for stdout", {}},
      {"format", KeyKind::Text, "output format", {"csv", "json"}},
      {"stride", KeyKind::Int, "record every stride-th step", {}},
      {"method", KeyKind::Text, "Model A step", {"matrix", "direct"}},
      {"scheme", KeyKind::Text, "Model B simulator", {"em", "exact"}},
      {"level", KeyKind::Text, "validation depth", {"quick", "full"}},
      {"alpha-min", KeyKind::Real, "smallest alpha of the grid", {}},
      {"alpha-max", KeyKind::Real, "largest alpha of the grid", {}},
      {"alpha-count", KeyKind::Int, "alpha grid points (log spaced)", {}},
      {"beta-min", KeyKind::Real, "smallest beta of the grid", {}},
      {"beta-max", KeyKind::Real, "largest beta of the grid", {}},
      {"beta-count", KeyKind::Int, "beta grid points (linear)", {}},
  };
  return table;
}

inline const KeySpec* find_key(const std::string& name) {
  for (const auto& k : key_table()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

struct CommandSpec {
  std::string name;
  std::vector<std::string> required;
  std::vector<std::string> optional;
  bool stochastic;
};

inline const std::vector<CommandSpec>& command_table() {
  static const std::vector<CommandSpec> table = {
      {"analytic", {"N", "alpha", "beta"}, {"d", "tol", "out", "format"}, false},
      {"phase-diagram",
       {"N"},
       {"alpha-min", "alpha-max", "alpha-count", "beta-min", "beta-max", "beta-count", "tol", "out",
        "format"},
       false},
      {"mc-spectrum", {"N", "alpha", "beta", "steps", "seed"}, {"d", "out", "format"}, true},
      {"simulate-a",
       {"N", "alpha", "beta", "steps", "seed"},
       {"d", "stride", "method", "out", "format"},
       true},
      {"simulate-b",
       {"N", "gamma", "t-end", "seed"},
       {"d", "dt", "stride", "scheme", "out", "format"},
       true},
      {"align",
       {"N", "alpha", "beta", "steps", "seed"},
       {"d", "replicas", "stride", "out", "format"},
       true},
      {"validate", {"seed"}, {"level", "out", "format"}, true},
  };
  return table;
}

inline const CommandSpec& find_command(const std::string& name) {
  for (const auto& c : command_table()) {
    if (c.name == name) return c;
  }
  std::string known;
  for (const auto& c : command_table()) known += (known.empty() ? "" : ", ") + c.name;
  throw UsageError("unknown command '" + name + "' (expected one of: " + known + ")");
}

// Converts a flag string to the JSON value the key expects.
inline Json parse_flag_value(const KeySpec& key, const std::string& text) {
  const auto bad = [&] {
    return UsageError("invalid value '" + text + "' for --" + key.name);
  };
  switch (key.kind) {
    case KeyKind::Int: {
      long long v = 0;
      const auto* end = text.data() + text.size();
      const auto r = std::from_chars(text.data(), end, v);
      if (r.ec != std::errc() || r.ptr != end) throw bad();
      return v;
    }
    case KeyKind::Seed: {
      std::uint64_t v = 0;
      const auto* end = text.data() + text.size();
      const auto r = std::from_chars(text.data(), end, v);
      if (r.ec != std::errc() || r.ptr != end) throw bad();
      return v;
    }
    case KeyKind::Real: {
      std::istringstream in(text);
      in.imbue(std::locale::classic());
      double v = 0.0;
      in >> v;
      if (in.fail() || !in.eof()) throw bad();
      return v;
    }
    case KeyKind::Text:
      return text;
  }
  throw bad();
}

inline void check_json_type(const KeySpec& key, const Json& v) {
  bool ok = false;
  switch (key.kind) {
    case KeyKind::Int: ok = v.is_number_integer(); break;
    case KeyKind::Seed: ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0); break;
    case KeyKind::Real: ok = v.is_number(); break;
    case KeyKind::Text: ok = v.is_string(); break;
  }
  if (!ok) throw UsageError("config key '" + key.name + "' has the wrong type");
  if (key.kind == KeyKind::Text && !key.choices.empty()) {
    const auto s = v.get<std::string>();
    bool found = false;
    for (const auto& c : key.choices) found = found || c == s;
    if (!found) throw UsageError("invalid value '" + s + "' for '" + key.name + "'");
  }
}

// Validated, merged parameters for one command.
class ExperimentConfig {
 public:
  ExperimentConfig(std::string command, Json values)
      : command_(std::move(command)), values_(std::move(values)) {}

  const std::string& command() const { return command_; }
  const Json& values() const { return values_; }
  // Parameters that determine the output; the output location is not one.
  Json echo() const {
    Json v = values_;
    v.erase("out");
    return v;
  }
  bool has(const std::string& key) const { return values_.contains(key); }

  long long get_int(const std::string& key) const { return values_.at(key).get<long long>(); }
  long long get_int(const std::string& key, long long def) const {
    return has(key) ? get_int(key) : def;
  }
  double get_real(const std::string& key) const { return values_.at(key).get<double>(); }
  double get_real(const std::string& key, double def) const {
    return has(key) ? get_real(key) : def;
  }
  std::uint64_t seed() const { return values_.at("seed").get<std::uint64_t>(); }
  std::string get_text(const std::string& key, const std::string& def) const {
    return has(key) ? values_.at(key).get<std::string>() : def;
  }
  std::string out() const { return get_text("out", "-"); }
  std::string format() const { return get_text("format", "csv"); }

 private:
  std::string command_;
  Json values_;
};

inline int checked_int(const ExperimentConfig& c, const std::string& key, long long lo,
                       long long hi = 1'000'000'000) {
  const long long v = c.get_int(key);
  if (v < lo || v > hi) {
    throw UsageError("'" + key + "' must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return static_cast<int>(v);
}

inline void check_ranges(const ExperimentConfig& c) {
  const auto positive = [&](const std::string& k) {
    if (c.has(k) && !(c.get_real(k) > 0.0 && std::isfinite(c.get_real(k)))) {
      throw UsageError("'" + k + "' must be positive and finite");
    }
  };
  const auto at_least = [&](const std::string& k, long long lo) {
    if (c.has(k)) checked_int(c, k, lo);
  };
  at_least("N", 2);
  at_least("d", 1);
  at_least("steps", 1);
  at_least("replicas", 1);
  at_least("stride", 1);
  at_least("alpha-count", 1);
  at_least("beta-count", 1);
  for (const char* k : {"alpha", "dt", "t-end", "tol", "alpha-min", "alpha-max"}) positive(k);
  if (c.has("N") && c.has("d") && c.get_int("N") < c.get_int("d") + 1) {
    throw UsageError("'N' must be >= d + 1");
  }
  if (c.has("beta")) {
    const double b = c.get_real("beta");
    if (b == 1.0) throw UsageError("'beta' must differ from 1");
    if (!(b >= 0.0 && b < 1.0)) throw UsageError("'beta' must lie in [0, 1)");
  }
  for (const char* k : {"beta-min", "beta-max"}) {
    if (c.has(k) && !(c.get_real(k) >= 0.0 && c.get_real(k) < 1.0)) {
      throw UsageError(std::string("'") + k + "' must lie in [0, 1)");
    }
  }
  if (c.has("gamma") && !std::isfinite(c.get_real("gamma"))) throw UsageError("'gamma' must be finite");
}

// file: parsed config document or null; flags: values given on the command
// line, already converted. Flags override the file.
inline ExperimentConfig merge_config(const std::optional<std::string>& flag_command,
                                     const Json& file, const std::map<std::string, Json>& flags) {
  std::string command;
  Json values = Json::object();
  if (!file.is_null()) {
    if (!file.is_object()) throw UsageError("config document must be a JSON object");
    for (const auto& [k, v] : file.items()) {
      if (k == "command") {
        if (!v.is_string()) throw UsageError("config key 'command' must be a string");
        command = v.get<std::string>();
        continue;
      }
      const KeySpec* spec = find_key(k);
      if (!spec) throw UsageError("unknown config key '" + k + "'");
      check_json_type(*spec, v);
      values[k] = v;
    }
  }
  if (flag_command) {
    if (!command.empty() && command != *flag_command) {
      throw UsageError("command '" + *flag_command + "' conflicts with config command '" + command + "'");
    }
    command = *flag_command;
  }
  if (command.empty()) throw UsageError("no command given");
  const CommandSpec& cmd = find_command(command);
  for (const auto& [k, v] : flags) {
    check_json_type(*find_key(k), v);
    values[k] = v;
  }
  std::set<std::string> allowed(cmd.required.begin(), cmd.required.end());
  allowed.insert(cmd.optional.begin(), cmd.optional.end());
  for (const auto& [k, v] : values.items()) {
    if (!allowed.count(k)) throw UsageError("key '" + k + "' does not apply to command '" + command + "'");
  }
  for (const auto& k : cmd.required) {
    if (!values.contains(k)) throw UsageError("missing required key '" + k + "' for command '" + command + "'");
  }
  ExperimentConfig cfg(command, std::move(values));
  check_ranges(cfg);
  return cfg;
}

inline Json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace gcp::cli
