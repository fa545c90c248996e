#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fri {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownCommand : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using RawParams = std::map<std::string, std::string>;

struct CommandEnv {
  std::string out_dir = ".";
  int workers = 1;
  // Missing green tables are built in memory instead of failing.
  bool mc_fallback = false;
};

struct CommandResult {
  std::string command;
  std::string run_id;               // FNV-1a of command and resolved parameters
  nlohmann::ordered_json params;    // every parameter with its resolved value
  std::vector<std::string> outputs; // file names relative to out_dir, in write order
  nlohmann::ordered_json summary;
};

const std::vector<std::string>& command_names();

// Parses and validates everything before computing; writes files only on success.
CommandResult run_command(const std::string& name, const RawParams& raw, const CommandEnv& env);

}  // namespace fri
