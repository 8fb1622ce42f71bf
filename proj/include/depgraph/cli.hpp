#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace depgraph {

// Values every subcommand may read. A --config JSON file with the same keys
// replaces the defaults; flags on the command line win over both.
struct CliConfig {
  std::string subcommand;
  std::vector<std::string> paths;
  std::string mode = "depgraph";
  std::optional<bool> code_change;  // unset: on when every instance has change facts
  double lr = 0.01;
  std::size_t epochs = 10;
  std::size_t dim = 32;
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
  std::string protocol = "loo";
  std::vector<std::string> techniques = {"depgraph", "ochiai"};
  std::string aggregation = "max";
  std::string checkpoint;
  std::string output;
  // gen-corpus
  std::string preset = "easy";
  std::size_t projects = 2;
  std::size_t instances = 25;
  std::optional<std::size_t> methods;
  std::optional<double> unreachable;
  bool no_changes = false;
};

// Reads the keys of a --config file into `config`; unknown keys are errors.
void apply_config_json(CliConfig& config, const std::string& json_text);

// Exit codes: 0 success, 1 invalid input facts, 2 any other failure.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace depgraph
