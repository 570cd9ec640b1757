#pragma once

// Flat `key = value` run configuration shared by all subcommands.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "artk/evaluate.hpp"
#include "artk/trainer.hpp"

namespace artk::cli {

struct KeySpec {
  const char* name;
  const char* fallback;
  const char* help;
};

const std::vector<KeySpec>& config_keys();

class RunConfig {
 public:
  RunConfig();

  // `origin` names the source in error messages. Unknown keys and malformed
  // lines throw ConfigError.
  void merge_text(const std::string& text, const std::string& origin);
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void set_assignment(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  double number(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;

  TrainConfig train_config() const;
  EvalConfig eval_config() const;
  nlohmann::json resolved() const;

 private:
  std::map<std::string, std::string> values_;
};

// Names of the profiles compiled into the binary.
std::vector<std::string> profile_names();
// Embedded profile text for `name`, or the contents of the file at `name`.
std::string profile_or_file(const std::string& name);

}  // namespace artk::cli
