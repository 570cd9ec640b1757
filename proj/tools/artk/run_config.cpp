#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "artk/errors.hpp"
#include "profiles.hpp"

namespace artk::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// "2000:1e-5, 4000:1e-6"
std::vector<std::pair<std::size_t, Real>> parse_boundaries(const std::string& text) {
  std::vector<std::pair<std::size_t, Real>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("lr_boundaries: expected step:rate, got '" + item + "'");
    try {
      out.emplace_back(std::stoull(item.substr(0, colon)), Real(std::stod(item.substr(colon + 1))));
    } catch (const std::logic_error&) {
      throw ConfigError("lr_boundaries: bad entry '" + item + "'");
    }
  }
  return out;
}

}  // namespace

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"mode", "attrib", "natural | adv | attrib"},
      {"arch", "small-cnn", "small-cnn | mlp | linear"},
      {"seed", "0", "seed for initialisation, shuffling and random starts"},
      {"data_dir", "", "directory with MNIST IDX files (else $ARTK_DATA_DIR)"},
      {"limit_train", "0", "use the first N training images (0 = all)"},
      {"limit_test", "0", "use the first N test images (0 = all)"},
      {"steps", "90000", "optimizer steps"},
      {"batch_size", "50", "training batch size"},
      {"optimizer", "adam", "adam | momentum"},
      {"lr", "1e-4", "learning rate before the first boundary"},
      {"lr_boundaries", "", "step:rate list, e.g. 1500:1e-3, 70000:1e-4"},
      {"momentum", "0.9", "momentum optimizer rate"},
      {"weight_decay", "0.0002", "momentum optimizer weight decay"},
      {"checkpoint_every", "500", "checkpoint cadence in steps"},
      {"train_epsilon", "0.3", "inner attack budget"},
      {"train_alpha", "0.01", "inner attack step size"},
      {"train_attack_steps", "40", "inner attack iterations"},
      {"train_epsilon_ramp", "0", "steps over which the inner budget grows linearly to train_epsilon"},
      {"train_random_start", "true", "inner attack starts uniformly in the ball"},
      {"train_attack_m", "10", "IG steps inside the inner attack"},
      {"inner_adversary", "attributional", "attrib mode adversary: attributional | pgd"},
      {"lambda", "1", "weight of both regularizers unless split below"},
      {"lambda_cacr", "", "CACR weight (defaults to lambda)"},
      {"lambda_wacr", "", "WACR weight (defaults to lambda)"},
      {"loss_m", "50", "IG steps in the regularizers"},
      {"regularizer_samples", "0", "regularize the first N samples of each batch (0 = all)"},
      {"regularizer_chunk", "5", "samples per regularizer graph (memory only)"},
      {"eval_epsilon", "0.3", "evaluation PGD budget"},
      {"eval_alpha", "0.01", "evaluation PGD step size"},
      {"eval_pgd_steps", "100", "evaluation PGD iterations"},
      {"eval_random_start", "true", "evaluation PGD random start"},
      {"eval_batch", "100", "evaluation batch size"},
      {"ifia_k", "200", "IFIA top-k size"},
      {"ifia_epsilon", "0.3", "IFIA budget"},
      {"ifia_alpha", "0.01", "IFIA step size"},
      {"ifia_iterations", "100", "IFIA iterations P"},
      {"ifia_m", "10", "IG steps of the IFIA surrogate gradient"},
      {"ifia_samples", "0", "attack the first N correctly classified test images (0 = all)"},
      {"attribution_m", "50", "IG steps for reported attributions"},
      {"workers", "1", "evaluation threads"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.fallback;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  for (int n = 1; std::getline(ss, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      set_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::number(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t used = 0;
  double d;
  try {
    d = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

std::size_t RunConfig::count(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return n;
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.mode = parse_train_mode(get("mode"));
  c.arch = get("arch");
  c.seed = count("seed");
  c.steps = count("steps");
  c.batch_size = count("batch_size");
  const std::string& opt = get("optimizer");
  if (opt == "adam") {
    c.optimizer.kind = OptimizerConfig::Kind::Adam;
  } else if (opt == "momentum") {
    c.optimizer.kind = OptimizerConfig::Kind::MomentumWD;
  } else {
    throw ConfigError("optimizer: expected adam or momentum, got '" + opt + "'");
  }
  c.optimizer.lr.base = Real(number("lr"));
  c.optimizer.lr.boundaries = parse_boundaries(get("lr_boundaries"));
  c.optimizer.momentum = Real(number("momentum"));
  c.optimizer.weight_decay = Real(number("weight_decay"));
  c.checkpoint_every = count("checkpoint_every");
  c.attack.epsilon = Real(number("train_epsilon"));
  c.attack.alpha = Real(number("train_alpha"));
  c.attack.steps = count("train_attack_steps");
  c.attack.random_start = flag("train_random_start");
  c.epsilon_ramp_steps = count("train_epsilon_ramp");
  c.attack.ig_steps_m = count("train_attack_m");
  c.inner = parse_inner_adversary(get("inner_adversary"));
  const double lambda = number("lambda");
  c.objective.lambda_cacr = Real(get("lambda_cacr").empty() ? lambda : number("lambda_cacr"));
  c.objective.lambda_wacr = Real(get("lambda_wacr").empty() ? lambda : number("lambda_wacr"));
  c.objective.ig_steps_m = count("loss_m");
  c.regularizer_samples = count("regularizer_samples");
  c.regularizer_chunk = count("regularizer_chunk");
  c.validate();
  return c;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig c;
  c.pgd.epsilon = Real(number("eval_epsilon"));
  c.pgd.alpha = Real(number("eval_alpha"));
  c.pgd.steps = count("eval_pgd_steps");
  c.pgd.random_start = flag("eval_random_start");
  c.ifia.k = count("ifia_k");
  c.ifia.epsilon = Real(number("ifia_epsilon"));
  c.ifia.alpha = Real(number("ifia_alpha"));
  c.ifia.iterations = count("ifia_iterations");
  c.ifia.ig_steps_m = count("ifia_m");
  c.ifia_samples = count("ifia_samples");
  c.attribution.m = count("attribution_m");
  c.batch_size = count("eval_batch");
  c.workers = count("workers");
  c.seed = count("seed");
  c.pgd.validate();
  if (c.attribution.m < 1) throw ConfigError("attribution_m must be >= 1");
  return c;
}

nlohmann::json RunConfig::resolved() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

std::vector<std::string> profile_names() {
  std::vector<std::string> out;
  for (const auto& p : kProfiles) out.push_back(p.name);
  return out;
}

std::string profile_or_file(const std::string& name) {
  for (const auto& p : kProfiles) {
    if (name == p.name) return p.text;
  }
  std::ifstream in(name);
  if (!in) {
    std::string known;
    for (const auto& p : kProfiles) known += std::string(known.empty() ? "" : ", ") + p.name;
    throw ConfigError("no config file or profile named '" + name + "' (profiles: " + known + ")");
  }
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace artk::cli
