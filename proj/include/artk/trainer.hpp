#pragma once

// Natural, adversarial and attributionally robust training loops.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "artk/attacks.hpp"
#include "artk/data.hpp"
#include "artk/model.hpp"
#include "artk/objective.hpp"
#include "artk/optim.hpp"

namespace artk {

enum class TrainMode { Natural, AdvTrain, AttribRobust };
// Adversary producing x' for AttribRobust: CE-only PGD or CE + ||IG(x,x')||_1.
enum class InnerAdversary { Pgd, Attributional };

struct TrainConfig {
  TrainMode mode = TrainMode::Natural;
  std::string arch = "small-cnn";
  std::size_t steps = 2000;
  std::size_t batch_size = 50;
  OptimizerConfig optimizer;
  AttackConfig attack;  // inner attack; its seed is replaced per step
  // Linear warm-up of the attack radius: epsilon * min(1, step / ramp) over
  // the first `epsilon_ramp_steps` steps (0 = full radius from the start).
  std::size_t epsilon_ramp_steps = 0;
  InnerAdversary inner = InnerAdversary::Attributional;
  ObjectiveConfig objective;
  // Regularizers are evaluated on the first `regularizer_samples` rows of
  // each (shuffled) batch; 0 means the whole batch.
  std::size_t regularizer_samples = 0;
  // Rows per regularizer graph; bounds memory, not results.
  std::size_t regularizer_chunk = 5;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 500;

  void validate() const;
};

std::string to_string(TrainMode mode);
std::string to_string(InnerAdversary inner);
TrainMode parse_train_mode(const std::string& s);
InnerAdversary parse_inner_adversary(const std::string& s);
nlohmann::json to_json(const TrainConfig& cfg);

struct Checkpoint {
  ModelParams model;
  std::size_t step = 0;
  nlohmann::json config;  // resolved run configuration
  // Every random draw is a function of (seed, step), so this is the full
  // generator state.
  std::uint64_t rng_seed = 0;
  std::size_t rng_next_step = 0;
};

// "ARTKCKPT", u32 version, u64 header length, JSON header, then each
// parameter as little-endian f64 in header order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct StepLog {
  std::size_t step = 0;  // 1-based, after the update
  std::size_t epoch = 0;
  double lr = 0;
  double loss = 0;
  double ce = 0;
  std::optional<double> cacr;
  std::optional<double> wacr;
  // Diagnostics: per-sample share of CACR < 0 in this batch, and the running
  // share of batches whose mean CACR was negative.
  std::optional<double> cacr_negative_samples;
  std::optional<double> cacr_negative_batches;
  double epsilon = 0;   // attack radius used this step
  double max_linf = 0;  // largest ||x' - x||_inf fed to the loss
  double seconds = 0;  // wall time, not serialised
};

// Log record without wall time, so fixed seeds give identical logs.
nlohmann::json to_json(const StepLog& log);

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

// Deterministic for a given seed. `init` starts from existing parameters
// instead of a fresh seed-initialised model. A NaN/Inf anywhere aborts with
// NumericError naming the step.
Checkpoint train(const Dataset& data, const TrainConfig& cfg, const TrainHooks& hooks = {},
                 const ModelParams* init = nullptr, nlohmann::json config_echo = nullptr);

ModelParams build_model(const std::string& arch, std::uint64_t seed, const Dataset& data);

}  // namespace artk
