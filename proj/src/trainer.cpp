#include "artk/trainer.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "artk/errors.hpp"
#include "artk/ops.hpp"
#include "artk/random.hpp"

namespace artk {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'T', 'K', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& what) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw DataError(DataError::Kind::Truncated, "checkpoint truncated in " + what);
  }
  return v;
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::MaxPool2x2: return "maxpool2x2";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

LayerKind parse_kind(const std::string& s) {
  for (LayerKind k : {LayerKind::Conv2d, LayerKind::MaxPool2x2, LayerKind::Relu, LayerKind::Flatten,
                      LayerKind::Dense}) {
    if (s == kind_name(k)) return k;
  }
  throw DataError(DataError::Kind::BadMagic, "checkpoint: unknown layer kind " + s);
}

Var mean_ce(const Network& net, const Tensor& x, const std::vector<std::size_t>& labels) {
  Var ce = ops::cross_entropy(net.forward(Var(x)), labels);
  return ops::scale(ops::sum(ce), Real(1) / Real(labels.size()));
}

Tensor rows(const Tensor& t, std::size_t from, std::size_t to) {
  const std::size_t dim = t.size() / t.dim(0);
  Shape s = t.shape();
  s[0] = to - from;
  return Tensor(s, std::vector<Real>(t.ptr() + from * dim, t.ptr() + to * dim));
}

void accumulate(std::vector<Tensor>& total, const std::vector<Var>& grads) {
  for (std::size_t k = 0; k < total.size(); ++k) {
    const Tensor& g = grads[k].value();
    for (std::size_t i = 0; i < g.size(); ++i) total[k][i] += g[i];
  }
}

}  // namespace

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Natural: return "natural";
    case TrainMode::AdvTrain: return "adv";
    case TrainMode::AttribRobust: return "attrib";
  }
  return "?";
}

std::string to_string(InnerAdversary inner) {
  return inner == InnerAdversary::Pgd ? "pgd" : "attributional";
}

TrainMode parse_train_mode(const std::string& s) {
  for (TrainMode m : {TrainMode::Natural, TrainMode::AdvTrain, TrainMode::AttribRobust}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown training mode '" + s + "' (natural, adv, attrib)");
}

InnerAdversary parse_inner_adversary(const std::string& s) {
  if (s == "pgd") return InnerAdversary::Pgd;
  if (s == "attributional") return InnerAdversary::Attributional;
  throw ConfigError("unknown inner adversary '" + s + "' (pgd, attributional)");
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (regularizer_chunk < 1) throw ConfigError("regularizer_chunk must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  optimizer.validate();
  if (mode != TrainMode::Natural) attack.validate();
  if (mode == TrainMode::AttribRobust) objective.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json lr = nlohmann::json::array();
  for (const auto& [step, rate] : c.optimizer.lr.boundaries) lr.push_back({step, rate});
  return {
      {"mode", to_string(c.mode)},
      {"arch", c.arch},
      {"steps", c.steps},
      {"batch_size", c.batch_size},
      {"seed", c.seed},
      {"optimizer",
       {{"kind", c.optimizer.kind == OptimizerConfig::Kind::Adam ? "adam" : "momentum"},
        {"lr", c.optimizer.lr.base},
        {"lr_boundaries", lr},
        {"momentum", c.optimizer.momentum},
        {"weight_decay", c.optimizer.weight_decay}}},
      {"attack",
       {{"epsilon", c.attack.epsilon},
        {"alpha", c.attack.alpha},
        {"steps", c.attack.steps},
        {"random_start", c.attack.random_start},
        {"ig_steps_m", c.attack.ig_steps_m},
        {"epsilon_ramp_steps", c.epsilon_ramp_steps}}},
      {"inner_adversary", to_string(c.inner)},
      {"objective",
       {{"lambda_cacr", c.objective.lambda_cacr},
        {"lambda_wacr", c.objective.lambda_wacr},
        {"ig_steps_m", c.objective.ig_steps_m}}},
      {"regularizer_samples", c.regularizer_samples},
  };
}

nlohmann::json to_json(const StepLog& s) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  return {{"step", s.step},
          {"epoch", s.epoch},
          {"lr", s.lr},
          {"loss", s.loss},
          {"ce", s.ce},
          {"cacr", opt(s.cacr)},
          {"wacr", opt(s.wacr)},
          {"cacr_negative_samples", opt(s.cacr_negative_samples)},
          {"cacr_negative_batches", opt(s.cacr_negative_batches)},
          {"epsilon", s.epsilon},
          {"max_linf", s.max_linf}};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const ModelParams& m = ck.model;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"kind", kind_name(l.kind)}, {"in", l.in}, {"out", l.out},
                      {"kernel", l.kernel}, {"pad", l.pad}});
  }
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : m.params) params.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  const nlohmann::json header = {
      {"arch", {{"name", m.arch_name}, {"layers", layers}, {"class_count", m.class_count},
                {"input_shape", m.input_shape}}},
      {"params", params},
      {"step", ck.step},
      {"config", ck.config},
      {"rng", {{"seed", ck.rng_seed}, {"next_step", ck.rng_next_step}}},
  };
  const std::string text = header.dump();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError(DataError::Kind::Missing, "cannot write " + tmp.string());
    out.write(kMagic, 8);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), std::streamsize(text.size()));
    for (const auto& p : m.params) {
      for (Real v : p.value.data()) put<double>(out, double(v));
    }
    if (!out) throw DataError(DataError::Kind::Missing, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Missing, "cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError(DataError::Kind::BadMagic, path.string() + " is not an ARTKCKPT file");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw DataError(DataError::Kind::BadMagic, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = get<std::uint64_t>(in, "header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), std::streamsize(len))) {
    throw DataError(DataError::Kind::Truncated, "checkpoint truncated in header");
  }
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Kind::Truncated, std::string("checkpoint header: ") + e.what());
  }
  Checkpoint ck;
  try {
    ModelParams& m = ck.model;
    m.arch_name = h["arch"]["name"].get<std::string>();
    m.class_count = h["arch"]["class_count"].get<std::size_t>();
    m.input_shape = h["arch"]["input_shape"].get<std::array<std::size_t, 3>>();
    for (const auto& l : h["arch"]["layers"]) {
      m.layers.push_back({parse_kind(l["kind"].get<std::string>()), l["in"].get<std::size_t>(),
                          l["out"].get<std::size_t>(), l["kernel"].get<std::size_t>(),
                          l["pad"].get<std::size_t>()});
    }
    for (const auto& p : h["params"]) {
      Tensor t(p["shape"].get<Shape>());
      for (auto& v : t.data()) v = Real(get<double>(in, p["name"].get<std::string>()));
      m.params.push_back({p["name"].get<std::string>(), std::move(t)});
    }
    ck.step = h["step"].get<std::size_t>();
    ck.config = h["config"];
    ck.rng_seed = h["rng"]["seed"].get<std::uint64_t>();
    ck.rng_next_step = h["rng"]["next_step"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataError::Kind::BadMagic, std::string("checkpoint header: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(DataError::Kind::CountMismatch, "checkpoint has trailing bytes");
  }
  try {
    ck.model.validate();
  } catch (const ContractViolation& e) {
    throw DataError(DataError::Kind::CountMismatch, std::string("checkpoint: ") + e.what());
  }
  return ck;
}

ModelParams build_model(const std::string& arch, std::uint64_t seed, const Dataset& data) {
  const Shape s = data.sample_shape();
  const std::array<std::size_t, 3> in{s[1], s[2], s[3]};
  if (arch == "small-cnn") return build_small_cnn(seed, data.class_count, in);
  if (arch == "mlp") return build_mlp(seed, in, {64}, data.class_count);
  if (arch == "linear") return build_mlp(seed, in, {}, data.class_count);
  throw ConfigError("unknown arch '" + arch + "' (small-cnn, mlp, linear)");
}

Checkpoint train(const Dataset& data, const TrainConfig& cfg, const TrainHooks& hooks,
                 const ModelParams* init, nlohmann::json config_echo) {
  cfg.validate();
  if (data.size() == 0) throw DataError(DataError::Kind::Empty, "training set is empty");
  Checkpoint ck;
  ck.model = init ? *init : build_model(cfg.arch, cfg.seed, data);
  ck.config = config_echo.is_null() ? to_json(cfg) : std::move(config_echo);
  ck.rng_seed = cfg.seed;

  std::vector<Tensor> params;
  for (const auto& p : ck.model.params) params.push_back(p.value);
  OptimizerState opt;
  std::size_t epoch = 0, cursor = 0, negative_batches = 0, cacr_batches = 0;
  auto order = epoch_batches(data.size(), cfg.batch_size, cfg.seed, epoch, true);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cursor == order.size()) {
      order = epoch_batches(data.size(), cfg.batch_size, cfg.seed, ++epoch, true);
      cursor = 0;
    }
    const Batch batch = make_batch(data, order[cursor++]);
    const std::size_t b = batch.labels.size();

    for (std::size_t k = 0; k < params.size(); ++k) ck.model.params[k].value = params[k];
    Network net(ck.model, true);
    StepLog log;
    log.step = step + 1;
    log.epoch = epoch;
    log.lr = cfg.optimizer.lr.at(step);
    std::vector<Tensor> grads;
    for (const auto& p : params) grads.emplace_back(p.shape());

    try {
      Tensor x_prime = batch.x;
      if (cfg.mode != TrainMode::Natural) {
        AttackConfig attack = cfg.attack;
        attack.seed = splitmix64(cfg.seed ^ splitmix64(step + 1));
        if (step < cfg.epsilon_ramp_steps) {
          attack.epsilon = cfg.attack.epsilon * Real(step + 1) / Real(cfg.epsilon_ramp_steps);
        }
        log.epsilon = double(attack.epsilon);
        const Network frozen(ck.model, false);
        if (cfg.mode == TrainMode::AttribRobust && cfg.inner == InnerAdversary::Attributional) {
          x_prime = inner_max_perturbation(frozen, batch.x, batch.labels, attack);
        } else {
          x_prime = pgd_attack(frozen, batch.x, batch.labels, attack).x_adv;
        }
        for (std::size_t i = 0; i < b; ++i) {
          log.max_linf = std::max(log.max_linf, linf_distance(x_prime, batch.x, i));
        }
        if (log.max_linf > double(attack.epsilon) + 1e-6) {
          throw ContractViolation("train: x' left the epsilon ball");
        }
      }

      Var ce = mean_ce(net, x_prime, batch.labels);
      log.ce = log.loss = ce.item();
      accumulate(grads, gradient(ce, std::span<const Var>(net.params())));

      const ObjectiveConfig& obj = cfg.objective;
      if (cfg.mode == TrainMode::AttribRobust && (obj.lambda_cacr > 0 || obj.lambda_wacr > 0)) {
        const std::size_t r = cfg.regularizer_samples ? std::min(cfg.regularizer_samples, b) : b;
        double cacr = 0, wacr = 0, reg = 0;
        std::size_t negative = 0;
        for (std::size_t from = 0; from < r; from += cfg.regularizer_chunk) {
          const std::size_t to = std::min(r, from + cfg.regularizer_chunk);
          const Real weight = Real(to - from) / Real(r);
          std::vector<std::size_t> labels(batch.labels.begin() + from, batch.labels.begin() + to);
          LossTerms t = regularizer_loss(net, Var(rows(batch.x, from, to)),
                                         Var(rows(x_prime, from, to)), labels, obj);
          reg += weight * t.total.item();
          if (t.cacr.defined()) cacr += weight * t.cacr.item();
          if (t.wacr.defined()) wacr += weight * t.wacr.item();
          for (Real c : t.cacr_per_sample) negative += c < 0;
          accumulate(grads, gradient(ops::scale(t.total, weight), std::span<const Var>(net.params())));
        }
        log.loss += reg;
        if (obj.lambda_cacr > 0) {
          log.cacr = cacr;
          ++cacr_batches;
          negative_batches += cacr < 0;
          log.cacr_negative_samples = double(negative) / double(r);
          log.cacr_negative_batches = double(negative_batches) / double(cacr_batches);
        }
        if (obj.lambda_wacr > 0) log.wacr = wacr;
      }
      for (const auto& g : grads) {
        if (!g.all_finite()) throw NumericError("gradient", "non-finite parameter gradient");
      }
    } catch (const NumericError& e) {
      throw NumericError("train step " + std::to_string(step + 1) + ": " + e.where(), e.detail());
    }
    optimizer_step(params, grads, opt, cfg.optimizer, step);

    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (hooks.on_step) hooks.on_step(log);
    const bool last = step + 1 == cfg.steps;
    if ((step + 1) % cfg.checkpoint_every == 0 || last) {
      for (std::size_t k = 0; k < params.size(); ++k) ck.model.params[k].value = params[k];
      ck.step = step + 1;
      ck.rng_next_step = step + 1;
      if (hooks.on_checkpoint) hooks.on_checkpoint(ck);
    }
  }
  return ck;
}

}  // namespace artk
