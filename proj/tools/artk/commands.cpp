#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>

#include "artk/errors.hpp"
#include "artk/evaluate.hpp"
#include "artk/trainer.hpp"
#include "pgm.hpp"
#include "run_config.hpp"

namespace artk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config = "mnist-desk";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> limit;
  std::optional<std::size_t> workers;
  std::string out = "artk-out";
  std::string data;
  std::string checkpoint;
};

void add_common(CLI::App& cmd, CommonOptions& o, bool needs_checkpoint) {
  cmd.add_option("--config", o.config, "profile name or config file")->capture_default_str();
  cmd.add_option("--set", o.sets, "override a config key: key=value (repeatable)");
  cmd.add_option("--seed", o.seed, "seed override");
  cmd.add_option("--limit", o.limit, "use only the first N images of the split");
  cmd.add_option("--workers", o.workers, "evaluation threads");
  cmd.add_option("--out", o.out, "output directory")->capture_default_str();
  cmd.add_option("--data", o.data, "MNIST directory (overrides data_dir and ARTK_DATA_DIR)");
  auto* ck = cmd.add_option("--checkpoint", o.checkpoint, "model checkpoint");
  if (needs_checkpoint) ck->required();
}

// Precedence: profile/file < --set < dedicated flags.
RunConfig resolve(const CommonOptions& o, const std::string& limit_key) {
  RunConfig rc;
  rc.merge_text(profile_or_file(o.config), o.config);
  for (const auto& s : o.sets) rc.set_assignment(s);
  if (o.seed) rc.set("seed", std::to_string(*o.seed));
  if (o.limit) rc.set(limit_key, std::to_string(*o.limit));
  if (o.workers) rc.set("workers", std::to_string(*o.workers));
  std::string dir = o.data;
  if (dir.empty()) dir = rc.get("data_dir");
  if (dir.empty()) {
    if (const char* env = std::getenv("ARTK_DATA_DIR")) dir = env;
  }
  if (dir.empty()) dir = ARTK_DEFAULT_DATA_DIR;
  rc.set("data_dir", dir);
  return rc;
}

Dataset load_split(const RunConfig& rc, const std::string& split, const std::string& limit_key) {
  Dataset ds = load_mnist_split(rc.get("data_dir"), split).head(rc.count(limit_key));
  if (ds.size() == 0) throw DataError(DataError::Kind::Empty, split + " split is empty");
  return ds;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(DataError::Kind::Missing, "cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError(DataError::Kind::Missing, "cannot write " + path.string());
  return f;
}

json checkpoint_echo(const std::string& path, const Checkpoint& ck) {
  return {{"path", path}, {"step", ck.step}, {"config", ck.config}};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(); }

int cmd_train(const CommonOptions& o, const std::string& init_path, std::size_t log_every,
              std::ostream& err) {
  RunConfig rc = resolve(o, "limit_train");
  const TrainConfig cfg = rc.train_config();
  const Dataset train_set = load_split(rc, "train", "limit_train");
  std::optional<Checkpoint> init;
  if (!init_path.empty()) init = load_checkpoint(init_path);

  const fs::path out(o.out);
  make_dir(out);
  std::ofstream log = open_out(out / "train_log.jsonl");
  json header = {{"type", "config"},
                 {"config", rc.resolved()},
                 {"train", to_json(cfg)},
                 {"n_train", train_set.size()}};
  if (init) header["init"] = checkpoint_echo(init_path, *init);
  log << header.dump() << "\n";

  const auto t0 = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& s) {
    json j = to_json(s);
    j["type"] = "step";
    log << j.dump() << "\n";
    if (s.step % log_every == 0 || s.step == cfg.steps) {
      log.flush();
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      err << "step " << s.step << "/" << cfg.steps << " loss " << s.loss << " ce " << s.ce;
      if (s.cacr) err << " cacr " << *s.cacr;
      if (s.wacr) err << " wacr " << *s.wacr;
      if (cfg.mode != TrainMode::Natural) err << " eps " << s.epsilon;
      err << " (" << std::fixed << std::setprecision(2) << elapsed / double(s.step) << " s/step)"
          << std::defaultfloat << std::setprecision(6) << "\n";
    }
  };
  hooks.on_checkpoint = [&](const Checkpoint& ck) {
    save_checkpoint(out / ("step-" + std::to_string(ck.step) + ".ckpt"), ck);
  };
  const Checkpoint final_ck = train(train_set, cfg, hooks, init ? &init->model : nullptr, rc.resolved());
  save_checkpoint(out / "final.ckpt", final_ck);
  err << "wrote " << (out / "final.ckpt").string() << "\n";
  return kOk;
}

struct EvalRun {
  RunConfig rc;
  EvalConfig cfg;
  Checkpoint ck;
  Dataset test;
  json echo;
};

EvalRun prepare_eval(const CommonOptions& o) {
  EvalRun r{resolve(o, "limit_test"), {}, {}, {}, {}};
  r.cfg = r.rc.eval_config();
  r.ck = load_checkpoint(o.checkpoint);
  r.test = load_split(r.rc, "test", "limit_test");
  r.echo = {{"config", r.rc.resolved()},
            {"eval", to_json(r.cfg)},
            {"checkpoint", checkpoint_echo(o.checkpoint, r.ck)}};
  return r;
}

auto progress_to(std::ostream& err) {
  return [&err](const std::string& s) { err << s << "\n"; };
}

int cmd_evaluate(const CommonOptions& o, std::ostream& out_stream, std::ostream& err) {
  EvalRun r = prepare_eval(o);
  const RobustnessRecord rec = evaluate(r.ck.model, r.test, r.cfg, progress_to(err));
  const fs::path out(o.out);
  make_dir(out);
  const json metrics = artk::to_json(rec, r.echo);
  open_out(out / "metrics.json") << metrics.dump(2) << "\n";
  std::ofstream per = open_out(out / "ifia_samples.jsonl");
  for (const auto& s : rec.per_sample) {
    json j = to_json(s.record);
    j["index"] = s.index;
    per << j.dump() << "\n";
  }
  out_stream << "nat_acc " << rec.nat_acc << " adv_acc " << opt_json(rec.adv_acc).dump()
             << " median_topk " << opt_json(rec.median_topk).dump() << " median_kendall "
             << opt_json(rec.median_kendall).dump() << "\n";
  return kOk;
}

int cmd_attack(const CommonOptions& o, const std::string& kind, bool dump_images,
               std::ostream& out_stream, std::ostream& err) {
  EvalRun r = prepare_eval(o);
  r.cfg.run_pgd = kind == "pgd";
  r.cfg.run_ifia = kind == "ifia";
  r.cfg.keep_images = dump_images;
  r.echo["attack"] = kind;
  const RobustnessRecord rec = evaluate(r.ck.model, r.test, r.cfg, progress_to(err));

  const fs::path out(o.out);
  make_dir(out);
  if (dump_images) make_dir(out / "images");
  const auto& shape = r.test.images.shape();
  const std::size_t h = shape[2], w = shape[3];
  auto dump = [&](std::size_t index, const Real* px) {
    char name[64];
    std::snprintf(name, sizeof name, "%s-%05zu.pgm", kind.c_str(), index);
    write_pgm(out / "images" / name, px, h, w);  // first channel
  };

  std::ofstream report = open_out(out / ("attack_" + kind + ".jsonl"));
  report << json{{"type", "config"}, {"config_echo", r.echo}}.dump() << "\n";
  double max_linf = 0;
  if (kind == "pgd") {
    const std::size_t row = r.test.images.size() / r.test.size();
    for (std::size_t i = 0; i < rec.pgd_samples.size(); ++i) {
      json j = to_json(rec.pgd_samples[i]);
      j["type"] = "sample";
      j["index"] = i;
      report << j.dump() << "\n";
      max_linf = std::max(max_linf, rec.pgd_samples[i].linf);
      if (dump_images) dump(i, rec.pgd_x_adv.ptr() + i * row);
    }
  } else {
    for (const auto& s : rec.per_sample) {
      json j = to_json(s.record);
      j["type"] = "sample";
      j["index"] = s.index;
      report << j.dump() << "\n";
      max_linf = std::max(max_linf, s.record.linf);
      if (dump_images) dump(s.index, s.x_adv.ptr());
    }
  }
  json summary = {{"type", "summary"},
                  {"n_test", rec.n_test},
                  {"nat_acc", rec.nat_acc},
                  {"max_linf", max_linf}};
  if (kind == "pgd") {
    summary["adv_acc"] = opt_json(rec.adv_acc);
  } else {
    summary["n_samples"] = rec.n_samples;
    summary["median_topk"] = opt_json(rec.median_topk);
    summary["median_kendall"] = opt_json(rec.median_kendall);
    summary["median_spearman"] = opt_json(rec.median_spearman);
  }
  report << summary.dump() << "\n";
  summary.erase("type");
  out_stream << summary.dump() << "\n";
  return kOk;
}

int cmd_attribute(const CommonOptions& o, std::optional<std::size_t> index,
                  const std::string& image_path, std::optional<std::size_t> label,
                  std::optional<std::size_t> m_flag, std::ostream& out_stream) {
  RunConfig rc = resolve(o, "limit_test");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const std::size_t m = m_flag ? *m_flag : rc.count("attribution_m");
  if (m < 1) throw ConfigError("--m must be >= 1");

  Tensor x;
  std::optional<std::size_t> true_label;
  if (index) {
    const Dataset test = load_mnist_split(rc.get("data_dir"), "test");
    if (*index >= test.size()) {
      throw DataError(DataError::Kind::Empty, "--index " + std::to_string(*index) + " past the test set");
    }
    x = test.sample(*index);
    true_label = test.labels[*index];
  } else {
    x = read_pgm(image_path);
  }
  const auto& in = ck.model.input_shape;
  if (x.dim(1) != in[0] || x.dim(2) != in[1] || x.dim(3) != in[2]) {
    throw DataError(DataError::Kind::CountMismatch,
                    "image " + shape_str(x.shape()) + " does not fit the model input");
  }
  const Network net(ck.model, false);
  std::size_t pred;
  {
    NoGradGuard ng;
    pred = predictions(net.forward(Var(x)).value())[0];
  }
  const std::size_t target = label ? *label : pred;
  if (target >= ck.model.class_count) throw ConfigError("--label out of range");

  AttributionConfig acfg;
  acfg.m = m;
  std::vector<Real> map;
  {
    NoGradGuard ng;
    map = base_attribution(net, target, Var(x), acfg).tensor().vec();
  }
  const fs::path out(o.out);
  make_dir(out);
  write_pgm_normalized(out / "saliency.pgm", map, in[1], in[2]);
  write_csv(out / "saliency.csv", map, in[1], in[2]);
  json meta = {{"checkpoint", checkpoint_echo(o.checkpoint, ck)},
               {"config", rc.resolved()},
               {"source", index ? json{{"index", *index}} : json{{"image", image_path}}},
               {"true_label", true_label ? json(*true_label) : json()},
               {"predicted", pred},
               {"target_class", target},
               {"m", m}};
  open_out(out / "saliency.json") << meta.dump(2) << "\n";
  double total = 0;
  for (Real v : map) total += double(v);
  out_stream << "class " << target << " attribution sum " << total << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attributional robustness toolkit: train, evaluate, attack, attribute", "artk"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");
  bool list_keys = false;
  app.add_flag("--list-keys", list_keys, "print every config key with its default and exit");

  CommonOptions train_o, eval_o, attack_o, attr_o;
  std::string init_path;
  std::size_t log_every = 25;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoints");
  add_common(*train_cmd, train_o, false);
  train_cmd->add_option("--init", init_path, "start from this checkpoint's parameters");
  train_cmd->add_option("--log-every", log_every, "progress line cadence")->check(CLI::PositiveNumber);

  auto* eval_cmd = app.add_subcommand("evaluate", "natural/PGD accuracy and IFIA medians");
  add_common(*eval_cmd, eval_o, true);

  std::string kind;
  bool dump_images = false;
  auto* attack_cmd = app.add_subcommand("attack", "per-sample PGD or IFIA report");
  add_common(*attack_cmd, attack_o, true);
  attack_cmd->add_option("kind", kind, "pgd | ifia")->required()->check(CLI::IsMember({"pgd", "ifia"}));
  attack_cmd->add_flag("--dump-images", dump_images, "write attacked images as PGM");

  std::optional<std::size_t> index, label, m;
  std::string image;
  auto* attr_cmd = app.add_subcommand("attribute", "IG saliency map as PGM and CSV");
  add_common(*attr_cmd, attr_o, true);
  auto* idx_opt = attr_cmd->add_option("--index", index, "test-set image index");
  auto* img_opt = attr_cmd->add_option("--image", image, "binary PGM image");
  idx_opt->excludes(img_opt);
  attr_cmd->add_option("--label", label, "class to attribute (default: predicted)");
  attr_cmd->add_option("--m", m, "Riemann steps (default: attribution_m)");

  if (std::find(args.begin(), args.end(), "--list-keys") != args.end()) {
    for (const auto& k : config_keys()) {
      out << std::left << std::setw(22) << k.name << std::setw(16) << k.fallback << k.help << "\n";
    }
    out << "profiles:";
    for (const auto& p : profile_names()) out << " " << p;
    out << "\n";
    return kOk;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "artk: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_o, init_path, log_every, err);
    if (*eval_cmd) return cmd_evaluate(eval_o, out, err);
    if (*attack_cmd) return cmd_attack(attack_o, kind, dump_images, out, err);
    if (index || !image.empty()) return cmd_attribute(attr_o, index, image, label, m, out);
    err << "artk attribute: give --index or --image\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "artk: config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "artk: data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    err << "artk: numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ContractViolation& e) {
    err << "artk: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace artk::cli
