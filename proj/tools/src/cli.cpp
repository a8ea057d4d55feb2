#include "coad_tools/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "coad/checkpoint.hpp"
#include "coad/config.hpp"
#include "coad/dataio.hpp"
#include "coad/gradcheck.hpp"
#include "coad/inference.hpp"
#include "coad/metrics.hpp"
#include "coad/model.hpp"
#include "coad/runtime.hpp"
#include "coad/train.hpp"

namespace coad::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Exit status for a failed check, carried out of the command bodies.
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ExperimentConfig load_experiment(const std::string& config_path, const std::string& preset) {
  ExperimentConfig cfg;
  if (!preset.empty()) {
    cfg.model = ModelConfig::preset(preset);
    cfg.synth.canvas = cfg.model.backbone.input_size;
  }
  if (!config_path.empty()) cfg = apply_config(KeyValueConfig::load(config_path), cfg);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> groups, canvas, group_size, distractors;
};

int gen_data(const GenDataArgs& a, std::ostream& out) {
  ExperimentConfig cfg;
  if (!a.spec.empty()) cfg = apply_config(KeyValueConfig::load(a.spec));
  if (a.seed) cfg.synth.seed = *a.seed;
  if (a.groups) cfg.synth.n_groups = *a.groups;
  if (a.canvas) cfg.synth.canvas = *a.canvas;
  if (a.group_size) cfg.synth.group_size = *a.group_size;
  if (a.distractors) cfg.synth.max_distractors = *a.distractors;
  const auto groups = generate(cfg.synth);
  write_dataset(groups, a.out);
  out << "wrote " << groups.size() << " groups of " << cfg.synth.group_size << " images (" << cfg.synth.canvas << "x"
      << cfg.synth.canvas << ") to " << a.out << '\n';
  return kOk;
}

// train ------------------------------------------------------------------

struct TrainArgs {
  std::string data, config, out, preset, log;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> iters, halve_every, log_every;
  std::optional<double> lr;
};

int train_cmd(const TrainArgs& a, std::ostream& out) {
  ExperimentConfig cfg = load_experiment(a.config, a.preset);
  if (a.seed) cfg.train.seed = cfg.model.seed = *a.seed;
  if (a.iters) cfg.train.max_iters = *a.iters;
  if (a.halve_every) cfg.train.halve_every = *a.halve_every;
  if (a.lr) cfg.train.lr0 = *a.lr;
  cfg.model.validate();
  cfg.train.validate();

  const auto groups = load_dataset(a.data, MaskPolicy::kRequired);
  if (groups.empty()) throw IoError("no groups found in " + a.data);
  const auto data = make_train_data<float>(groups, cfg.model.backbone.input_size);

  CoADNet<float> model(cfg.model);
  out << "model " << cfg.model.ablation.label() << ", " << model.parameters().scalar_count() << " parameters; "
      << data.groups.size() << " groups, " << data.aux.size() << " auxiliary samples\n";

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw IoError("cannot create " + a.log);
    log << "iteration\tloss\tcosal_loss\tsal_loss\tlr\n";
  }
  const std::int64_t every = a.log_every.value_or(10);
  const auto t0 = Clock::now();
  TrainCallbacks cb;
  cb.on_iteration = [&](const IterationRecord& r) {
    if (log.is_open()) {
      log << r.iteration << '\t' << fmt("%.6f", r.loss) << '\t' << fmt("%.6f", r.cosal_loss) << '\t'
          << fmt("%.6f", r.sal_loss) << '\t' << fmt("%.3g", r.lr) << '\n';
    }
    if (every > 0 && (r.iteration + 1) % every == 0) {
      out << "iter " << r.iteration + 1 << "  loss " << fmt("%.4f", r.loss) << "  (Lc " << fmt("%.4f", r.cosal_loss)
          << ", Ls " << fmt("%.4f", r.sal_loss) << ")  lr " << fmt("%.3g", r.lr) << "  " << fmt("%.0f", seconds_since(t0))
          << "s\n";
    }
  };
  cb.on_checkpoint = [&](std::int64_t) { save_checkpoint(model, a.out); };
  const TrainResult result = train(model, data, cfg.train, cb);
  out << "trained " << result.iterations << " iterations, final loss " << fmt("%.4f", result.loss_trace.back())
      << "; checkpoint " << a.out << '\n';
  return kOk;
}

// eval / infer -----------------------------------------------------------

struct EvalArgs {
  std::string data, ckpt, report, pr_csv, maps;
  std::uint64_t seed = 1;
};

int eval_cmd(const EvalArgs& a, std::ostream& out) {
  const auto model = load_checkpoint<float>(a.ckpt);
  const auto groups = load_dataset(a.data, MaskPolicy::kRequired);
  if (groups.empty()) throw IoError("no groups found in " + a.data);
  const MetricsReport report = evaluate(model, groups, a.seed, a.maps.empty() ? fs::path{} : fs::path(a.maps));
  std::ostringstream tsv;
  write_report_tsv(tsv, report);
  write_text(a.report, tsv.str());
  if (!a.pr_csv.empty()) {
    std::ostringstream csv;
    write_pr_csv(csv, report.pr_curve);
    write_text(a.pr_csv, csv.str());
  }
  out << format_report_table(report);
  return kOk;
}

struct InferArgs {
  std::string group, ckpt, out;
  std::uint64_t seed = 1;
};

int infer_cmd(const InferArgs& a, std::ostream& out) {
  const auto model = load_checkpoint<float>(a.ckpt);
  const ImageGroup group = load_group(a.group, MaskPolicy::kOptional);
  const auto maps = predict_group(model, group, a.seed);
  write_maps(maps, group.names, group.images, a.out);
  out << "wrote " << maps.size() << " maps to " << a.out << '\n';
  return kOk;
}

// ablate -----------------------------------------------------------------

std::vector<AblationFlags> parse_flag_list(const std::string& list) {
  const auto ladder = AblationFlags::ladder();
  if (list.empty() || list == "ladder") return ladder;
  std::vector<AblationFlags> out;
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "baseline") out.push_back(ladder[0]);
    else if (tok == "+oiasg") out.push_back(ladder[1]);
    else if (tok == "+gasa") out.push_back(ladder[2]);
    else if (tok == "+ggd") out.push_back(ladder[3]);
    else if (tok == "+gcpd" || tok == "full") out.push_back(ladder[4]);
    else if (tok.size() == 4 && tok.find_first_not_of("01") == std::string::npos) {
      out.push_back({tok[0] == '1', tok[1] == '1', tok[2] == '1', tok[3] == '1'});
    } else {
      throw ConfigError("--flags: unknown variant '" + tok +
                        "' (use ladder, baseline, +oiasg, +gasa, +ggd, +gcpd, full or a 4-digit mask)");
    }
  }
  if (out.empty()) throw ConfigError("--flags: empty variant list");
  return out;
}

struct AblateArgs {
  std::string data, test, flags, config, preset, report;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> iters;
  double holdout = 0.2;
};

int ablate_cmd(const AblateArgs& a, std::ostream& out) {
  ExperimentConfig cfg = load_experiment(a.config, a.preset);
  if (a.seed) cfg.train.seed = cfg.model.seed = *a.seed;
  if (a.iters) cfg.train.max_iters = *a.iters;
  const auto variants = parse_flag_list(a.flags);

  auto train_groups = load_dataset(a.data, MaskPolicy::kRequired);
  std::vector<ImageGroup> test_groups;
  if (!a.test.empty()) {
    test_groups = load_dataset(a.test, MaskPolicy::kRequired);
  } else {
    if (!(a.holdout > 0 && a.holdout < 1)) throw ConfigError("--holdout must be in (0, 1)");
    const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(train_groups.size() * a.holdout));
    if (n_test >= train_groups.size()) throw IoError("not enough groups in " + a.data + " to hold some out");
    test_groups.assign(train_groups.end() - static_cast<std::ptrdiff_t>(n_test), train_groups.end());
    train_groups.resize(train_groups.size() - n_test);
  }
  const auto data = make_train_data<float>(train_groups, cfg.model.backbone.input_size);

  std::ostringstream table;
  table << "variant                        params   F       maxF    MAE     S\n";
  std::ostringstream tsv;
  tsv << "variant\tparams\tf_measure\tmax_f\tmae\ts_measure\n";
  for (const auto& flags : variants) {
    ModelConfig mc = cfg.model;
    mc.ablation = flags;
    CoADNet<float> model(mc);
    const auto t0 = Clock::now();
    train(model, data, cfg.train);
    const MetricsReport r = evaluate(model, test_groups, cfg.train.seed);
    char line[160];
    std::snprintf(line, sizeof(line), "%-29s %7lld   %.4f  %.4f  %.4f  %.4f\n", flags.label().c_str(),
                  static_cast<long long>(model.parameters().scalar_count()), r.f_measure, r.max_f, r.mae, r.s_measure);
    table << line;
    out << line << std::flush;
    out << "  (" << fmt("%.0f", seconds_since(t0)) << "s)\n";
    tsv << flags.label() << '\t' << model.parameters().scalar_count() << '\t' << fmt("%.6f", r.f_measure) << '\t'
        << fmt("%.6f", r.max_f) << '\t' << fmt("%.6f", r.mae) << '\t' << fmt("%.6f", r.s_measure) << '\n';
  }
  out << '\n' << table.str();
  if (!a.report.empty()) write_text(a.report, tsv.str());
  return kOk;
}

// gradcheck --------------------------------------------------------------

struct GradcheckArgs {
  std::vector<std::string> cases;
  std::int64_t seeds = 5;
  double tolerance = 1e-3;
};

int gradcheck_cmd(const GradcheckArgs& a, std::ostream& out) {
  const auto names = a.cases.empty() ? gradcheck_suite_names() : a.cases;
  GradCheckOptions opts;
  opts.tolerance = a.tolerance;
  int failures = 0;
  for (const auto& name : names) {
    for (std::int64_t s = 1; s <= a.seeds; ++s) {
      const auto r = run_gradcheck_case(name, static_cast<std::uint64_t>(s), opts);
      char line[200];
      std::snprintf(line, sizeof(line), "%-4s %-15s seed %lld  max rel err %.3e  (%lld elements, worst %s)\n",
                    r.passed ? "ok" : "FAIL", name.c_str(), static_cast<long long>(s), r.max_rel_error,
                    static_cast<long long>(r.elements), r.worst_leaf.c_str());
      out << line;
      if (!r.passed) ++failures;
    }
  }
  if (failures) throw CheckFailed(std::to_string(failures) + " gradient checks exceeded tolerance " + fmt("%g", a.tolerance));
  out << "all gradient checks passed\n";
  return kOk;
}

// inspect ----------------------------------------------------------------

struct InspectArgs {
  std::string ckpt, group, out;
  std::uint64_t seed = 1;
};

// Channel-mean maps of U and X, normalised together per image.
void write_heatmaps(const CoADNet<float>& model, const ImageGroup& group, const fs::path& dir, std::uint64_t seed,
                    std::ostream& out) {
  const std::int64_t size = model.config().backbone.input_size;
  const std::int64_t n = model.config().group_size;
  std::vector<Tensor<float>> images;
  Rng rng(seed);
  const auto chunks = form_subgroups(static_cast<std::int64_t>(group.size()), n, rng);
  for (auto idx : chunks.front()) images.push_back(image_tensor<float>(group.images[static_cast<std::size_t>(idx)], size));
  NoGradGuard guard;
  const auto pred = model.forward_group(images);
  fs::create_directories(dir);
  const auto real = std::min<std::size_t>(group.size(), static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < real; ++i) {
    const auto idx = static_cast<std::size_t>(chunks.front()[i]);
    Tensor<float> u = reduce_pool(pred.intra_features[i], PoolKind::kChannelMean);
    Tensor<float> x = reduce_pool(pred.cosal_features[i], PoolKind::kChannelMean);
    float lo = u[0], hi = u[0];
    for (auto t : {u, x}) {
      for (float v : t.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    const float range = hi > lo ? hi - lo : 1.0f;
    for (auto t : {u, x}) {
      for (float& v : t.data()) v = (v - lo) / range;
    }
    const auto& ref = group.images[idx];
    write_raster(dir / (group.names[idx] + "_U" + default_raster_extension(1)), map_raster(u, ref.width, ref.height));
    write_raster(dir / (group.names[idx] + "_X" + default_raster_extension(1)), map_raster(x, ref.width, ref.height));
  }
  out << "wrote U/X heatmaps for " << real << " images to " << dir.string() << '\n';
}

int inspect_cmd(const InspectArgs& a, std::ostream& out) {
  const CheckpointData data = read_checkpoint(a.ckpt);
  out << "checkpoint version " << data.version << ", " << data.entries.size() << " tensors\n";
  out << model_config_text(data.config);
  std::int64_t total = 0;
  for (const auto& e : data.entries) {
    out << "  " << e.name << "  " << shape_str(e.shape) << '\n';
    total += static_cast<std::int64_t>(e.values.size());
  }
  out << "total parameters: " << total << '\n';
  if (!a.group.empty()) {
    if (a.out.empty()) throw ConfigError("inspect: --group needs --out for the heatmaps");
    CoADNet<float> model(data.config);
    restore_parameters(model, data);
    write_heatmaps(model, load_group(a.group), a.out, a.seed, out);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"co-saliency detection toolkit", "coad"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic co-saliency dataset");
  gen_cmd->add_option("--spec", gen.spec, "key=value file with synth.* keys")->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed (overrides synth.seed)");
  gen_cmd->add_option("--groups", gen.groups, "Number of groups");
  gen_cmd->add_option("--canvas", gen.canvas, "Image size in pixels");
  gen_cmd->add_option("--group-size", gen.group_size, "Images per group");
  gen_cmd->add_option("--distractors", gen.distractors, "Maximum distractors per image (0-2)");

  TrainArgs tr;
  auto* train_sub = app.add_subcommand("train", "Train a model on a dataset directory");
  train_sub->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_sub->add_option("--config", tr.config, "key=value config file")->check(CLI::ExistingFile);
  train_sub->add_option("--out", tr.out, "Checkpoint path")->required();
  train_sub->add_option("--preset", tr.preset, "Model preset: tiny, desk or wide");
  train_sub->add_option("--seed", tr.seed, "Seed for weights and batching");
  train_sub->add_option("--iters", tr.iters, "Training iterations");
  train_sub->add_option("--lr", tr.lr, "Initial learning rate");
  train_sub->add_option("--halve-every", tr.halve_every, "Halve the learning rate every N iterations");
  train_sub->add_option("--log", tr.log, "Write the per-iteration loss trace (TSV)");
  train_sub->add_option("--log-every", tr.log_every, "Print progress every N iterations (0: never)");

  EvalArgs ev;
  auto* eval_sub = app.add_subcommand("eval", "Score a checkpoint on a dataset with ground truth");
  eval_sub->add_option("--data", ev.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval_sub->add_option("--ckpt", ev.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_sub->add_option("--report", ev.report, "Metrics report (name<TAB>value)")->required();
  eval_sub->add_option("--pr-csv", ev.pr_csv, "Write the P-R curve as CSV");
  eval_sub->add_option("--maps", ev.maps, "Also write predicted maps under this directory");
  eval_sub->add_option("--seed", ev.seed, "Seed for sub-group padding");

  InferArgs inf;
  auto* infer_sub = app.add_subcommand("infer", "Predict co-saliency maps for one image group");
  infer_sub->add_option("--group", inf.group, "Group directory")->required()->check(CLI::ExistingDirectory);
  infer_sub->add_option("--ckpt", inf.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  infer_sub->add_option("--out", inf.out, "Output directory")->required();
  infer_sub->add_option("--seed", inf.seed, "Seed for sub-group padding");

  AblateArgs ab;
  auto* ablate_sub = app.add_subcommand("ablate", "Train and compare module ablation variants");
  ablate_sub->add_option("--data", ab.data, "Training dataset directory")->required()->check(CLI::ExistingDirectory);
  ablate_sub->add_option("--test", ab.test, "Held-out dataset directory")->check(CLI::ExistingDirectory);
  ablate_sub->add_option("--flags", ab.flags,
                         "Comma-separated variants: ladder (default), baseline, +oiasg, +gasa, +ggd, +gcpd, full, "
                         "or 4-digit masks (oiasg gasa ggd gcpd)");
  ablate_sub->add_option("--config", ab.config, "key=value config file")->check(CLI::ExistingFile);
  ablate_sub->add_option("--preset", ab.preset, "Model preset: tiny, desk or wide");
  ablate_sub->add_option("--seed", ab.seed, "Seed for weights and batching");
  ablate_sub->add_option("--iters", ab.iters, "Training iterations per variant");
  ablate_sub->add_option("--holdout", ab.holdout, "Fraction of --data held out when --test is absent");
  ablate_sub->add_option("--report", ab.report, "Write the comparison as TSV");

  GradcheckArgs gc;
  auto* grad_sub = app.add_subcommand("gradcheck", "Finite-difference gradient checks per module");
  grad_sub->add_option("--case", gc.cases, "Restrict to these cases")->check(CLI::IsMember(gradcheck_suite_names()));
  grad_sub->add_option("--seeds", gc.seeds, "Seeds per case")->check(CLI::PositiveNumber);
  grad_sub->add_option("--tol", gc.tolerance, "Relative error tolerance");

  InspectArgs ins;
  auto* inspect_sub = app.add_subcommand("inspect", "List checkpoint tensors; optionally render U vs X heatmaps");
  inspect_sub->add_option("--ckpt", ins.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  inspect_sub->add_option("--group", ins.group, "Group directory to render")->check(CLI::ExistingDirectory);
  inspect_sub->add_option("--out", ins.out, "Heatmap output directory");
  inspect_sub->add_option("--seed", ins.seed, "Seed for sub-group padding");

  std::vector<std::string> argv_store{"coad"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    apply_thread_limit_from_env();
    if (*gen_cmd) return gen_data(gen, out);
    if (*train_sub) return train_cmd(tr, out);
    if (*eval_sub) return eval_cmd(ev, out);
    if (*infer_sub) return infer_cmd(inf, out);
    if (*ablate_sub) return ablate_cmd(ab, out);
    if (*grad_sub) return gradcheck_cmd(gc, out);
    if (*inspect_sub) return inspect_cmd(ins, out);
  } catch (const CheckFailed& e) {
    err << "check failed: " << e.what() << '\n';
    return kCheckFailed;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace coad::cli
