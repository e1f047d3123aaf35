#include "pgn/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pgn/checkpoint.hpp"
#include "pgn/config.hpp"
#include "pgn/errors.hpp"
#include "pgn/kernels.hpp"
#include "pgn/metrics.hpp"
#include "pgn/theory.hpp"
#include "pgn/train.hpp"

namespace fs = std::filesystem;

namespace pgn {

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out;
};

RunConfig load_config(const CommonOpts& opts, std::vector<std::string> extra = {}) {
  std::vector<std::string> overrides = opts.sets;
  overrides.insert(overrides.end(), extra.begin(), extra.end());
  if (opts.config_path.empty()) return parse_config_text("", overrides);
  return parse_config(opts.config_path, overrides);
}

void write_run_txt(const std::string& dir, const std::vector<std::string>& args,
                   const RunConfig& cfg) {
  std::ofstream out(fs::path(dir) / "run.txt");
  if (!out) throw IoError("cli", dir + "/run.txt: cannot open for writing");
  out << "# command: pgn";
  for (const std::string& a : args) out << " " << a;
  out << "\n# resolved configuration (loadable with --config)\n";
  out << cfg.to_text();
}

std::string ensure_out_dir(CommonOpts& opts, const std::string& command) {
  if (opts.out.empty()) opts.out = "runs/" + command;
  fs::create_directories(opts.out);
  return opts.out;
}

struct Pipeline {
  Dataset dataset;
  FrozenClassifier classifier;
  Network generator;
  Network discriminator;
};

FrozenClassifier classifier_from_checkpoint(const std::string& ckpt, const Dataset& ds) {
  const RunConfig snap = parse_config_text(read_checkpoint_config(ckpt));
  Rng rng(snap.classifier.seed);
  FrozenClassifier f;
  f.net = build_classifier(snap.classifier.spec, rng);
  NetEntry entry{"classifier", &f.net};
  load_checkpoint_into(ckpt, {entry});
  f.net.set_frozen(true);
  record_vanilla(f, ds);
  return f;
}

Pipeline build_pipeline(const RunConfig& cfg, bool want_pgn_nets) {
  Pipeline p;
  p.dataset = load_dataset_from_config(cfg.data);
  if (!cfg.eval.checkpoint.empty() &&
      fs::exists(fs::path(cfg.eval.checkpoint) / "manifest.txt")) {
    bool has_classifier = false;
    for (const std::string& n : checkpoint_tensor_names(cfg.eval.checkpoint)) {
      if (n.rfind("classifier/", 0) == 0) has_classifier = true;
    }
    if (has_classifier) {
      p.classifier = classifier_from_checkpoint(cfg.eval.checkpoint, p.dataset);
    }
  }
  if (p.classifier.net.layers.empty()) {
    ClassifierTrainOptions opt;
    opt.lr = cfg.classifier.lr;
    opt.epochs = cfg.classifier.epochs;
    opt.seed = cfg.classifier.seed;
    opt.stop_at_accuracy = cfg.classifier.stop_at_accuracy;
    p.classifier = train_classifier(p.dataset, cfg.classifier.spec, opt);
  }
  p.classifier.policy = cfg.train.access_policy;

  if (want_pgn_nets) {
    Rng rng(cfg.train.seed);
    Rng gen_rng = rng.fork();
    Rng disc_rng = rng.fork();
    GeneratorOptions gopts;
    gopts.zero_init_final = cfg.generator_zero_init_final;
    gopts.decoder_gain = cfg.generator_decoder_gain;
    p.generator = build_generator(cfg.generator, gen_rng, gopts);
    p.discriminator = build_discriminator(
        cfg.discriminator, cfg.train.discriminator_init, disc_rng,
        cfg.train.discriminator_init == DiscriminatorInit::FromClassifierTrunk
            ? &p.classifier.net
            : nullptr);
  }
  return p;
}

// Test-split evaluation of the trained pipeline; FGSM and mAP only when the
// policy allows score access.
struct EvalOutcome {
  double vanilla_top1 = 0.0, vanilla_map = -1.0;
  double pgn_top1 = 0.0, pgn_map = -1.0;
  double fgsm_top1 = -1.0, fgsm_map = -1.0;
};

EvalOutcome evaluate_pipeline(Pipeline& p, const RunConfig& cfg, bool with_generator) {
  EvalOutcome out;
  const Tensor& test = p.dataset.test_images;
  const std::vector<int>& labels = p.dataset.test_labels;
  const bool white_box = p.classifier.policy == AccessPolicy::WhiteBoxLogits;
  auto scores = [&p](const Tensor& images) {
    return kernels::softmax_forward(p.classifier.logits(images));
  };

  out.vanilla_top1 = top1_accuracy(p.classifier.vanilla_test_preds, labels);
  if (white_box) out.vanilla_map = mean_average_precision(scores(test), labels);

  if (with_generator) {
    const Tensor m = generate_perturbations(p.generator, test);
    const Tensor j = perturb(test, m, cfg.train.lambda);
    out.pgn_top1 = top1_accuracy(predict_in_chunks(p.classifier, j), labels);
    if (white_box) out.pgn_map = mean_average_precision(scores(j), labels);
  }

  if (white_box) {
    const Tensor adv = fgsm_perturb(p.classifier, test, labels, cfg.eval.fgsm_epsilon,
                                    p.dataset.channel_std);
    out.fgsm_top1 = top1_accuracy(predict_in_chunks(p.classifier, adv), labels);
    out.fgsm_map = mean_average_precision(scores(adv), labels);
  }
  return out;
}

std::string summary_text(const EvalOutcome& e, const RunConfig& cfg, bool with_generator) {
  SummaryRow row;
  row.dataset = cfg.data.source;
  row.classifier = cfg.classifier.spec.name;
  row.vanilla = format_score_cell(e.vanilla_top1, e.vanilla_map);
  row.proposed = with_generator
                     ? format_score_cell(e.pgn_top1, e.pgn_map) +
                           (cfg.train.loss_variant == LossVariant::LeastSquares ? " (ls)" : " (ce)")
                     : "n/a";
  row.baseline = e.fgsm_top1 < 0.0 ? "n/a" : format_score_cell(e.fgsm_top1, e.fgsm_map);
  return render_summary_table({row});
}

int cmd_gen_synthetic_data(CommonOpts& opts, const std::vector<std::string>& argv) {
  RunConfig cfg = load_config(opts);
  const std::string out = ensure_out_dir(opts, "gen-synthetic-data");
  if (cfg.data.source != "synthetic") {
    throw ConfigError("cli", "gen-synthetic-data requires data.source=synthetic");
  }
  SynthConfig s;
  s.train_size = cfg.data.train_size;
  s.test_size = cfg.data.test_size;
  s.noise = cfg.data.noise;
  s.hue_jitter = cfg.data.hue_jitter;
  s.fade_min = cfg.data.fade_min;
  s.seed = cfg.data.seed;
  const Dataset ds = make_synthetic_dataset(s);
  const std::string dest = out + "/dataset";
  save_dataset(ds, dest,
               cfg.data.format == "idx" ? DatasetFormat::IdxBinary : DatasetFormat::RawTensorDir);
  write_run_txt(out, argv, cfg);
  std::cout << "wrote " << ds.train_images.dim(0) << " train / " << ds.test_images.dim(0)
            << " test images to " << dest << " (" << cfg.data.format << ")\n";
  return 0;
}

int cmd_train_classifier(CommonOpts& opts, const std::vector<std::string>& argv) {
  RunConfig cfg = load_config(opts);
  const std::string out = ensure_out_dir(opts, "train-classifier");
  Dataset ds = load_dataset_from_config(cfg.data);
  ClassifierTrainOptions opt;
  opt.lr = cfg.classifier.lr;
  opt.epochs = cfg.classifier.epochs;
  opt.seed = cfg.classifier.seed;
  opt.stop_at_accuracy = cfg.classifier.stop_at_accuracy;
  FrozenClassifier f = train_classifier(ds, cfg.classifier.spec, opt);

  CheckpointMeta meta;
  meta.config_text = cfg.to_text();
  NetEntry entry{"classifier", &f.net};
  save_checkpoint(out + "/classifier.ckpt", {entry}, meta);
  cfg.eval.checkpoint = out + "/classifier.ckpt";
  write_run_txt(out, argv, cfg);
  std::cout << "classifier: train top1 " << f.vanilla_train_acc << ", test top1 "
            << f.vanilla_test_acc << "\n"
            << "checkpoint: " << out << "/classifier.ckpt\n";
  return 0;
}

int cmd_train_pgn(CommonOpts& opts, const std::vector<std::string>& argv,
                  const std::vector<std::string>& flag_overrides, bool mode_flag_given) {
  RunConfig cfg = load_config(opts, flag_overrides);
  if (!cfg.mode_explicit && !mode_flag_given) {
    throw ConfigError("cli",
                      "train-pgn requires an explicit mode (--mode enhance|adversarial); "
                      "the two problems invert the objective");
  }
  const std::string out = ensure_out_dir(opts, "train-pgn");
  Pipeline p = build_pipeline(cfg, /*want_pgn_nets=*/true);

  Rng rng(cfg.train.seed);
  const std::vector<MetricsRow> rows =
      train_pgn(p.dataset, p.generator, p.discriminator, p.classifier, cfg.train, {}, &rng);
  export_curves(rows, out + "/curves.csv");

  CheckpointMeta meta;
  meta.config_text = cfg.to_text();
  meta.rng_state = rng.state();
  meta.epochs_completed = cfg.train.epochs;
  NetEntry ge{"generator", &p.generator};
  NetEntry de{"discriminator", &p.discriminator};
  NetEntry ce{"classifier", &p.classifier.net};
  save_checkpoint(out + "/final.ckpt", {ge, de, ce}, meta);

  cfg.eval.checkpoint = out + "/final.ckpt";
  write_run_txt(out, argv, cfg);

  EvalOutcome eo = evaluate_pipeline(p, cfg, /*with_generator=*/true);
  const std::string table = summary_text(eo, cfg, true);
  std::ofstream(fs::path(out) / "summary.txt") << table;
  std::cout << table;
  std::cout << "curves: " << out << "/curves.csv\ncheckpoint: " << out << "/final.ckpt\n";
  return 0;
}

int cmd_evaluate(CommonOpts& opts, const std::vector<std::string>& argv) {
  RunConfig cfg = load_config(opts);
  const std::string out = ensure_out_dir(opts, "evaluate");
  if (cfg.eval.checkpoint.empty()) {
    throw ConfigError("cli", "evaluate requires eval.checkpoint (e.g. --set eval.checkpoint=runs/train-pgn/final.ckpt)");
  }
  // Rebuild networks from the snapshot the checkpoint carries.
  const RunConfig snap = parse_config_text(read_checkpoint_config(cfg.eval.checkpoint));
  RunConfig eff = snap;
  eff.data = cfg.data;
  eff.eval = cfg.eval;

  Pipeline p;
  p.dataset = load_dataset_from_config(eff.data);
  bool has_generator = false;
  for (const std::string& n : checkpoint_tensor_names(eff.eval.checkpoint)) {
    if (n.rfind("generator/", 0) == 0) has_generator = true;
  }
  Rng rng(eff.train.seed);
  Rng gen_rng = rng.fork();
  Rng disc_rng = rng.fork();
  FrozenClassifier& f = p.classifier;
  Rng crng(eff.classifier.seed);
  f.net = build_classifier(eff.classifier.spec, crng);
  std::vector<NetEntry> entries{{"classifier", &f.net}};
  if (has_generator) {
    p.generator = build_generator(eff.generator, gen_rng);
    p.discriminator = build_discriminator(
        eff.discriminator, eff.train.discriminator_init, disc_rng, nullptr);
    entries.push_back({"generator", &p.generator});
    entries.push_back({"discriminator", &p.discriminator});
  }
  load_checkpoint_into(eff.eval.checkpoint, entries);
  f.net.set_frozen(true);
  f.policy = eff.train.access_policy;
  record_vanilla(f, p.dataset);

  EvalOutcome eo = evaluate_pipeline(p, eff, has_generator);
  const std::string table = summary_text(eo, eff, has_generator);
  std::ofstream(fs::path(out) / "summary.txt") << table;
  write_run_txt(out, argv, eff);
  std::cout << table;
  return 0;
}

int cmd_verify_theory(CommonOpts& opts, const std::vector<std::string>& argv,
                      std::uint64_t seed) {
  RunConfig cfg = load_config(opts);
  const std::string out = ensure_out_dir(opts, "verify-theory");
  const TheoryReport report = run_theory_checks(seed);
  const std::string table = render_theory_report(report);
  std::ofstream(fs::path(out) / "theory.txt") << table;
  write_run_txt(out, argv, cfg);
  std::cout << table;
  return report.all_pass ? 0 : 1;
}

int cmd_export_curves(CommonOpts& opts, const std::vector<std::string>& argv,
                      const std::string& from) {
  RunConfig cfg = load_config(opts);
  const std::string out = ensure_out_dir(opts, "export-curves");
  const std::vector<MetricsRow> rows = parse_curves(from);
  export_curves(rows, out + "/curves.csv");
  write_run_txt(out, argv, cfg);
  std::cout << "re-exported " << rows.size() << " rows to " << out << "/curves.csv\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"perturbation generation network (PGN) toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string mode_flag, loss_flag, from;
  double gamma_flag = -1.0, lambda_flag = -1.0;
  std::int64_t seed_flag = -1;
  bool black_box = false;
  std::uint64_t theory_seed = 2024;

  auto add_common = [&opts](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path, "configuration file");
    cmd->add_option("--set", opts.sets, "override, e.g. --set train.gamma=0.01");
    cmd->add_option("--out", opts.out, "output directory");
  };

  CLI::App* gen = app.add_subcommand("gen-synthetic-data", "write the synthetic shapes dataset");
  add_common(gen);
  gen->add_option("--seed", seed_flag, "dataset seed");

  CLI::App* tc = app.add_subcommand("train-classifier", "train and freeze the target classifier");
  add_common(tc);

  CLI::App* tp = app.add_subcommand("train-pgn", "run the alternating PGN training loop");
  add_common(tp);
  tp->add_option("--mode", mode_flag, "enhance|adversarial")
      ->check(CLI::IsMember({"enhance", "adversarial"}));
  tp->add_option("--loss", loss_flag, "ls|ce")->check(CLI::IsMember({"ls", "ce"}));
  tp->add_option("--gamma", gamma_flag, "l1 weight");
  tp->add_option("--lambda", lambda_flag, "perturbation scale");
  tp->add_option("--seed", seed_flag, "training seed");
  tp->add_flag("--black-box", black_box, "label-only classifier access");

  CLI::App* ev = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  add_common(ev);

  CLI::App* vt = app.add_subcommand("verify-theory", "numerical checks of the convergence analysis");
  add_common(vt);
  vt->add_option("--seed", theory_seed, "seed for the random games");

  CLI::App* ec = app.add_subcommand("export-curves", "re-emit a metrics CSV");
  add_common(ec);
  ec->add_option("--from", from, "input curves.csv")->required();

  std::vector<char*> argv;
  std::vector<std::string> storage;
  storage.push_back("pgn");
  storage.insert(storage.end(), args.begin(), args.end());
  argv.reserve(storage.size());
  for (std::string& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) {
      if (seed_flag >= 0) opts.sets.push_back("data.seed=" + std::to_string(seed_flag));
      return cmd_gen_synthetic_data(opts, args);
    }
    if (tc->parsed()) return cmd_train_classifier(opts, args);
    if (tp->parsed()) {
      std::vector<std::string> extra;
      if (!mode_flag.empty()) extra.push_back("train.mode=" + mode_flag);
      if (!loss_flag.empty()) extra.push_back("train.loss=" + loss_flag);
      if (tp->count("--gamma")) extra.push_back("train.gamma=" + std::to_string(gamma_flag));
      if (tp->count("--lambda")) extra.push_back("train.lambda=" + std::to_string(lambda_flag));
      if (seed_flag >= 0) extra.push_back("train.seed=" + std::to_string(seed_flag));
      if (black_box) extra.push_back("train.black_box=true");
      return cmd_train_pgn(opts, args, extra, !mode_flag.empty());
    }
    if (ev->parsed()) return cmd_evaluate(opts, args);
    if (vt->parsed()) return cmd_verify_theory(opts, args, theory_seed);
    if (ec->parsed()) return cmd_export_curves(opts, args, from);
  } catch (const Error& e) {
    std::cerr << "pgn-error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pgn-error: cli: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help();
  return 2;
}

}  // namespace pgn
