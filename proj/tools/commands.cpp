#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "pipa/ablation.hpp"
#include "pipa/checkpoint.hpp"
#include "pipa/data_synth.hpp"
#include "pipa/eval.hpp"
#include "pipa/trainer.hpp"
#include "pipa/verify.hpp"

namespace fs = std::filesystem;

namespace pipa::cli {

ExperimentConfig ConfigSource::resolve() const {
  ExperimentConfig cfg;
  if (file) cfg.merge_file(*file);
  for (const auto& o : overrides) {
    const auto [k, v] = split_assignment(o);
    cfg.set(k, v);
  }
  return cfg;
}

namespace {

bool non_empty_dir(const fs::path& p) { return fs::exists(p) && (!fs::is_directory(p) || !fs::is_empty(p)); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

int gen_data(const GenDataOptions& o) {
  ExperimentConfig cfg = o.config.resolve();
  if (o.seed) {
    cfg.source.seed = *o.seed;
    cfg.target.seed = *o.seed + 1;
  }
  if (o.samples) {
    cfg.source.sample_count = *o.samples;
    cfg.target.sample_count = *o.samples;
  }
  cfg.validate();
  if (non_empty_dir(o.out)) {
    if (!o.force) {
      std::cerr << "error: " << o.out << " exists and is not empty (use --force to overwrite)\n";
      return kValidation;
    }
    for (const char* entry : {"source", "target", "manifest"}) fs::remove_all(o.out / entry);
  }
  const auto manifest = data::write_dataset(o.out, cfg.source, cfg.target);
  std::cout << "wrote " << cfg.source.sample_count << " source and " << cfg.target.sample_count << " target samples to "
            << o.out.string() << "\n";
  for (const char* k : {"source.checksum", "target.checksum"}) {
    if (auto it = manifest.find(k); it != manifest.end()) std::cout << k << " = " << it->second << "\n";
  }
  return kOk;
}

int train(const TrainOptions& o) {
  ExperimentConfig cfg = o.config.resolve();
  if (o.data_dir) cfg.data_dir = *o.data_dir;
  if (o.run_dir) cfg.run_dir = *o.run_dir;
  if (o.iterations) cfg.train.iterations = *o.iterations;
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.no_pixel) cfg.train.enable_pixel = false;
  if (o.no_patch) cfg.train.enable_patch = false;
  cfg.validate();

  const auto ckpt_path = cfg.run_dir / "checkpoint.bin";
  if (fs::exists(ckpt_path) && !o.resume) {
    if (!o.force) {
      std::cerr << "error: " << cfg.run_dir << " already holds a run (use --resume or --force)\n";
      return kValidation;
    }
    for (const char* entry : {"checkpoint.bin", "metrics.jsonl", "config.txt", "run_info.txt", "eval.json"}) {
      fs::remove(cfg.run_dir / entry);
    }
  }

  // Fails on a missing or corrupt dataset before any step runs.
  const auto manifest = data::read_manifest(cfg.data_dir);
  const auto stored = data::spec_from_manifest(manifest, "source");
  if (stored.class_count != cfg.source.class_count) {
    std::cerr << "error: dataset has " << stored.class_count << " classes, config expects " << cfg.source.class_count << "\n";
    return kValidation;
  }
  auto data = std::make_shared<const train::TrainData>(train::load_train_data(cfg.data_dir, cfg.train.holdout_fraction));

  std::optional<train::Trainer> trainer;
  if (o.resume && fs::exists(ckpt_path)) {
    trainer.emplace(train::Trainer::resume(model::load_checkpoint(ckpt_path), cfg.train, data));
    std::cout << "resuming at iteration " << trainer->iteration() << "\n";
  } else {
    trainer.emplace(cfg.model, cfg.train, data);
  }
  train::Trainer::FitOptions fit{cfg.run_dir, cfg.to_text(), {}};
  if (!o.quiet) {
    fit.on_step = [&](std::int64_t it, const train::StepOutcome& out, const std::optional<eval::IoUReport>& ev) {
      if (it % 100 != 0 && !ev && !out.skipped) return;
      const auto& r = out.report;
      std::printf("iter %6lld  total %.4f  ce_s %.4f  ce_t %.4f  pixel %.4f  patch %.4f  lr %.2e%s", static_cast<long long>(it),
                  r.total, r.ce_source, r.ce_target, r.pixel, r.patch, out.learning_rate, out.skipped ? "  (skipped)" : "");
      if (ev) std::printf("  mIoU %.2f", 100.0 * ev->mean);
      std::printf("\n");
      std::fflush(stdout);
    };
  }
  const auto report = trainer->fit(fit);
  if (report) {
    const auto cm = trainer->confusion();
    write_text(cfg.run_dir / "eval.json", eval::report_json(*report, cm));
    std::cout << eval::report_table(*report);
  }
  std::cout << "checkpoint: " << ckpt_path.string() << "\n";
  return kOk;
}

int eval(const EvalOptions& o) {
  const auto ckpt = model::load_checkpoint(o.checkpoint);
  ExperimentConfig cfg;
  if (!ckpt.config_text.empty()) cfg.merge_text(ckpt.config_text, "checkpoint config");
  if (o.data_dir) cfg.data_dir = *o.data_dir;
  const double holdout = o.holdout.value_or(cfg.train.holdout_fraction);
  const auto bundle = model::bundle_from_checkpoint(ckpt);

  std::vector<Sample> samples;
  if (o.split == "target-holdout") {
    samples = train::load_train_data(cfg.data_dir, holdout).target_eval;
  } else if (o.split == "target") {
    samples = data::load_domain(cfg.data_dir, "target");
  } else if (o.split == "source") {
    samples = data::load_domain(cfg.data_dir, "source");
  } else {
    std::cerr << "error: unknown split '" << o.split << "' (target-holdout, target, source)\n";
    return kValidation;
  }
  if (samples.empty()) {
    std::cerr << "error: split '" << o.split << "' is empty\n";
    return kValidation;
  }
  const auto cm = eval::evaluate(bundle.net, samples);
  const auto report = eval::miou(cm);
  std::cout << eval::report_table(report);
  if (o.json_out) write_text(*o.json_out, eval::report_json(report, cm));
  return kOk;
}

int ablate(const AblateOptions& o) {
  ExperimentConfig cfg = o.config.resolve();
  if (o.data_dir) cfg.data_dir = *o.data_dir;
  cfg.run_dir = o.run_dir.value_or(cfg.run_dir.parent_path() / "ablation");
  if (o.iterations) cfg.train.iterations = *o.iterations;
  cfg.validate();
  if (o.seeds < 1) {
    std::cerr << "error: --seeds must be >= 1\n";
    return kValidation;
  }

  ablation::Plan plan;
  if (o.mode == "contrast") {
    plan.variants = ablation::contrast_variants(cfg.train);
  } else if (o.mode == "crop-size") {
    plan.variants = ablation::crop_size_variants(cfg.train, o.crop_sizes);
  } else {
    std::cerr << "error: unknown mode '" << o.mode << "' (contrast, crop-size)\n";
    return kValidation;
  }
  for (int i = 0; i < o.seeds; ++i) plan.seeds.push_back(o.first_seed + static_cast<std::uint64_t>(i));

  auto data = std::make_shared<const train::TrainData>(train::load_train_data(cfg.data_dir, cfg.train.holdout_fraction));
  const auto budget = ablation::estimate_budget(cfg, plan, data);
  std::printf("estimate: %zu runs, %.2f h, %.1f MB\n", plan.variants.size() * plan.seeds.size(), budget.seconds / 3600.0,
              static_cast<double>(budget.bytes) / 1e6);
  if (budget.seconds > o.max_hours * 3600.0 || static_cast<double>(budget.bytes) > o.max_disk_mb * 1e6) {
    std::fprintf(stderr, "error: estimate exceeds budget (--max-hours %.2f, --max-disk-mb %.0f); refusing\n", o.max_hours,
                 o.max_disk_mb);
    return kValidation;
  }
  if (o.dry_run) return kOk;

  const auto result = ablation::run(cfg, plan, data, cfg.run_dir, [](const ablation::RunResult& r) {
    std::printf("%-10s seed %llu  mIoU %.2f  (%.0f s)\n", r.variant.c_str(), static_cast<unsigned long long>(r.seed),
                100.0 * r.miou, r.seconds);
    std::fflush(stdout);
  });
  const std::string table = ablation::format_table(result);
  std::cout << "\n" << table;
  write_text(cfg.run_dir / "table.txt", table);
  write_text(cfg.run_dir / "ablation.json", ablation::to_json(result));
  if (o.mode == "contrast") {
    std::printf("ordering baseline <= {+pixel, +patch} <= pipa held in %d of %zu seeds\n", ablation::ordering_holds(result),
                plan.seeds.size());
  }
  return kOk;
}

int gradcheck(const GradcheckOptions& o) {
  verify::SuiteOptions s;
  s.gradient_tolerance = o.tol;
  s.oracle_tolerance = o.oracle_tol;
  s.oracle_instances = o.oracle_instances;
  s.gradient_instances = o.gradient_instances;
  s.seed = o.seed;
  s.inject_patch_sign_fault = o.inject_fault;
  if (s.oracle_instances < 1 || s.gradient_instances < 1 || !(s.gradient_tolerance > 0) || !(s.oracle_tolerance > 0)) {
    std::cerr << "error: instance counts and tolerances must be positive\n";
    return kValidation;
  }
  if (o.inject_fault) std::cout << "fault injected: analytic patch gradient negated\n";
  bool ok = true;
  for (const auto& c : verify::run_suite(s)) {
    std::printf("%-4s %-15s %4d instances  worst %.3e  tol %.1e  %.2fs\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.instances,
                c.worst, c.tolerance, c.seconds);
    ok = ok && c.passed;
  }
  return ok ? kOk : kVerification;
}

int show_config(const ConfigSource& c) {
  const auto cfg = c.resolve();
  cfg.validate();
  std::cout << cfg.to_text();
  return kOk;
}

}  // namespace pipa::cli
