#include <CLI11.hpp>
#include <exception>
#include <iostream>

#include "commands.hpp"
#include "pipa/version.hpp"

namespace {

void add_config_options(CLI::App* cmd, pipa::cli::ConfigSource& c) {
  cmd->add_option("-c,--config", c.file, "config file of key = value lines")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "override one config key, key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace pipa::cli;
  CLI::App app{"Contrastive domain adaptation for semantic segmentation on synthetic scenes"};
  app.set_version_flag("--version", pipa::kVersion);
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate the source and target datasets");
  add_config_options(gen_cmd, gen.config);
  gen_cmd->add_option("-o,--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "source seed; the target uses seed + 1");
  gen_cmd->add_option("--samples", gen.samples, "samples per domain");
  gen_cmd->add_flag("--force", gen.force, "overwrite an existing dataset");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_config_options(train_cmd, tr.config);
  train_cmd->add_option("-d,--data", tr.data_dir, "dataset directory");
  train_cmd->add_option("-r,--run-dir", tr.run_dir, "run directory");
  train_cmd->add_option("--iterations", tr.iterations, "training steps");
  train_cmd->add_option("--seed", tr.seed, "training seed");
  train_cmd->add_flag("--no-pixel", tr.no_pixel, "disable pixel-wise contrast");
  train_cmd->add_flag("--no-patch", tr.no_patch, "disable patch-wise contrast");
  train_cmd->add_flag("--resume", tr.resume, "continue from the run directory's checkpoint");
  train_cmd->add_flag("--force", tr.force, "discard an existing run in the run directory");
  train_cmd->add_flag("-q,--quiet", tr.quiet, "no progress lines");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("checkpoint", ev.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("-d,--data", ev.data_dir, "dataset directory (default: the one recorded in the checkpoint)");
  eval_cmd->add_option("--split", ev.split, "target-holdout, target or source");
  eval_cmd->add_option("--holdout", ev.holdout, "held-out target fraction");
  eval_cmd->add_option("--json", ev.json_out, "write the machine-readable report here");

  AblateOptions ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "run the contrast or crop-size ablation");
  add_config_options(ablate_cmd, ab.config);
  ablate_cmd->add_option("-d,--data", ab.data_dir, "dataset directory");
  ablate_cmd->add_option("-r,--run-dir", ab.run_dir, "sweep output directory");
  ablate_cmd->add_option("--mode", ab.mode, "contrast or crop-size");
  ablate_cmd->add_option("--seeds", ab.seeds, "number of seeds");
  ablate_cmd->add_option("--first-seed", ab.first_seed, "first training seed");
  ablate_cmd->add_option("--iterations", ab.iterations, "training steps per run");
  ablate_cmd->add_option("--crop-sizes", ab.crop_sizes, "crop sizes for crop-size mode");
  ablate_cmd->add_option("--max-hours", ab.max_hours, "refuse if the time estimate exceeds this");
  ablate_cmd->add_option("--max-disk-mb", ab.max_disk_mb, "refuse if the disk estimate exceeds this");
  ablate_cmd->add_flag("--dry-run", ab.dry_run, "print the estimate and stop");

  GradcheckOptions gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "check contrastive losses against oracles and finite differences");
  grad_cmd->add_option("--tol", gc.tol, "relative gradient tolerance");
  grad_cmd->add_option("--oracle-tol", gc.oracle_tol, "absolute oracle tolerance");
  grad_cmd->add_option("--instances", gc.oracle_instances, "oracle instances per loss");
  grad_cmd->add_option("--grad-instances", gc.gradient_instances, "gradient instances per loss");
  grad_cmd->add_option("--seed", gc.seed, "instance seed");
  grad_cmd->add_flag("--inject-fault", gc.inject_fault, "negate the patch gradient; the check must fail");

  ConfigSource shown;
  auto* config_cmd = app.add_subcommand("config", "print the resolved configuration");
  add_config_options(config_cmd, shown);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen_cmd) return gen_data(gen);
    if (*train_cmd) return train(tr);
    if (*eval_cmd) return eval(ev);
    if (*ablate_cmd) return ablate(ab);
    if (*grad_cmd) return gradcheck(gc);
    if (*config_cmd) return show_config(shown);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}
