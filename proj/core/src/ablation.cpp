#include "pipa/ablation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <utility>

namespace pipa::ablation {

std::vector<Variant> contrast_variants(const train::TrainConfig& base) {
  return {{"baseline", false, false, base.patch_size},
          {"+pixel", true, false, base.patch_size},
          {"+patch", false, true, base.patch_size},
          {"pipa", true, true, base.patch_size}};
}

std::vector<Variant> crop_size_variants(const train::TrainConfig&, const std::vector<int>& sizes) {
  std::vector<Variant> v;
  for (int s : sizes) v.push_back({"crop-" + std::to_string(s), true, true, s});
  return v;
}

namespace {

ExperimentConfig variant_config(const ExperimentConfig& cfg, const Variant& v, std::uint64_t seed) {
  ExperimentConfig c = cfg;
  c.train.enable_pixel = v.enable_pixel;
  c.train.enable_patch = v.enable_patch;
  c.train.patch_size = v.patch_size;
  c.train.seed = seed;
  c.validate();
  return c;
}

}  // namespace

Budget estimate_budget(const ExperimentConfig& cfg, const Plan& plan, std::shared_ptr<const train::TrainData> data,
                       int probe_steps) {
  Budget b;
  const double evals_per_run = cfg.train.eval_interval > 0 ? cfg.train.iterations / cfg.train.eval_interval + 1 : 1;
  for (const auto& v : plan.variants) {
    ExperimentConfig c = variant_config(cfg, v, plan.seeds.empty() ? 0 : plan.seeds.front());
    train::Trainer t(c.model, c.train, data);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < probe_steps; ++i) t.train_step();
    const double step = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / std::max(1, probe_steps);
    const auto t1 = std::chrono::steady_clock::now();
    if (!data->target_eval.empty()) t.evaluate();
    const double eval = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    const double per_run = step * c.train.iterations + eval * evals_per_run;
    // student + optimizer moments (float values, double slots) + teacher shadow
    const auto params = model::parameter_count(std::as_const(t.bundle()).parameters());
    const std::uintmax_t ckpt = params * (4 + 8 + 8 + 8) + 4096;
    const std::uintmax_t log = static_cast<std::uintmax_t>(c.train.iterations) * 320;
    b.seconds += per_run * static_cast<double>(plan.seeds.size());
    b.bytes += (ckpt + log) * plan.seeds.size();
  }
  return b;
}

double Result::miou(const std::string& variant, std::uint64_t seed) const {
  for (const auto& r : runs) {
    if (r.variant == variant && r.seed == seed) return r.miou;
  }
  throw std::out_of_range("ablation: no run for " + variant + " seed " + std::to_string(seed));
}

std::vector<Summary> Result::summarize() const {
  std::vector<Summary> out;
  for (const auto& v : variants) {
    Summary s{v.name, 0.0, 0.0, 0.0};
    std::vector<double> xs;
    for (auto seed : seeds) xs.push_back(miou(v.name, seed));
    if (xs.empty()) continue;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - s.mean) * (x - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    out.push_back(s);
  }
  for (auto& s : out) s.delta = s.mean - out.front().mean;
  return out;
}

Result run(const ExperimentConfig& cfg, const Plan& plan, std::shared_ptr<const train::TrainData> data,
           const std::filesystem::path& run_root, const Progress& progress) {
  if (plan.variants.empty() || plan.seeds.empty()) throw std::invalid_argument("ablation: need at least one variant and one seed");
  if (data->target_eval.empty()) throw std::invalid_argument("ablation: no held-out target images to evaluate on");
  Result result{plan.variants, plan.seeds, {}};
  for (const auto& v : plan.variants) {
    for (auto seed : plan.seeds) {
      ExperimentConfig c = variant_config(cfg, v, seed);
      c.run_dir = run_root / v.name / ("seed-" + std::to_string(seed));
      const auto t0 = std::chrono::steady_clock::now();
      train::Trainer trainer(c.model, c.train, data);
      const auto report = trainer.fit({c.run_dir, c.to_text(), {}});
      RunResult r{v.name, seed, report ? report->mean : 0.0,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
      result.runs.push_back(r);
      if (progress) progress(r);
    }
  }
  return result;
}

std::string format_table(const Result& result) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s", "variant");
  out += line;
  for (auto seed : result.seeds) {
    std::snprintf(line, sizeof line, " %9s", ("seed " + std::to_string(seed)).c_str());
    out += line;
  }
  out += "   mIoU (mean +- std)   delta\n";
  for (const auto& s : result.summarize()) {
    std::snprintf(line, sizeof line, "%-12s", s.variant.c_str());
    out += line;
    for (auto seed : result.seeds) {
      std::snprintf(line, sizeof line, " %9.2f", 100.0 * result.miou(s.variant, seed));
      out += line;
    }
    std::snprintf(line, sizeof line, "   %7.2f +- %5.2f     %+6.2f\n", 100.0 * s.mean, 100.0 * s.stddev, 100.0 * s.delta);
    out += line;
  }
  return out;
}

std::string to_json(const Result& result) {
  nlohmann::json j;
  j["seeds"] = result.seeds;
  for (const auto& r : result.runs) {
    j["runs"].push_back({{"variant", r.variant}, {"seed", r.seed}, {"miou", r.miou}, {"seconds", r.seconds}});
  }
  for (const auto& s : result.summarize()) {
    j["summary"].push_back({{"variant", s.variant}, {"mean", s.mean}, {"std", s.stddev}, {"delta", s.delta}});
  }
  return j.dump(2);
}

int ordering_holds(const Result& result) {
  int held = 0;
  for (auto seed : result.seeds) {
    const double b = result.miou("baseline", seed);
    const double px = result.miou("+pixel", seed);
    const double pt = result.miou("+patch", seed);
    const double both = result.miou("pipa", seed);
    if (b <= px && b <= pt && px <= both && pt <= both) ++held;
  }
  return held;
}

}  // namespace pipa::ablation
