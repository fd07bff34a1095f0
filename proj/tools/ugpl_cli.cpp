#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ugpl/data/dataset.hpp"
#include "ugpl/data/pgm.hpp"
#include "ugpl/harness/ablation.hpp"
#include "ugpl/harness/gradcheck_suite.hpp"
#include "ugpl/harness/trainer.hpp"

namespace fs = std::filesystem;
using namespace ugpl;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig config_or_default(const std::string& path) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  apply_env_overrides(cfg);
  cfg.validate();
  return cfg;
}

Dataset load_for(const RunConfig& cfg, const fs::path& dir) {
  LoadOptions lo;
  lo.height = cfg.model.global.input_height;
  lo.width = cfg.model.global.input_width;
  return load_dataset(dir, lo);
}

int cmd_synth(const fs::path& out, std::size_t per_class, std::uint64_t seed, std::size_t size) {
  SyntheticConfig sc;
  sc.samples_per_class = per_class;
  sc.seed = seed;
  sc.height = sc.width = size;
  const Dataset d = make_synthetic_dataset(sc);
  write_dataset(d, out);
  std::cout << "wrote " << d.samples.size() << " samples (" << d.splits.train.size() << " train, "
            << d.splits.val.size() << " val, " << d.splits.test.size() << " test) to " << out.string() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const fs::path& data, const fs::path& out, bool deterministic) {
  RunConfig cfg = config_or_default(config_path);
  if (deterministic) cfg.deterministic = true;
  const Dataset d = load_for(cfg, data);
  Rng rng(cfg.seed, "init");
  UgplModel model(cfg.model, rng);
  const TrainResult tr = train(model, cfg, d, out, {&std::cerr});
  const Evaluation ev = evaluate_model(model, cfg, d, Split::kTest);
  write_metrics_json(out / "metrics.json", ev, Split::kTest);
  write_predictions_csv(out / "predictions.csv", ev, d.class_names);
  std::cout << "best epoch " << tr.best_epoch + 1 << " of " << tr.epochs_run << ", val loss " << tr.best_val_loss
            << "; test accuracy " << ev.report.fused.accuracy << " (global " << ev.report.global.accuracy;
  if (ev.report.local) std::cout << ", local " << ev.report.local->accuracy;
  std::cout << ")\ncheckpoint: " << tr.checkpoint.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data, const std::string& split_name, std::string config_path,
             fs::path out) {
  const Split split = split_from_string(split_name);
  if (config_path.empty()) {
    const fs::path sibling = checkpoint.parent_path() / "config.json";
    if (!fs::exists(sibling)) throw UsageError("no --config given and no config.json next to the checkpoint");
    config_path = sibling.string();
  }
  const RunConfig cfg = config_or_default(config_path);
  const Dataset d = load_for(cfg, data);
  const Evaluation ev = evaluate_checkpoint(checkpoint, cfg, d, split);
  if (out.empty()) out = checkpoint.parent_path();
  fs::create_directories(out);
  write_metrics_json(out / ("metrics_" + split_name + ".json"), ev, split);
  write_predictions_csv(out / ("predictions_" + split_name + ".csv"), ev, d.class_names);
  nlohmann::json j = to_json(ev.report);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const fs::path& data, const fs::path& out, bool sweep, bool sweep_only) {
  const RunConfig cfg = config_or_default(config_path);
  const Dataset d = load_for(cfg, data);
  AblationOptions opt;
  opt.sweep = sweep || sweep_only;
  opt.modes = !sweep_only;
  opt.progress = &std::cerr;
  const auto rows = run_ablation(cfg, d, out, opt);
  std::printf("%-16s %6s %3s %9s %9s %9s\n", "run", "P", "K", "fused", "global", "local");
  for (const auto& r : rows) {
    std::printf("%-16s %6zu %3zu %9.4f %9.4f %9s\n", r.name.c_str(), r.patch_size, r.num_patches, r.test.fused.accuracy,
                r.test.global.accuracy, r.test.local ? std::to_string(r.test.local->accuracy).c_str() : "-");
  }
  std::cout << "report: " << (out / "ablation.json").string() << "\n";
  return 0;
}

int cmd_gradcheck(double tol, std::size_t sample) {
  GradCheckOptions opt;
  opt.tol = tol;
  opt.max_elements_per_input = sample;
  bool ok = true;
  for (const auto& c : run_gradcheck_suite(opt)) {
    const bool pass = c.report.passed();
    ok = ok && pass;
    std::printf("%-12s %s  checked %5zu  max_rel %.3e  failures %zu  non_finite %zu  (%.1fs)\n", c.name.c_str(),
                pass ? "PASS" : "FAIL", c.report.entries.size(), c.report.max_rel_error, c.report.failures,
                c.report.non_finite, c.seconds);
  }
  std::printf("%s\n", ok ? "all components pass" : "gradient check FAILED");
  return ok ? 0 : kRuntimeError;
}

int cmd_extract(const fs::path& image_path, const fs::path& map_path, const std::string& config_path, const fs::path& out,
                std::uint64_t seed) {
  const RunConfig cfg = config_or_default(config_path);
  const Tensor image = read_pgm(image_path);
  const Tensor map = read_pgm(map_path);
  Rng rng(seed, "extract-patches");
  const PatchSet set = extract_patches(image.reshaped(Shape{image.dim(0), image.dim(1), 1}), map, cfg.model.patches, rng);
  fs::create_directories(out);
  std::ofstream csv(out / "coords.csv");
  csv << "k,x,y,score,fallback\n";
  for (std::size_t k = 0; k < set.coords.size(); ++k) {
    write_pgm(out / ("patch_" + std::to_string(k) + ".pgm"), set.patches[k]);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%.17g,%d\n", k, set.coords[k].x, set.coords[k].y, set.scores[k],
                  set.fallback_used[k] ? 1 : 0);
    csv << buf;
  }
  std::cout << "wrote " << set.coords.size() << " patches to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-guided patch learning: synthetic data, training, evaluation, ablations"};
  app.require_subcommand(1);

  fs::path synth_out;
  std::size_t per_class = 100;
  std::uint64_t synth_seed = 0;
  std::size_t synth_size = 64;
  auto* synth = app.add_subcommand("synth", "generate the synthetic 3-class dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--per-class", per_class, "samples per class")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--size", synth_size, "image height and width")->check(CLI::PositiveNumber);

  std::string train_config;
  fs::path train_data, train_out;
  bool deterministic = false;
  auto* train_cmd = app.add_subcommand("train", "train a model and evaluate it on the test split");
  train_cmd->add_option("--config", train_config, "run config JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--data", train_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_flag("--deterministic", deterministic, "force sequential, bit-reproducible execution");

  fs::path eval_ckpt, eval_data, eval_out;
  std::string eval_split = "test";
  std::string eval_config;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--split", eval_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--config", eval_config, "run config (default: config.json beside the checkpoint)")
      ->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "report directory (default: checkpoint directory)");

  std::string ablate_config;
  fs::path ablate_data, ablate_out;
  bool sweep = false;
  bool sweep_only = false;
  auto* ablate = app.add_subcommand("ablate", "run the four ablation modes and optionally the patch sweep");
  ablate->add_option("--config", ablate_config, "base run config JSON")->check(CLI::ExistingFile);
  ablate->add_option("--data", ablate_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ablate->add_option("--out", ablate_out, "output directory")->required();
  ablate->add_flag("--sweep", sweep, "also sweep P in {8,16,24} x K in {2,3,4}");
  ablate->add_flag("--sweep-only", sweep_only, "run only the patch sweep");

  double tol = 1e-4;
  std::size_t sample = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss component");
  gradcheck->add_option("--tol", tol, "relative error tolerance")->check(CLI::PositiveNumber);
  gradcheck->add_option("--sample", sample, "check a seeded subset of this many elements per tensor (0 = all)");

  fs::path ex_image, ex_map, ex_out;
  std::string ex_config;
  std::uint64_t ex_seed = 0;
  auto* extract = app.add_subcommand("extract-patches", "run patch extraction on an image and uncertainty map");
  extract->add_option("--image", ex_image, "image PGM")->required()->check(CLI::ExistingFile);
  extract->add_option("--map", ex_map, "uncertainty map PGM")->required()->check(CLI::ExistingFile);
  extract->add_option("--config", ex_config, "run config JSON (model.patches is used)")->check(CLI::ExistingFile);
  extract->add_option("--out", ex_out, "output directory")->required();
  extract->add_option("--seed", ex_seed, "seed for fallback draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*synth) return cmd_synth(synth_out, per_class, synth_seed, synth_size);
    if (*train_cmd) return cmd_train(train_config, train_data, train_out, deterministic);
    if (*eval) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_config, eval_out);
    if (*ablate) return cmd_ablate(ablate_config, ablate_data, ablate_out, sweep, sweep_only);
    if (*gradcheck) return cmd_gradcheck(tol, sample);
    if (*extract) return cmd_extract(ex_image, ex_map, ex_config, ex_out, ex_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
