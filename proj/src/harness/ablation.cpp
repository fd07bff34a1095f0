#include "ugpl/harness/ablation.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace ugpl {
namespace {

AblationRow run_one(const std::string& name, const RunConfig& config, const Dataset& dataset,
                    const std::filesystem::path& dir, std::ostream* progress) {
  if (progress) *progress << "== " << name << std::endl;
  Rng rng(config.seed, "init");
  UgplModel model(config.model, rng);
  const TrainResult tr = train(model, config, dataset, dir, {progress});
  const Evaluation ev = evaluate_model(model, config, dataset, Split::kTest);
  write_metrics_json(dir / "metrics_test.json", ev, Split::kTest);
  write_predictions_csv(dir / "predictions_test.csv", ev, dataset.class_names);
  AblationRow row;
  row.name = name;
  row.mode = config.ablation;
  row.patch_size = config.model.patches.patch_size;
  row.num_patches = config.model.patches.num_patches;
  row.test = ev.report;
  row.best_epoch = tr.best_epoch;
  row.epochs_run = tr.epochs_run;
  row.best_val_loss = tr.best_val_loss;
  row.train_seconds = tr.seconds;
  if (progress) {
    *progress << name << ": fused " << ev.report.fused.accuracy << "  global " << ev.report.global.accuracy
              << "  local " << (ev.report.local ? ev.report.local->accuracy : -1.0) << std::endl;
  }
  return row;
}

}  // namespace

std::vector<AblationRow> run_ablation(const RunConfig& base, const Dataset& dataset, const std::filesystem::path& out_dir,
                                      const AblationOptions& options) {
  base.validate();
  std::vector<AblationRow> rows;
  if (options.modes) {
    for (AblationMode mode : all_ablation_modes()) {
      RunConfig cfg = base;
      cfg.ablation = mode;
      rows.push_back(run_one(to_string(mode), cfg, dataset, out_dir / to_string(mode), options.progress));
    }
  }
  if (options.sweep) {
    for (std::size_t p : {8, 16, 24}) {
      for (std::size_t k : {2, 3, 4}) {
        RunConfig cfg = base;
        cfg.ablation = AblationMode::kFull;
        cfg.model.patches.patch_size = p;
        cfg.model.patches.num_patches = k;
        cfg.model.patches.margin.reset();
        cfg.model.patches.gaussian_sigma.reset();
        const std::string name = "sweep_p" + std::to_string(p) + "_k" + std::to_string(k);
        rows.push_back(run_one(name, cfg, dataset, out_dir / name, options.progress));
      }
    }
  }
  write_ablation_report(out_dir, rows);
  return rows;
}

void write_ablation_report(const std::filesystem::path& out_dir, const std::vector<AblationRow>& rows) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json arr = nlohmann::json::array();
  std::ofstream csv(out_dir / "ablation.csv");
  if (!csv) throw std::runtime_error("cannot write " + (out_dir / "ablation.csv").string());
  csv << "name,mode,patch_size,num_patches,fused_accuracy,fused_macro_f1,global_accuracy,global_macro_f1,"
         "local_accuracy,local_macro_f1,mean_u_g,mean_w_g,best_epoch,epochs_run,best_val_loss\n";
  for (const AblationRow& r : rows) {
    nlohmann::json j{{"name", r.name},
                     {"mode", to_string(r.mode)},
                     {"patch_size", r.patch_size},
                     {"num_patches", r.num_patches},
                     {"test", to_json(r.test)},
                     {"best_epoch", r.best_epoch},
                     {"epochs_run", r.epochs_run},
                     {"best_val_loss", r.best_val_loss},
                     {"train_seconds", r.train_seconds}};
    arr.push_back(j);
    char buf[512];
    const double la = r.test.local ? r.test.local->accuracy : 0.0;
    const double lf = r.test.local ? r.test.local->macro_f1 : 0.0;
    std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%zu,%.6f,%.6f,%.6f,%.6f,%s,%s,%.6f,%.6f,%zu,%zu,%.6f\n", r.name.c_str(),
                  to_string(r.mode).c_str(), r.patch_size, r.num_patches, r.test.fused.accuracy, r.test.fused.macro_f1,
                  r.test.global.accuracy, r.test.global.macro_f1, r.test.local ? std::to_string(la).c_str() : "",
                  r.test.local ? std::to_string(lf).c_str() : "", r.test.mean_u_g, r.test.mean_w_g, r.best_epoch,
                  r.epochs_run, r.best_val_loss);
    csv << buf;
  }
  std::ofstream(out_dir / "ablation.json") << nlohmann::json{{"rows", arr}}.dump(2) << '\n';
}

}  // namespace ugpl
