#include "ugpl/harness/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>

namespace ugpl {
namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "must be a JSON object");
  }

  template <class T>
  void read(const char* key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where() + "'" + key + "' has the wrong type: " + e.what());
    }
  }

  template <class T>
  void read_optional(const char* key, std::optional<T>& out) {
    known_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T value{};
    read(key, value);
    out = value;
  }

  Reader child(const char* key) {
    known_.insert(key);
    static const json empty = json::object();
    return Reader(j_.contains(key) ? j_.at(key) : empty, path_ + key + ".");
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!known_.count(key)) throw ConfigError("unknown config key '" + path_ + key + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config: " : "config '" + path_.substr(0, path_.size() - 1) + "': "; }

  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

}  // namespace

void RunConfig::validate() const {
  try {
    model.validate();
    loss_weights.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (optimizer.kind != "adam") throw ConfigError("optimizer.kind must be 'adam'");
  if (!(optimizer.lr > 0.0) || !std::isfinite(optimizer.lr)) throw ConfigError("optimizer.lr must be a finite value > 0");
  if (!(optimizer.weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (!(optimizer.eps > 0.0)) throw ConfigError("optimizer.eps must be positive");
  if (schedule != "cosine" && schedule != "constant") throw ConfigError("schedule must be 'cosine' or 'constant'");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (early_stopping_patience == 0) throw ConfigError("early_stopping_patience must be >= 1");
  if (augment.max_shift_fraction < 0.0 || augment.brightness < 0.0 || augment.brightness >= 1.0 ||
      augment.contrast < 0.0 || augment.max_rotation_degrees < 0.0 || !(augment.rotation_probability >= 0.0) ||
      augment.rotation_probability > 1.0) {
    throw ConfigError("augment ranges must be non-negative (brightness < 1, rotation_probability <= 1)");
  }
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Reader root(j, "");

  Reader model = root.child("model");
  std::size_t num_classes = c.model.global.num_classes;
  model.read("num_classes", num_classes);
  c.model.global.num_classes = c.model.local.num_classes = c.model.fusion.num_classes = num_classes;

  Reader g = model.child("global");
  g.read("input_height", c.model.global.input_height);
  g.read("input_width", c.model.global.input_width);
  g.read("backbone_channels", c.model.global.backbone_channels);
  g.read("downsample_factor", c.model.global.downsample_factor);
  g.read("feature_dim", c.model.global.feature_dim);
  g.read("evidence_hidden", c.model.global.evidence_hidden);
  g.finish();

  Reader l = model.child("local");
  l.read("encoder_channels", c.model.local.encoder_channels);
  l.read("feature_dim", c.model.local.feature_dim);
  l.read("cls_hidden", c.model.local.cls_hidden);
  l.read("conf_hidden", c.model.local.conf_hidden);
  l.read("epsilon", c.model.local.epsilon);
  l.finish();

  Reader f = model.child("fusion");
  f.read("hidden_dim", c.model.fusion.hidden_dim);
  f.finish();

  Reader p = model.child("patches");
  p.read("patch_size", c.model.patches.patch_size);
  p.read("num_patches", c.model.patches.num_patches);
  p.read_optional("margin", c.model.patches.margin);
  p.read_optional("gaussian_sigma", c.model.patches.gaussian_sigma);
  p.read("diversity_lambda", c.model.patches.diversity_lambda);
  std::string suppression = to_string(c.model.patches.suppression);
  std::string selection = to_string(c.model.patches.selection);
  p.read("suppression", suppression);
  p.read("selection", selection);
  p.finish();
  model.finish();
  try {
    c.model.patches.suppression = suppression_from_string(suppression);
    c.model.patches.selection = selection_from_string(selection);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  Reader w = root.child("loss_weights");
  w.read("fused", c.loss_weights.fused);
  w.read("global", c.loss_weights.global);
  w.read("local", c.loss_weights.local);
  w.read("uncertainty", c.loss_weights.uncertainty);
  w.read("consistency", c.loss_weights.consistency);
  w.read("confidence", c.loss_weights.confidence);
  w.read("diversity", c.loss_weights.diversity);
  w.finish();

  Reader o = root.child("optimizer");
  o.read("kind", c.optimizer.kind);
  o.read("lr", c.optimizer.lr);
  o.read("weight_decay", c.optimizer.weight_decay);
  std::array<double, 2> betas{c.optimizer.beta1, c.optimizer.beta2};
  o.read("betas", betas);
  c.optimizer.beta1 = betas[0];
  c.optimizer.beta2 = betas[1];
  o.read("eps", c.optimizer.eps);
  o.finish();

  Reader a = root.child("augment");
  a.read("enabled", c.augment.enabled);
  a.read("horizontal_flip", c.augment.horizontal_flip);
  a.read("vertical_flip", c.augment.vertical_flip);
  a.read("max_shift_fraction", c.augment.max_shift_fraction);
  a.read("brightness", c.augment.brightness);
  a.read("contrast", c.augment.contrast);
  a.read("max_rotation_degrees", c.augment.max_rotation_degrees);
  a.read("rotation_probability", c.augment.rotation_probability);
  a.finish();

  root.read("schedule", c.schedule);
  root.read("epochs", c.epochs);
  root.read("batch_size", c.batch_size);
  root.read("early_stopping_patience", c.early_stopping_patience);
  root.read("seed", c.seed);
  root.read("deterministic", c.deterministic);
  std::string ablation = to_string(c.ablation);
  root.read("ablation", ablation);
  root.finish();
  try {
    c.ablation = ablation_from_string(ablation);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  const auto& p = c.model.patches;
  return {
      {"model",
       {{"num_classes", c.model.global.num_classes},
        {"global",
         {{"input_height", c.model.global.input_height},
          {"input_width", c.model.global.input_width},
          {"backbone_channels", c.model.global.backbone_channels},
          {"downsample_factor", c.model.global.downsample_factor},
          {"feature_dim", c.model.global.feature_dim},
          {"evidence_hidden", c.model.global.evidence_hidden}}},
        {"local",
         {{"encoder_channels", c.model.local.encoder_channels},
          {"feature_dim", c.model.local.feature_dim},
          {"cls_hidden", c.model.local.cls_hidden},
          {"conf_hidden", c.model.local.conf_hidden},
          {"epsilon", c.model.local.epsilon}}},
        {"fusion", {{"hidden_dim", c.model.fusion.hidden_dim}}},
        {"patches",
         {{"patch_size", p.patch_size},
          {"num_patches", p.num_patches},
          {"margin", p.effective_margin()},
          {"suppression", to_string(p.suppression)},
          {"gaussian_sigma", p.effective_sigma()},
          {"selection", to_string(p.selection)},
          {"diversity_lambda", p.diversity_lambda}}}}},
      {"loss_weights",
       {{"fused", c.loss_weights.fused},
        {"global", c.loss_weights.global},
        {"local", c.loss_weights.local},
        {"uncertainty", c.loss_weights.uncertainty},
        {"consistency", c.loss_weights.consistency},
        {"confidence", c.loss_weights.confidence},
        {"diversity", c.loss_weights.diversity}}},
      {"optimizer",
       {{"kind", c.optimizer.kind},
        {"lr", c.optimizer.lr},
        {"weight_decay", c.optimizer.weight_decay},
        {"betas", {c.optimizer.beta1, c.optimizer.beta2}},
        {"eps", c.optimizer.eps}}},
      {"augment",
       {{"enabled", c.augment.enabled},
        {"horizontal_flip", c.augment.horizontal_flip},
        {"vertical_flip", c.augment.vertical_flip},
        {"max_shift_fraction", c.augment.max_shift_fraction},
        {"brightness", c.augment.brightness},
        {"contrast", c.augment.contrast},
        {"max_rotation_degrees", c.augment.max_rotation_degrees},
        {"rotation_probability", c.augment.rotation_probability}}},
      {"schedule", c.schedule},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"early_stopping_patience", c.early_stopping_patience},
      {"seed", c.seed},
      {"deterministic", c.deterministic},
      {"ablation", to_string(c.ablation)}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  out << to_json(config).dump(2) << '\n';
}

bool apply_env_overrides(RunConfig& config) {
  const char* env = std::getenv("UGPL_SEED");
  if (env == nullptr || *env == '\0') return false;
  try {
    std::size_t used = 0;
    const unsigned long long seed = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    config.seed = seed;
  } catch (const std::exception&) {
    throw ConfigError(std::string("UGPL_SEED must be an unsigned integer, got '") + env + "'");
  }
  return true;
}

double cosine_lr(double lr0, std::size_t epoch, std::size_t total_epochs) {
  if (total_epochs == 0) return lr0;
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return lr0 * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

}  // namespace ugpl
