#include "ugpl/harness/gradcheck_suite.hpp"

#include <array>
#include <chrono>
#include <functional>

#include "ugpl/data/dataset.hpp"

namespace ugpl {

UgplConfig gradcheck_model_config() {
  UgplConfig c;
  c.global.input_height = 32;
  c.global.input_width = 32;
  c.global.num_classes = 3;
  c.global.backbone_channels = {4, 6};
  c.global.downsample_factor = 4;
  c.global.feature_dim = 6;
  c.global.evidence_hidden = 4;
  c.local.num_classes = 3;
  c.local.encoder_channels = {3, 4, 4, 5};
  c.local.feature_dim = 5;
  c.local.cls_hidden = 4;
  c.local.conf_hidden = 3;
  c.fusion.num_classes = 3;
  c.fusion.hidden_dim = 4;
  c.patches.patch_size = 16;
  c.patches.num_patches = 2;
  return c;
}

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckOptions& options, std::uint64_t seed) {
  const UgplConfig config = gradcheck_model_config();
  Rng rng(seed, "gradcheck/init");
  UgplModel model(config, rng);

  SyntheticConfig synth;
  synth.height = config.global.input_height;
  synth.width = config.global.input_width;
  synth.seed = seed;
  const Sample sample = synthesize_sample(synth, 1, 0);
  const Tensor images =
      normalize(sample.image, compute_stats({sample}, {0})).reshaped(Shape{1, synth.height, synth.width, 1});
  const std::array<std::size_t, 1> labels{sample.label};
  const std::array<std::uint64_t, 1> seeds{seed};

  const nn::ParameterSet params = model.parameters();
  const std::vector<NamedVar>& inputs = params.params();

  using Pick = std::function<Var(const LossTerms&)>;
  const LossWeights weights = LossWeights::baseline();
  const std::vector<std::pair<std::string, Pick>> cases{
      {"fused", [](const LossTerms& t) { return t.fused; }},
      {"global", [](const LossTerms& t) { return t.global; }},
      {"local", [](const LossTerms& t) { return t.local; }},
      {"uncertainty", [](const LossTerms& t) { return t.uncertainty; }},
      {"consistency", [](const LossTerms& t) { return t.consistency; }},
      {"confidence", [](const LossTerms& t) { return t.confidence; }},
      {"diversity", [](const LossTerms& t) { return t.diversity; }},
      {"total", [&weights](const LossTerms& t) { return total_loss(t, weights).total; }},
  };

  std::vector<GradCheckCase> out;
  for (const auto& [name, pick] : cases) {
    const auto start = std::chrono::steady_clock::now();
    auto loss = [&, pick = pick] {
      const Prediction pred = model.forward(images, AblationMode::kFull, true, seeds);
      return pick(loss_terms(pred, labels, AblationMode::kFull));
    };
    GradCheckCase c;
    c.name = name;
    c.report = grad_check(loss, inputs, options);
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace ugpl
