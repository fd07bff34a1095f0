#include "ugpl/harness/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ugpl/checkpoint.hpp"

namespace ugpl {
namespace {

std::size_t argmax(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void accumulate(LossBreakdown& acc, const LossBreakdown& b, double weight) {
  acc.fused += weight * b.fused;
  acc.global += weight * b.global;
  acc.local += weight * b.local;
  acc.uncertainty += weight * b.uncertainty;
  acc.consistency += weight * b.consistency;
  acc.confidence += weight * b.confidence;
  acc.diversity += weight * b.diversity;
  acc.total += weight * b.total;
}

}  // namespace

std::uint64_t sample_seed(std::uint64_t run_seed, const std::string& purpose, std::size_t epoch, std::size_t index) {
  return Rng(run_seed, purpose + "/" + std::to_string(epoch) + "/" + std::to_string(index)).next_u64();
}

Tensor make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                  const NormalizationStats& stats) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const Shape& s = samples.at(indices.front()).image.shape();
  const std::size_t n = s[0] * s[1];
  Tensor batch(Shape{indices.size(), s[0], s[1], 1});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Tensor& img = samples.at(indices[b]).image;
    if (img.shape() != s) throw ShapeError("make_batch", img.shape(), s);
    for (std::size_t i = 0; i < n; ++i) batch[b * n + i] = (img[i] - stats.mean) / stats.std;
  }
  return batch;
}

Evaluation evaluate_model(UgplModel& model, const RunConfig& config, const Dataset& dataset, Split split) {
  const std::vector<std::size_t>& idx = dataset.indices(split);
  if (idx.empty()) throw std::invalid_argument("evaluate: split '" + to_string(split) + "' is empty");
  const std::size_t classes = model.config().global.num_classes;
  if (dataset.num_classes() != classes) {
    throw std::invalid_argument("evaluate: dataset has " + std::to_string(dataset.num_classes()) +
                                " classes but the model expects " + std::to_string(classes));
  }
  const Shape& s = dataset.samples.at(idx.front()).image.shape();
  if (s[0] != model.config().global.input_height || s[1] != model.config().global.input_width) {
    throw std::invalid_argument("evaluate: image size " + shape_str(s) + " does not match the model input");
  }

  Evaluation ev;
  std::vector<std::size_t> labels, global_preds, local_preds, fused_preds;
  double sum_u = 0.0;
  double sum_w = 0.0;
  const bool has_local = config.ablation != AblationMode::kGlobalOnly;
  for (std::size_t start = 0; start < idx.size(); start += config.batch_size) {
    const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                         idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), start + config.batch_size)));
    std::vector<std::size_t> chunk_labels;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i : chunk) {
      chunk_labels.push_back(dataset.samples[i].label);
      seeds.push_back(sample_seed(config.seed, "eval", 0, i));
    }
    const Prediction pred = model.forward(make_batch(dataset.samples, chunk, dataset.stats), config.ablation, false, seeds);
    const TotalLoss loss = total_loss(loss_terms(pred, chunk_labels, config.ablation), config.loss_weights);
    accumulate(ev.mean_loss, loss.breakdown, static_cast<double>(chunk.size()));

    const Tensor probs = ops::softmax(pred.fused_logits).value();
    const Tensor& zg = pred.global.logits.value();
    const Tensor& zf = pred.fused_logits.value();
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      SampleRecord row;
      row.id = dataset.samples[chunk[b]].id;
      row.label = chunk_labels[b];
      row.global_pred = argmax(zg.data().data() + b * classes, classes);
      row.fused_pred = argmax(zf.data().data() + b * classes, classes);
      if (has_local) row.local_pred = argmax(pred.local.aggregated_logits.value().data().data() + b * classes, classes);
      row.u_g = pred.u_g.value()[b];
      row.w_g = pred.w_g.value()[b];
      row.fused_scores.assign(probs.data().begin() + static_cast<std::ptrdiff_t>(b * classes),
                              probs.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * classes));
      labels.push_back(row.label);
      global_preds.push_back(row.global_pred);
      fused_preds.push_back(row.fused_pred);
      if (row.local_pred) local_preds.push_back(*row.local_pred);
      sum_u += row.u_g;
      sum_w += row.w_g;
      ev.rows.push_back(std::move(row));
    }
  }
  const double n = static_cast<double>(idx.size());
  ev.mean_loss.fused /= n;
  ev.mean_loss.global /= n;
  ev.mean_loss.local /= n;
  ev.mean_loss.uncertainty /= n;
  ev.mean_loss.consistency /= n;
  ev.mean_loss.confidence /= n;
  ev.mean_loss.diversity /= n;
  ev.mean_loss.total /= n;
  ev.mean_loss.weights = config.loss_weights;
  ev.report.fused = classification_metrics(fused_preds, labels, classes);
  ev.report.global = classification_metrics(global_preds, labels, classes);
  if (has_local) ev.report.local = classification_metrics(local_preds, labels, classes);
  ev.report.mean_u_g = sum_u / n;
  ev.report.mean_w_g = sum_w / n;
  ev.report.num_samples = idx.size();
  return ev;
}

Evaluation evaluate_checkpoint(const std::filesystem::path& checkpoint, const RunConfig& config,
                               const Dataset& dataset, Split split) {
  if (dataset.num_classes() != config.model.global.num_classes) {
    throw std::invalid_argument("evaluate: dataset has " + std::to_string(dataset.num_classes()) +
                                " classes but the checkpoint's model has " +
                                std::to_string(config.model.global.num_classes));
  }
  Rng rng(config.seed, "init");
  UgplModel model(config.model, rng);
  load_checkpoint(checkpoint, model.parameters());
  return evaluate_model(model, config, dataset, split);
}

nlohmann::json to_json(const LossBreakdown& b) {
  return {{"fused", b.fused},
          {"global", b.global},
          {"local", b.local},
          {"uncertainty", b.uncertainty},
          {"consistency", b.consistency},
          {"confidence", b.confidence},
          {"diversity", b.diversity},
          {"total", b.total},
          {"weights",
           {{"fused", b.weights.fused},
            {"global", b.weights.global},
            {"local", b.weights.local},
            {"uncertainty", b.weights.uncertainty},
            {"consistency", b.weights.consistency},
            {"confidence", b.weights.confidence},
            {"diversity", b.weights.diversity}}}};
}

void write_metrics_json(const std::filesystem::path& path, const Evaluation& evaluation, Split split) {
  nlohmann::json j = to_json(evaluation.report);
  j["split"] = to_string(split);
  j["loss"] = to_json(evaluation.mean_loss);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_predictions_csv(const std::filesystem::path& path, const Evaluation& evaluation,
                           const std::vector<std::string>& class_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "id,label,global_pred,local_pred,fused_pred,u_g,w_g";
  for (const auto& name : class_names) out << ",score_" << name;
  out << '\n';
  for (const SampleRecord& r : evaluation.rows) {
    out << r.id << ',' << r.label << ',' << r.global_pred << ',' << (r.local_pred ? std::to_string(*r.local_pred) : "")
        << ',' << r.fused_pred << ',' << fmt(r.u_g) << ',' << fmt(r.w_g);
    for (double s : r.fused_scores) out << ',' << fmt(s);
    out << '\n';
  }
}

}  // namespace ugpl
