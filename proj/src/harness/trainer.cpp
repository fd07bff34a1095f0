#include "ugpl/harness/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "ugpl/checkpoint.hpp"
#include "ugpl/data/augment.hpp"

namespace ugpl {
namespace {

std::vector<std::size_t> shuffled(std::vector<std::size_t> v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(v[i - 1], v[j]);
  }
  return v;
}

void add_scaled(LossBreakdown& acc, const LossBreakdown& b, double s) {
  acc.fused += s * b.fused;
  acc.global += s * b.global;
  acc.local += s * b.local;
  acc.uncertainty += s * b.uncertainty;
  acc.consistency += s * b.consistency;
  acc.confidence += s * b.confidence;
  acc.diversity += s * b.diversity;
  acc.total += s * b.total;
  acc.weights = b.weights;
}

}  // namespace

DivergenceError::DivergenceError(std::size_t epoch, std::size_t batch, const std::string& detail)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                         ": " + detail),
      epoch_(epoch),
      batch_(batch) {}

TrainResult train(UgplModel& model, const RunConfig& config, const Dataset& dataset,
                  const std::filesystem::path& out_dir, const TrainOptions& options) {
  config.validate();
  if (dataset.splits.train.empty()) throw std::invalid_argument("train: training split is empty");
  if (dataset.splits.val.empty()) throw std::invalid_argument("train: validation split is empty");
  if (dataset.num_classes() != config.model.global.num_classes) {
    throw std::invalid_argument("train: dataset has " + std::to_string(dataset.num_classes()) +
                                " classes but the config expects " + std::to_string(config.model.global.num_classes));
  }
  std::filesystem::create_directories(out_dir);
  save_run_config(config, out_dir / "config.json");
  std::ofstream step_log(out_dir / "train_log.jsonl");
  std::ofstream epoch_log(out_dir / "epochs.jsonl");
  if (!step_log || !epoch_log) throw std::runtime_error("cannot write logs in " + out_dir.string());

  const auto start = std::chrono::steady_clock::now();
  const nn::ParameterSet params = model.parameters();
  nn::Adam adam(params, config.optimizer.adam());

  TrainResult result;
  result.checkpoint = out_dir / "checkpoint.bin";
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.schedule == "cosine" ? cosine_lr(config.optimizer.lr, epoch, config.epochs) : config.optimizer.lr;
    adam.set_lr(lr);
    Rng order_rng(config.seed, "shuffle/" + std::to_string(epoch));
    const std::vector<std::size_t> order = shuffled(dataset.splits.train, order_rng);

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batches) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<Sample> batch_samples;
      std::vector<std::size_t> labels;
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        Rng aug_rng(config.seed, "augment/" + std::to_string(epoch) + "/" + std::to_string(idx));
        batch_samples.push_back(augment(dataset.samples[idx], aug_rng, config.augment));
        labels.push_back(dataset.samples[idx].label);
        seeds.push_back(sample_seed(config.seed, "train", epoch, idx));
      }
      std::vector<std::size_t> local_idx(batch_samples.size());
      for (std::size_t i = 0; i < local_idx.size(); ++i) local_idx[i] = i;
      const Tensor images = make_batch(batch_samples, local_idx, dataset.stats);

      TotalLoss loss;
      try {
        const Prediction pred = model.forward(images, config.ablation, true, seeds);
        loss = total_loss(loss_terms(pred, labels, config.ablation), config.loss_weights);
      } catch (const NonFiniteError& e) {
        throw DivergenceError(epoch, batches, e.what());
      } catch (const DomainError& e) {
        throw DivergenceError(epoch, batches, e.what());
      }
      if (!std::isfinite(loss.breakdown.total)) {
        throw DivergenceError(epoch, batches, "non-finite total loss");
      }
      params.zero_grad();
      backward(loss.total);
      adam.step();
      ++result.steps;

      add_scaled(record.train_loss, loss.breakdown, 1.0);
      nlohmann::json line{{"epoch", epoch}, {"step", result.steps}, {"batch", batches}, {"lr", lr},
                          {"batch_size", labels.size()}, {"loss", to_json(loss.breakdown)}};
      step_log << line.dump() << '\n';
    }
    const double inv = 1.0 / static_cast<double>(batches);
    LossBreakdown mean;
    add_scaled(mean, record.train_loss, inv);
    mean.weights = config.loss_weights;
    record.train_loss = mean;

    Evaluation val;
    try {
      val = evaluate_model(model, config, dataset, Split::kVal);
    } catch (const NonFiniteError& e) {
      throw DivergenceError(epoch, batches, std::string("validation: ") + e.what());
    } catch (const DomainError& e) {
      throw DivergenceError(epoch, batches, std::string("validation: ") + e.what());
    }
    record.val_loss = val.mean_loss;
    record.val_accuracy = val.report.fused.accuracy;
    if (!std::isfinite(val.mean_loss.total)) throw DivergenceError(epoch, batches, "non-finite validation loss");
    if (val.mean_loss.total < result.best_val_loss) {
      result.best_val_loss = val.mean_loss.total;
      result.best_epoch = epoch;
      record.improved = true;
      stale = 0;
      save_checkpoint(result.checkpoint, params);
    } else {
      ++stale;
    }
    result.history.push_back(record);
    result.epochs_run = epoch + 1;
    nlohmann::json line{{"epoch", epoch},
                        {"lr", lr},
                        {"train_loss", to_json(record.train_loss)},
                        {"val_loss", to_json(record.val_loss)},
                        {"val_accuracy", record.val_accuracy},
                        {"improved", record.improved}};
    epoch_log << line.dump() << '\n';
    step_log.flush();
    epoch_log.flush();
    if (options.progress) {
      *options.progress << "epoch " << epoch + 1 << "/" << config.epochs << "  lr " << lr << "  train "
                        << record.train_loss.total << "  val " << record.val_loss.total << "  val_acc "
                        << record.val_accuracy << (record.improved ? "  *" : "") << std::endl;
    }
    if (stale >= config.early_stopping_patience) {
      result.early_stopped = true;
      break;
    }
  }
  load_checkpoint(result.checkpoint, params);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrainResult train(const RunConfig& config, const Dataset& dataset, const std::filesystem::path& out_dir,
                  const TrainOptions& options) {
  config.validate();
  Rng rng(config.seed, "init");
  UgplModel model(config.model, rng);
  return train(model, config, dataset, out_dir, options);
}

}  // namespace ugpl
