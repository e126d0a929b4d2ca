#include "tkg/training.hpp"

#include <cmath>
#include <stdexcept>

namespace tkg {

using nn::Var;

void TrainConfig::validate() const {
  if (batch_size <= 0) throw std::runtime_error("train config: batch_size must be positive");
  if (learning_rate <= 0) throw std::runtime_error("train config: learning_rate must be positive");
  if (max_steps < 0) throw std::runtime_error("train config: max_steps must be non-negative");
  if (eval_interval <= 0) throw std::runtime_error("train config: eval_interval must be positive");
}

HeadLossTerms head_loss_terms(
    std::span<const GraphUpdateModel::PositionOutput> outputs) {
  HeadLossTerms terms;
  auto accumulate = [&](int head, const Var& logits, int target) {
    Var nll = nn::nll_row(logits, target);
    if (terms.counts[head] == 0) {
      terms.sums[head] = nll;
    } else {
      terms.sums[head] = nn::add(terms.sums[head], nll);
    }
    ++terms.counts[head];
  };
  for (const auto& out : outputs) {
    accumulate(kTypeHead, out.type_logits, out.type_target);
    if (out.src_logits) accumulate(kSrcHead, *out.src_logits, out.src_target);
    if (out.dst_logits) accumulate(kDstHead, *out.dst_logits, out.dst_target);
    if (out.label_logits) accumulate(kLabelHead, *out.label_logits, out.label_target);
  }
  return terms;
}

Var total_loss(const std::array<Var, 4>& head_means, const Var& weights) {
  Var total = nn::sum_all(nn::softplus(weights));
  for (int h = 0; h < 4; ++h) {
    Var s_h = nn::slice_cols(weights, h, 1);
    Var weighted = nn::mul_scalar(head_means[h], nn::exp(nn::scale(s_h, -1.0)));
    total = nn::add(total, weighted);
  }
  return total;
}

BatchLossStats batch_loss(GraphUpdateModel& model,
                          std::span<const Datapoint* const> batch,
                          nn::GradMap* grads) {
  BatchLossStats stats;

  // Active position counts over the whole batch come first so that each
  // example's contribution can be scaled into a proper mean.
  for (const Datapoint* dp : batch) {
    for (std::size_t k = 1; k < dp->target_events.size(); ++k) {
      ArgMask mask = arg_mask(dp->target_events[k].kind);
      ++stats.head_counts[kTypeHead];
      if (mask.src) ++stats.head_counts[kSrcHead];
      if (mask.dst) ++stats.head_counts[kDstHead];
      if (mask.label) ++stats.head_counts[kLabelHead];
    }
  }

  Var weights = model.loss_weights();
  for (const Datapoint* dp : batch) {
    auto outputs = model.teacher_forward(*dp);
    HeadLossTerms terms = head_loss_terms(outputs);

    Var partial;
    for (int h = 0; h < 4; ++h) {
      if (terms.counts[h] == 0) continue;
      Var mean_piece = nn::scale(terms.sums[h], 1.0 / static_cast<double>(stats.head_counts[h]));
      stats.head_means[h] += mean_piece.item();
      Var s_h = nn::slice_cols(weights, h, 1);
      Var weighted = nn::mul_scalar(mean_piece, nn::exp(nn::scale(s_h, -1.0)));
      partial = partial.defined() ? nn::add(partial, weighted) : weighted;
    }
    if (partial.defined() && grads) backward(partial, *grads);
  }

  Var regularizer = nn::sum_all(nn::softplus(weights));
  if (grads) backward(regularizer, *grads);

  stats.total = regularizer.item();
  for (int h = 0; h < 4; ++h) {
    stats.total += std::exp(-weights.value()(0, h)) * stats.head_means[h];
  }
  return stats;
}

TrainResult train(GraphUpdateModel& model, const PreprocessedData& data,
                  const TrainConfig& config,
                  const std::function<double(const GraphUpdateModel&)>& validation_fn,
                  const std::function<void(const GraphUpdateModel&, const std::string&)>&
                      checkpoint_fn,
                  const std::function<void(const TrainLogEntry&)>& log_fn) {
  config.validate();
  if (data.datapoints.empty()) throw std::runtime_error("train: empty dataset");

  Vocabulary words = model.words();
  Vocabulary labels = model.labels();

  nn::AdamWConfig adam;
  adam.lr = config.learning_rate;
  adam.weight_decay = config.weight_decay;
  adam.clip_norm = config.clip_norm;
  nn::AdamW optimizer(model.params(), adam);

  TrainResult result;
  long step = 0;
  unsigned epoch = 0;
  bool stop = false;

  auto run_validation = [&](TrainLogEntry& entry) {
    if (!validation_fn) return;
    double metric = validation_fn(model);
    entry.validation_metric = metric;
    if (checkpoint_fn) checkpoint_fn(model, "last");
    if (!result.best_validation || metric > *result.best_validation) {
      result.best_validation = metric;
      result.best_validation_step = step;
      if (checkpoint_fn) checkpoint_fn(model, "best");
    }
    if (config.early_stop_at && metric >= *config.early_stop_at) stop = true;
  };

  while (step < config.max_steps && !stop) {
    auto batches = make_batches(data.datapoints, words, labels, config.batch_size,
                                config.seed + epoch);
    ++epoch;
    for (const Batch& batch : batches) {
      if (step >= config.max_steps || stop) break;

      std::vector<const Datapoint*> examples;
      examples.reserve(batch.datapoint_indices.size());
      for (int index : batch.datapoint_indices) {
        examples.push_back(&data.datapoints[index]);
      }

      nn::GradMap grads;
      BatchLossStats stats = batch_loss(model, examples, &grads);
      if (!std::isfinite(stats.total)) {
        throw std::runtime_error("train: non-finite loss at step " +
                                 std::to_string(step) + " (epoch " +
                                 std::to_string(epoch - 1) + ", batch of " +
                                 std::to_string(examples.size()) + ")");
      }
      optimizer.step(grads);
      ++step;

      TrainLogEntry entry;
      entry.step = step;
      entry.loss = stats;
      if (step % config.eval_interval == 0 || step == config.max_steps) {
        run_validation(entry);
      }
      if (log_fn) log_fn(entry);
      result.history.push_back(std::move(entry));
    }
  }

  // Make sure a final state exists even without an eval boundary.
  if (checkpoint_fn) checkpoint_fn(model, "last");
  result.steps_run = step;
  return result;
}

}  // namespace tkg
