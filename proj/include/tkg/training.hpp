#pragma once

#include <array>
#include <functional>
#include <optional>

#include "tkg/model.hpp"

namespace tkg {

// Head order used everywhere: type, source, destination, label.
enum HeadIndex { kTypeHead = 0, kSrcHead = 1, kDstHead = 2, kLabelHead = 3 };

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 5e-4;
  int max_steps = 2000;
  int eval_interval = 100;
  unsigned seed = 0;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  // Stop once the validation metric reaches this value, if set.
  std::optional<double> early_stop_at;

  void validate() const;
};

// Per-head NLL sums over one example's active positions, plus the counts.
struct HeadLossTerms {
  std::array<nn::Var, 4> sums;   // each 1x1; undefined when count == 0
  std::array<long, 4> counts{};  // active positions per head
};

HeadLossTerms head_loss_terms(std::span<const GraphUpdateModel::PositionOutput> outputs);

// Uncertainty-weighted combination: sum_i exp(-s_i) L_i + ln(1 + exp(s_i)),
// with weights a 1x4 parameter row.
nn::Var total_loss(const std::array<nn::Var, 4>& head_means, const nn::Var& weights);

struct BatchLossStats {
  std::array<double, 4> head_means{};  // mean NLL per head (0 when inactive)
  std::array<long, 4> head_counts{};
  double total = 0.0;  // uncertainty-weighted value
};

// Builds the loss over the batch one example at a time, accumulating
// parameter gradients into `grads` when non-null. Gradients and the returned
// value match differentiating the batch-level weighted loss directly.
BatchLossStats batch_loss(GraphUpdateModel& model,
                          std::span<const Datapoint* const> batch,
                          nn::GradMap* grads);

struct TrainLogEntry {
  long step = 0;
  BatchLossStats loss;
  std::optional<double> validation_metric;
};

struct TrainResult {
  std::vector<TrainLogEntry> history;
  long steps_run = 0;
  std::optional<double> best_validation;
  long best_validation_step = -1;
};

// Step-budgeted teacher-forcing training. `validation_fn` (optional) runs at
// eval_interval boundaries; `checkpoint_fn` (optional) is invoked after each
// evaluation with "last"/"best" tags. Throws on a non-finite loss, naming the
// offending step and batch.
TrainResult train(GraphUpdateModel& model, const PreprocessedData& data,
                  const TrainConfig& config,
                  const std::function<double(const GraphUpdateModel&)>& validation_fn = {},
                  const std::function<void(const GraphUpdateModel&, const std::string&)>&
                      checkpoint_fn = {},
                  const std::function<void(const TrainLogEntry&)>& log_fn = {});

}  // namespace tkg
