#pragma once

#include <set>
#include <string>
#include <vector>

#include "tkg/model.hpp"

namespace tkg {

// Set F1 with the conventions: both empty -> 1, exactly one empty -> 0.
template <typename T>
double set_f1(const std::set<T>& predicted, const std::set<T>& gold) {
  if (predicted.empty() && gold.empty()) return 1.0;
  if (predicted.empty() || gold.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& p : predicted) hit += gold.count(p);
  if (hit == 0) return 0.0;
  double precision = static_cast<double>(hit) / static_cast<double>(predicted.size());
  double recall = static_cast<double>(hit) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

// A per-step event source: the trained model, or a gold replay used as the
// pipeline oracle. Implementations apply their own events to `graph`.
class EventGenerator {
 public:
  virtual ~EventGenerator() = default;
  virtual std::vector<GraphEvent> step(const Datapoint& dp, BeliefGraph& graph) = 0;
};

class ModelGenerator final : public EventGenerator {
 public:
  explicit ModelGenerator(const GraphUpdateModel& model) : model_(&model) {}
  std::vector<GraphEvent> step(const Datapoint& dp, BeliefGraph& graph) override {
    return model_->generate(dp.obs_tokens, dp.action_tokens, graph, dp.t_g);
  }

 private:
  const GraphUpdateModel* model_;
};

// Replays the recorded target events; drives every metric to 1.0 by
// construction and validates the conversion/extraction path end to end.
class GoldReplayGenerator final : public EventGenerator {
 public:
  std::vector<GraphEvent> step(const Datapoint& dp, BeliefGraph& graph) override {
    std::vector<GraphEvent> events(dp.target_events.begin() + 1,
                                   dp.target_events.end() - 1);
    for (const auto& e : events) apply_event(graph, e, ApplyMode::Strict);
    return events;
  }
};

struct MetricScore {
  double macro = 0.0;
  double micro = 0.0;
  std::size_t count = 0;
};

struct TrajectoryScore {
  std::string game_id;
  int walkthrough_step = 0;
  double f1 = 0.0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t matched = 0;
};

struct EvalReport {
  bool multi_mode = false;
  std::optional<MetricScore> tf;  // absent in multi mode
  std::optional<MetricScore> fr;
  std::vector<TrajectoryScore> per_trajectory;
  std::size_t datapoint_count = 0;
  std::size_t trajectory_count = 0;
};

// Teacher-forced command-level F1: generation conditioned on the gold prior
// graph of every datapoint, converted to commands and compared as sets.
MetricScore tf_f1(EventGenerator& generator, std::span<const Datapoint> datapoints);

// Free-run triple-level F1 per trajectory: generation from the empty graph
// with no ground-truth injection, final triples against the gold final graph
// (color-merged in multi mode).
MetricScore fr_f1(EventGenerator& generator, const PreprocessedData& data,
                  std::vector<TrajectoryScore>* breakdown = nullptr);

EvalReport evaluate(EventGenerator& generator, const PreprocessedData& data,
                    bool run_tf, bool run_fr);

std::string report_to_json(const EvalReport& report, int indent = 2);

}  // namespace tkg
