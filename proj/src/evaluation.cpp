#include "tkg/evaluation.hpp"

#include "json.hpp"

namespace tkg {

namespace {

using nlohmann::json;

struct MicroCounts {
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  double f1() const {
    if (predicted == 0 && gold == 0) return 1.0;
    if (matched == 0) return 0.0;
    double p = static_cast<double>(matched) / static_cast<double>(predicted);
    double r = static_cast<double>(matched) / static_cast<double>(gold);
    return 2.0 * p * r / (p + r);
  }
};

template <typename T>
std::size_t intersection_size(const std::set<T>& a, const std::set<T>& b) {
  std::size_t hit = 0;
  for (const auto& x : a) hit += b.count(x);
  return hit;
}

}  // namespace

MetricScore tf_f1(EventGenerator& generator, std::span<const Datapoint> datapoints) {
  MetricScore score;
  MicroCounts micro;
  double macro_sum = 0.0;
  for (const Datapoint& dp : datapoints) {
    BeliefGraph prior;
    for (const auto& e : dp.prior_events) apply_event(prior, e, ApplyMode::Strict);

    BeliefGraph working = prior;
    std::vector<GraphEvent> events = generator.step(dp, working);
    std::set<UpdateCommand> predicted =
        events_to_commands(events, prior, ApplyMode::Lenient);
    std::set<UpdateCommand> gold(dp.target_commands.begin(), dp.target_commands.end());

    macro_sum += set_f1(predicted, gold);
    micro.matched += intersection_size(predicted, gold);
    micro.predicted += predicted.size();
    micro.gold += gold.size();
    ++score.count;
  }
  score.macro = score.count ? macro_sum / static_cast<double>(score.count) : 1.0;
  score.micro = micro.f1();
  return score;
}

MetricScore fr_f1(EventGenerator& generator, const PreprocessedData& data,
                  std::vector<TrajectoryScore>* breakdown) {
  MetricScore score;
  MicroCounts micro;
  double macro_sum = 0.0;
  for (const Trajectory& trajectory : data.trajectories) {
    BeliefGraph belief;
    for (int index : trajectory.datapoint_indices) {
      generator.step(data.datapoints[index], belief);
    }

    // Gold final state: replay of the last step's prior plus its targets.
    const Datapoint& last = data.datapoints[trajectory.datapoint_indices.back()];
    BeliefGraph gold_graph;
    for (const auto& e : last.prior_events) apply_event(gold_graph, e, ApplyMode::Strict);
    for (std::size_t i = 1; i + 1 < last.target_events.size(); ++i) {
      apply_event(gold_graph, last.target_events[i], ApplyMode::Strict);
    }

    std::set<RdfTriple> predicted = data.multi_mode
                                        ? merge_colored_nodes(belief, data.policy.colors)
                                        : extract_triples(belief);
    std::set<RdfTriple> gold = data.multi_mode
                                   ? merge_colored_nodes(gold_graph, data.policy.colors)
                                   : extract_triples(gold_graph);

    double f1 = set_f1(predicted, gold);
    macro_sum += f1;
    std::size_t hit = intersection_size(predicted, gold);
    micro.matched += hit;
    micro.predicted += predicted.size();
    micro.gold += gold.size();
    ++score.count;
    if (breakdown) {
      breakdown->push_back({trajectory.game_id, trajectory.walkthrough_step, f1,
                            predicted.size(), gold.size(), hit});
    }
  }
  score.macro = score.count ? macro_sum / static_cast<double>(score.count) : 1.0;
  score.micro = micro.f1();
  return score;
}

EvalReport evaluate(EventGenerator& generator, const PreprocessedData& data,
                    bool run_tf, bool run_fr) {
  EvalReport report;
  report.multi_mode = data.multi_mode;
  report.datapoint_count = data.datapoints.size();
  report.trajectory_count = data.trajectories.size();
  if (run_tf && !data.multi_mode) {
    report.tf = tf_f1(generator, data.datapoints);
  }
  if (run_fr) {
    report.fr = fr_f1(generator, data, &report.per_trajectory);
  }
  return report;
}

std::string report_to_json(const EvalReport& report, int indent) {
  json j;
  j["schema_version"] = 1;
  j["multi_mode"] = report.multi_mode;
  j["counts"] = {{"datapoints", report.datapoint_count},
                 {"trajectories", report.trajectory_count}};
  if (report.tf) {
    j["tf_f1"] = {{"macro", report.tf->macro},
                  {"micro", report.tf->micro},
                  {"datapoints", report.tf->count}};
  } else {
    j["tf_f1"] = nullptr;  // not applicable in multi mode
  }
  if (report.fr) {
    j["fr_f1"] = {{"macro", report.fr->macro},
                  {"micro", report.fr->micro},
                  {"trajectories", report.fr->count}};
  } else {
    j["fr_f1"] = nullptr;
  }
  json rows = json::array();
  for (const auto& row : report.per_trajectory) {
    rows.push_back({{"game_id", row.game_id},
                    {"walkthrough_step", row.walkthrough_step},
                    {"f1", row.f1},
                    {"predicted", row.predicted},
                    {"gold", row.gold},
                    {"matched", row.matched}});
  }
  j["per_trajectory"] = rows;
  return j.dump(indent);
}

}  // namespace tkg
