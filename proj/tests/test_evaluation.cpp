#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support/fixture.hpp"
#include "tkg/evaluation.hpp"

using namespace tkg;

namespace {

// A model that never proposes anything.
class SilentGenerator final : public EventGenerator {
 public:
  std::vector<GraphEvent> step(const Datapoint&, BeliefGraph&) override { return {}; }
};

// Gold replay with the edge events of each step emitted in reverse order.
class ShuffledGoldGenerator final : public EventGenerator {
 public:
  std::vector<GraphEvent> step(const Datapoint& dp, BeliefGraph& graph) override {
    std::vector<GraphEvent> events(dp.target_events.begin() + 1,
                                   dp.target_events.end() - 1);
    std::stable_sort(events.begin(), events.end(),
                     [](const GraphEvent& a, const GraphEvent& b) {
                       bool ae = a.kind == EventKind::EdgeAdd;
                       bool be = b.kind == EventKind::EdgeAdd;
                       return !ae && be;  // node events first, keeps indices valid
                     });
    for (const auto& e : events) apply_event(graph, e, ApplyMode::Lenient);
    return events;
  }
};

PreprocessedData fixture_data(int games = 10) {
  return build_datapoints(
      tkg::testing::make_fixture_dataset({.games = games, .walkthrough_steps = 2,
                                          .random_steps = 4}),
      default_tokenizer(), {});
}

}  // namespace

TEST_CASE("set_f1 conventions") {
  std::set<std::string> ab = {"a", "b"};
  std::set<std::string> bc = {"b", "c"};
  std::set<std::string> none;
  CHECK(set_f1(ab, bc) == doctest::Approx(0.5));
  CHECK(set_f1(ab, ab) == 1.0);
  CHECK(set_f1(none, none) == 1.0);
  CHECK(set_f1(ab, none) == 0.0);
  CHECK(set_f1(none, bc) == 0.0);
  CHECK(set_f1(std::set<std::string>{"x"}, bc) == 0.0);
}

TEST_CASE("gold replay oracle scores 1.0 on both metrics") {
  PreprocessedData data = fixture_data();
  REQUIRE(data.trajectories.size() == 20);

  GoldReplayGenerator oracle;
  MetricScore tf = tf_f1(oracle, data.datapoints);
  CHECK(tf.macro == 1.0);
  CHECK(tf.micro == 1.0);
  CHECK(tf.count == data.datapoints.size());

  MetricScore fr = fr_f1(oracle, data);
  CHECK(fr.macro == 1.0);
  CHECK(fr.micro == 1.0);
  CHECK(fr.count == 20);
}

TEST_CASE("silent model scores zero against nonempty gold") {
  PreprocessedData data = fixture_data(3);
  SilentGenerator silent;

  // Macro TF is the share of datapoints with empty gold command sets.
  std::size_t empty_gold = 0;
  for (const auto& dp : data.datapoints) empty_gold += dp.target_commands.empty();
  MetricScore tf = tf_f1(silent, data.datapoints);
  CHECK(tf.macro == doctest::Approx(static_cast<double>(empty_gold) /
                                    static_cast<double>(data.datapoints.size())));

  MetricScore fr = fr_f1(silent, data);
  CHECK(fr.macro == 0.0);  // every trajectory ends with a nonempty gold graph
}

TEST_CASE("tf_f1 is invariant to event order within a step") {
  PreprocessedData data = fixture_data(4);
  GoldReplayGenerator ordered;
  ShuffledGoldGenerator shuffled;
  MetricScore a = tf_f1(ordered, data.datapoints);
  MetricScore b = tf_f1(shuffled, data.datapoints);
  CHECK(a.macro == b.macro);
  CHECK(a.micro == b.micro);
}

TEST_CASE("multi mode drops the teacher-forced metric and merges colors") {
  auto examples = tkg::testing::make_fixture_dataset({.games = 2});
  // A colored item exercises the split/merge path end to end.
  RawExample colored;
  colored.game_id = "painted";
  colored.observation = "you see a purple potato on the table .";
  colored.previous_action = "look";
  colored.target_commands = {parse_command_or_throw("add ( purple potato , table , on )")};
  examples.push_back(colored);

  PreprocessOptions options;
  options.multi_mode = true;
  PreprocessedData data = build_datapoints(examples, default_tokenizer(), options);

  GoldReplayGenerator oracle;
  EvalReport report = evaluate(oracle, data, /*run_tf=*/true, /*run_fr=*/true);
  CHECK(report.multi_mode);
  CHECK(!report.tf.has_value());
  REQUIRE(report.fr.has_value());
  CHECK(report.fr->macro == 1.0);

  std::string json_text = report_to_json(report);
  CHECK(json_text.find("\"tf_f1\": null") != std::string::npos);
  CHECK(json_text.find("\"fr_f1\"") != std::string::npos);
  CHECK(json_text.find("per_trajectory") != std::string::npos);
}

TEST_CASE("report json carries the breakdown") {
  PreprocessedData data = fixture_data(2);
  GoldReplayGenerator oracle;
  EvalReport report = evaluate(oracle, data, true, true);
  REQUIRE(report.tf.has_value());
  REQUIRE(report.fr.has_value());
  CHECK(report.per_trajectory.size() == data.trajectories.size());
  for (const auto& row : report.per_trajectory) {
    CHECK(row.f1 == 1.0);
    CHECK(row.predicted == row.gold);
    CHECK(row.matched == row.gold);
  }
}
