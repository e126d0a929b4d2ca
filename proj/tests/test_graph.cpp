#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "support/oracle.hpp"
#include "tkg/graph.hpp"

using namespace tkg;
using tkg::testing::apply_commands_label_level;
using tkg::testing::rebuild_from_events;
using tkg::testing::TripleSet;

namespace {

std::vector<UpdateCommand> cmds(std::initializer_list<const char*> texts) {
  std::vector<UpdateCommand> out;
  for (const char* t : texts) out.push_back(parse_command_or_throw(t));
  return out;
}

std::vector<UpdateCommand> sorted_for_replay(std::vector<UpdateCommand> commands) {
  std::stable_sort(commands.begin(), commands.end(),
                   [](const UpdateCommand& a, const UpdateCommand& b) {
                     bool ad = a.op == UpdateCommand::Op::Delete;
                     bool bd = b.op == UpdateCommand::Op::Delete;
                     if (ad != bd) return ad;
                     return std::tie(a.n1, a.n2, a.r) < std::tie(b.n1, b.n2, b.r);
                   });
  return commands;
}

}  // namespace

TEST_CASE("command string grammar") {
  auto c = parse_command_or_throw("add ( apple , table , on )");
  CHECK(c.op == UpdateCommand::Op::Add);
  CHECK(c.n1 == "apple");
  CHECK(c.n2 == "table");
  CHECK(c.r == "on");

  CHECK(parse_command("delete(exit, kitchen, west_of)").has_value());
  CHECK(parse_command("  add , purple potato , table , on  ").has_value());
  CHECK(parse_command("add , purple potato , table , on")->n1 == "purple potato");
  CHECK(!parse_command("insert ( a , b , r )").has_value());
  CHECK(!parse_command("add ( a , b )").has_value());
  CHECK(!parse_command("add ( a , , r )").has_value());
  CHECK(!parse_command("add a , b , r").has_value());

  CHECK(format_command(c) == "add ( apple , table , on )");
  CHECK(parse_command(format_command(c)) == c);
}

TEST_CASE("apply_event basics") {
  BeliefGraph g;
  apply_event(g, GraphEvent::node_add("apple", {1, 0}), ApplyMode::Strict);
  REQUIRE(g.node_count() == 1);
  CHECK(g.node(0).label == "apple");
  CHECK(g.node(0).added_at == Timestamp{1, 0});

  BeliefGraph before = g;
  apply_event(g, GraphEvent::start({1, 0}), ApplyMode::Strict);
  apply_event(g, GraphEvent::end({1, 1}), ApplyMode::Strict);
  CHECK(g == before);
}

TEST_CASE("node deletion compacts indices and cascades") {
  BeliefGraph g;
  apply_event(g, GraphEvent::node_add("a", {0, 0}), ApplyMode::Strict);
  apply_event(g, GraphEvent::node_add("b", {0, 1}), ApplyMode::Strict);
  apply_event(g, GraphEvent::node_add("c", {0, 2}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(0, 2, "on", {0, 3}), ApplyMode::Strict);
  apply_event(g, GraphEvent::node_delete(1, {0, 4}), ApplyMode::Strict);

  REQUIRE(g.node_count() == 2);
  CHECK(g.node(0).label == "a");
  CHECK(g.node(1).label == "c");
  REQUIRE(g.edge_count() == 1);
  CHECK(g.edge(0).src == 0);
  CHECK(g.edge(0).dst == 1);

  // Compare against a from-scratch rebuild.
  std::vector<GraphEvent> events = {
      GraphEvent::node_add("a", {0, 0}), GraphEvent::node_add("b", {0, 1}),
      GraphEvent::node_add("c", {0, 2}), GraphEvent::edge_add(0, 2, "on", {0, 3}),
      GraphEvent::node_delete(1, {0, 4})};
  CHECK(g == rebuild_from_events(events));

  // Cascade: deleting an endpoint removes the incident edge.
  apply_event(g, GraphEvent::node_delete(0, {0, 5}), ApplyMode::Strict);
  CHECK(g.node_count() == 1);
  CHECK(g.edge_count() == 0);
}

TEST_CASE("strict mode raises, lenient mode ignores") {
  BeliefGraph g;
  apply_event(g, GraphEvent::node_add("a", {0, 0}), ApplyMode::Strict);
  apply_event(g, GraphEvent::node_add("b", {0, 1}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(0, 1, "on", {0, 2}), ApplyMode::Strict);

  CHECK_THROWS(apply_event(g, GraphEvent::node_delete(7, {0, 3}), ApplyMode::Strict));
  CHECK_THROWS(apply_event(g, GraphEvent::edge_add(0, 1, "in", {0, 3}), ApplyMode::Strict));
  CHECK_THROWS(apply_event(g, GraphEvent::edge_delete(1, 0, {0, 3}), ApplyMode::Strict));
  CHECK_THROWS(apply_event(g, GraphEvent::edge_add(0, 5, "on", {0, 3}), ApplyMode::Strict));

  BeliefGraph before = g;
  CHECK(!apply_event(g, GraphEvent::node_delete(7, {0, 3}), ApplyMode::Lenient));
  CHECK(!apply_event(g, GraphEvent::edge_add(0, 1, "in", {0, 3}), ApplyMode::Lenient));
  CHECK(!apply_event(g, GraphEvent::edge_delete(1, 0, {0, 3}), ApplyMode::Lenient));
  CHECK(g == before);

  // Malformed argument presence raises in both modes.
  GraphEvent bad = GraphEvent::node_add("x", {0, 0});
  bad.src = 0;
  CHECK_THROWS(apply_event(g, bad, ApplyMode::Lenient));
  GraphEvent no_label{EventKind::NodeAdd, -1, -1, "", {0, 0}};
  CHECK_THROWS(apply_event(g, no_label, ApplyMode::Strict));
}

TEST_CASE("self loops are allowed") {
  BeliefGraph g;
  apply_event(g, GraphEvent::node_add("pork chop", {0, 0}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(0, 0, "pantry", {0, 1}), ApplyMode::Strict);
  CHECK(g.edge_count() == 1);
  CHECK(g.degree(0) == 1);
}

TEST_CASE("extract_triples") {
  BeliefGraph g;
  CHECK(extract_triples(g).empty());

  apply_event(g, GraphEvent::node_add("apple", {0, 0}), ApplyMode::Strict);
  apply_event(g, GraphEvent::node_add("table", {0, 1}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(0, 1, "on", {0, 2}), ApplyMode::Strict);
  CHECK(extract_triples(g) == TripleSet{{"apple", "table", "on"}});

  // Duplicate label-level triples collapse.
  apply_event(g, GraphEvent::node_add("apple", {0, 3}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(2, 1, "on", {0, 4}), ApplyMode::Strict);
  CHECK(g.edge_count() == 2);
  CHECK(extract_triples(g) == TripleSet{{"apple", "table", "on"}});
  CHECK(extract_triples(g).size() <= static_cast<size_t>(g.edge_count()));
}

TEST_CASE("commands_to_events reuses nodes at label level") {
  BeliefGraph g;
  NodePolicy policy;
  auto events = commands_to_events(
      cmds({"add ( apple , table , on )", "add ( apple , chair , on )"}), g, 1,
      policy);

  REQUIRE(events.size() == 5);
  CHECK(events[0].kind == EventKind::NodeAdd);
  CHECK(events[0].label == "apple");
  CHECK(events[1].kind == EventKind::NodeAdd);
  CHECK(events[1].label == "table");
  CHECK(events[2].kind == EventKind::EdgeAdd);
  CHECK(events[2].src == 0);
  CHECK(events[2].dst == 1);
  CHECK(events[3].kind == EventKind::NodeAdd);
  CHECK(events[3].label == "chair");
  CHECK(events[4].kind == EventKind::EdgeAdd);
  CHECK(events[4].src == 0);
  CHECK(events[4].dst == 2);

  // Sequential event-step stamps within the game step.
  for (size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i].ts == Timestamp{1, static_cast<int>(i)});
  }

  CHECK(extract_triples(g) ==
        TripleSet{{"apple", "table", "on"}, {"apple", "chair", "on"}});
}

TEST_CASE("commands_to_events with no commands") {
  BeliefGraph g;
  NodePolicy policy;
  CHECK(commands_to_events(std::vector<UpdateCommand>{}, g, 0, policy).empty());
  CHECK(g.empty());
}

TEST_CASE("exit labels never reuse nodes") {
  BeliefGraph g;
  NodePolicy policy;
  auto events = commands_to_events(
      cmds({"add ( exit , kitchen , west_of )", "add ( exit , kitchen , east_of )"}),
      g, 0, policy);

  // Hand-built two-exit graph.
  BeliefGraph want;
  apply_event(want, GraphEvent::node_add("exit", {0, 0}), ApplyMode::Strict);
  apply_event(want, GraphEvent::node_add("kitchen", {0, 1}), ApplyMode::Strict);
  apply_event(want, GraphEvent::edge_add(0, 1, "west_of", {0, 2}), ApplyMode::Strict);
  apply_event(want, GraphEvent::node_add("exit", {0, 3}), ApplyMode::Strict);
  apply_event(want, GraphEvent::edge_add(2, 1, "east_of", {0, 4}), ApplyMode::Strict);

  CHECK(g == want);
  CHECK(events.size() == 5);
}

TEST_CASE("state labels from the policy are fresh per attachment") {
  BeliefGraph g;
  NodePolicy policy;
  policy.state_labels = {"sliced"};
  commands_to_events(
      cmds({"add ( apple , sliced , is )", "add ( carrot , sliced , is )"}), g, 0,
      policy);
  int sliced_nodes = 0;
  for (const auto& n : g.nodes()) sliced_nodes += n.label == "sliced";
  CHECK(sliced_nodes == 2);
}

TEST_CASE("delete commands resolve edges and drop orphans") {
  BeliefGraph g;
  NodePolicy policy;
  int counter = 0;
  commands_to_events(cmds({"add ( apple , table , on )"}), g, 0, counter, policy,
                     ApplyMode::Strict);
  counter = 0;
  auto events = commands_to_events(cmds({"delete ( apple , table , on )"}), g, 1,
                                   counter, policy, ApplyMode::Strict);
  CHECK(g.empty());
  REQUIRE(events.size() == 3);
  CHECK(events[0].kind == EventKind::EdgeDelete);
  CHECK(events[1].kind == EventKind::NodeDelete);
  CHECK(events[2].kind == EventKind::NodeDelete);
  // Higher index deleted first.
  CHECK(events[1].src > events[2].src - 1);

  BeliefGraph g2;
  CHECK_THROWS(commands_to_events(cmds({"delete ( a , b , r )"}), g2, 0, policy,
                                  ApplyMode::Strict));
  auto none = commands_to_events(cmds({"delete ( a , b , r )"}), g2, 0, policy,
                                 ApplyMode::Lenient);
  CHECK(none.empty());
}

TEST_CASE("events_to_commands projects edge events") {
  std::vector<GraphEvent> events = {GraphEvent::node_add("apple", {0, 0}),
                                    GraphEvent::node_add("table", {0, 1}),
                                    GraphEvent::edge_add(0, 1, "on", {0, 2})};
  auto commands = events_to_commands(events, BeliefGraph{});
  CHECK(commands ==
        std::set<UpdateCommand>{{UpdateCommand::Op::Add, "apple", "table", "on"}});

  std::vector<GraphEvent> markers = {GraphEvent::start({0, 0}),
                                     GraphEvent::end({0, 1})};
  CHECK(events_to_commands(markers, BeliefGraph{}).empty());
}

TEST_CASE("two same-label nodes project to label-level commands") {
  // The event representation can hold two apples; the command projection
  // collapses them to labels.
  std::vector<GraphEvent> events = {
      GraphEvent::node_add("apple", {0, 0}), GraphEvent::node_add("table", {0, 1}),
      GraphEvent::edge_add(0, 1, "on", {0, 2}), GraphEvent::node_add("apple", {0, 3}),
      GraphEvent::node_add("chair", {0, 4}), GraphEvent::edge_add(2, 3, "on", {0, 5})};
  auto commands = events_to_commands(events, BeliefGraph{});
  CHECK(commands == std::set<UpdateCommand>{
                        {UpdateCommand::Op::Add, "apple", "table", "on"},
                        {UpdateCommand::Op::Add, "apple", "chair", "on"}});

  BeliefGraph replayed = rebuild_from_events(events);
  CHECK(replayed.node_count() == 4);
  CHECK(extract_triples(replayed) ==
        TripleSet{{"apple", "table", "on"}, {"apple", "chair", "on"}});
}

TEST_CASE("events_to_commands reads deleted edge labels before applying") {
  BeliefGraph g;
  apply_event(g, GraphEvent::node_add("apple", {0, 0}), ApplyMode::Strict);
  apply_event(g, GraphEvent::node_add("table", {0, 1}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(0, 1, "on", {0, 2}), ApplyMode::Strict);

  std::vector<GraphEvent> events = {GraphEvent::edge_delete(0, 1, {1, 0})};
  auto commands = events_to_commands(events, g);
  CHECK(commands == std::set<UpdateCommand>{
                        {UpdateCommand::Op::Delete, "apple", "table", "on"}});

  std::vector<GraphEvent> dangling = {GraphEvent::edge_delete(5, 6, {1, 0})};
  CHECK_THROWS(events_to_commands(dangling, g, ApplyMode::Strict));
  CHECK(events_to_commands(dangling, g, ApplyMode::Lenient).empty());
}

TEST_CASE("multi mode splits colored labels into is-attachments") {
  NodePolicy policy;
  policy.multi_mode = true;
  policy.colors = {"purple", "yellow"};

  CHECK(policy.split_colored("purple potato") ==
        std::pair<std::string, std::string>{"purple", "potato"});
  CHECK(!policy.split_colored("potato").has_value());
  CHECK(!policy.split_colored("sliced potato").has_value());

  BeliefGraph g;
  auto events = commands_to_events(
      cmds({"add ( purple potato , table , on )", "add ( yellow potato , chair , on )"}),
      g, 3, policy);

  REQUIRE(events.size() == 10);
  auto expect = [&](int i, EventKind kind, int src, int dst, const std::string& label) {
    CAPTURE(i);
    CHECK(events[i].kind == kind);
    CHECK(events[i].src == src);
    CHECK(events[i].dst == dst);
    CHECK(events[i].label == label);
    CHECK(events[i].ts == Timestamp{3, i});
  };
  expect(0, EventKind::NodeAdd, -1, -1, "potato");
  expect(1, EventKind::NodeAdd, -1, -1, "purple");
  expect(2, EventKind::EdgeAdd, 0, 1, "is");
  expect(3, EventKind::NodeAdd, -1, -1, "table");
  expect(4, EventKind::EdgeAdd, 0, 2, "on");
  expect(5, EventKind::NodeAdd, -1, -1, "potato");
  expect(6, EventKind::NodeAdd, -1, -1, "yellow");
  expect(7, EventKind::EdgeAdd, 3, 4, "is");
  expect(8, EventKind::NodeAdd, -1, -1, "chair");
  expect(9, EventKind::EdgeAdd, 3, 5, "on");

  // Composite reuse: a later command addressing "purple potato" finds the
  // existing food node instead of creating a third potato.
  commands_to_events(cmds({"add ( purple potato , chair , under )"}), g, 4, policy);
  int potatoes = 0;
  for (const auto& n : g.nodes()) potatoes += n.label == "potato";
  CHECK(potatoes == 2);

  // Deleting through the composite label resolves the right edge.
  commands_to_events(cmds({"delete ( purple potato , chair , under )"}), g, 5, policy);
  CHECK(merge_colored_nodes(g, policy.colors) ==
        TripleSet{{"purple potato", "table", "on"}, {"yellow potato", "chair", "on"}});
}

TEST_CASE("merge_colored_nodes") {
  std::set<std::string> colors = {"purple", "yellow"};

  BeliefGraph g;
  apply_event(g, GraphEvent::node_add("potato", {0, 0}), ApplyMode::Strict);
  apply_event(g, GraphEvent::node_add("purple", {0, 1}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(0, 1, "is", {0, 2}), ApplyMode::Strict);
  apply_event(g, GraphEvent::node_add("table", {0, 3}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(0, 2, "on", {0, 4}), ApplyMode::Strict);
  CHECK(merge_colored_nodes(g, colors) == TripleSet{{"purple potato", "table", "on"}});

  // No color edges: identical to extract_triples.
  BeliefGraph plain;
  apply_event(plain, GraphEvent::node_add("apple", {0, 0}), ApplyMode::Strict);
  apply_event(plain, GraphEvent::node_add("fridge", {0, 1}), ApplyMode::Strict);
  apply_event(plain, GraphEvent::edge_add(0, 1, "in", {0, 2}), ApplyMode::Strict);
  CHECK(merge_colored_nodes(plain, colors) == extract_triples(plain));

  // Conflicting colors: earliest attachment wins.
  apply_event(g, GraphEvent::node_add("yellow", {1, 0}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(0, 3, "is", {1, 1}), ApplyMode::Strict);
  CHECK(merge_colored_nodes(g, colors) == TripleSet{{"purple potato", "table", "on"}});
}

TEST_CASE("full colored replay example") {
  NodePolicy policy;
  policy.multi_mode = true;
  policy.colors = {"purple", "yellow"};
  BeliefGraph g;
  auto events = commands_to_events(
      cmds({"add ( purple potato , table , on )", "add ( yellow potato , chair , on )"}),
      g, 0, policy);
  BeliefGraph replayed = rebuild_from_events(events);
  CHECK(replayed == g);
  CHECK(merge_colored_nodes(replayed, policy.colors) ==
        TripleSet{{"purple potato", "table", "on"}, {"yellow potato", "chair", "on"}});
}

TEST_CASE("property: replay equals label-level oracle") {
  tkg::testing::RandomCommandStream stream(20240601);
  NodePolicy policy;
  for (int trial = 0; trial < 200; ++trial) {
    BeliefGraph g;
    TripleSet oracle;
    for (int step = 0; step < 8; ++step) {
      auto commands = sorted_for_replay(stream.next_step(oracle, 4));
      oracle = apply_commands_label_level(oracle, commands);
      commands_to_events(commands, g, step, policy);
      REQUIRE(extract_triples(g) == oracle);

      // Index compaction invariant.
      for (const auto& e : g.edges()) {
        REQUIRE(e.src >= 0);
        REQUIRE(e.src < g.node_count());
        REQUIRE(e.dst >= 0);
        REQUIRE(e.dst < g.node_count());
      }
    }
  }
}

TEST_CASE("property: command round trip per step") {
  tkg::testing::RandomCommandStream stream(777);
  NodePolicy policy;
  for (int trial = 0; trial < 200; ++trial) {
    BeliefGraph g;
    TripleSet state;
    for (int step = 0; step < 6; ++step) {
      auto commands = sorted_for_replay(stream.next_step(state, 3));
      state = apply_commands_label_level(state, commands);
      BeliefGraph before = g;
      auto events = commands_to_events(commands, g, step, policy);
      auto recovered = events_to_commands(events, before);
      REQUIRE(recovered ==
              std::set<UpdateCommand>(commands.begin(), commands.end()));
    }
  }
}

TEST_CASE("dot and json export") {
  BeliefGraph g;
  apply_event(g, GraphEvent::node_add("apple", {1, 0}), ApplyMode::Strict);
  apply_event(g, GraphEvent::node_add("table", {1, 1}), ApplyMode::Strict);
  apply_event(g, GraphEvent::edge_add(0, 1, "on", {1, 2}), ApplyMode::Strict);

  std::string dot = to_dot(g);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("apple") != std::string::npos);
  CHECK(dot.find("n0 -> n1") != std::string::npos);

  BeliefGraph back = graph_from_json(graph_to_json(g));
  CHECK(back == g);

  CHECK_THROWS(graph_from_json("{\"nodes\": [{\"id\": 3, \"label\": \"x\", "
                               "\"added_at\": [0, 0]}], \"edges\": []}"));
}
