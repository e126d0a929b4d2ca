// Python bindings for the graph-event core and model inference.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tkg/checkpoint.hpp"
#include "tkg/evaluation.hpp"
#include "tkg/tokenizer.hpp"

namespace py = pybind11;
using namespace tkg;

namespace {

NodePolicy make_policy(bool multi, const std::optional<std::set<std::string>>& colors,
                       const std::optional<std::set<std::string>>& exit_labels,
                       const std::optional<std::set<std::string>>& state_labels) {
  NodePolicy policy;
  policy.multi_mode = multi;
  if (colors) policy.colors = *colors;
  if (exit_labels) policy.exit_labels = *exit_labels;
  if (state_labels) policy.state_labels = *state_labels;
  return policy;
}

std::vector<std::tuple<std::string, std::string, std::string>> triples_to_py(
    const std::set<RdfTriple>& triples) {
  std::vector<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& t : triples) out.emplace_back(t.subject, t.object, t.relation);
  return out;
}

std::vector<UpdateCommand> parse_commands(const std::vector<std::string>& texts) {
  std::vector<UpdateCommand> out;
  for (const auto& t : texts) out.push_back(parse_command_or_throw(t));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "dynamic knowledge graphs from text-game observations";

  py::enum_<EventKind>(m, "EventKind")
      .value("END", EventKind::End)
      .value("START", EventKind::Start)
      .value("NODE_ADD", EventKind::NodeAdd)
      .value("NODE_DELETE", EventKind::NodeDelete)
      .value("EDGE_ADD", EventKind::EdgeAdd)
      .value("EDGE_DELETE", EventKind::EdgeDelete);

  py::class_<Timestamp>(m, "Timestamp")
      .def(py::init<int, int>(), py::arg("game") = 0, py::arg("event") = 0)
      .def_readwrite("game", &Timestamp::game)
      .def_readwrite("event", &Timestamp::event)
      .def("__eq__", [](const Timestamp& a, const Timestamp& b) { return a == b; })
      .def("__repr__", [](const Timestamp& t) {
        return "Timestamp(" + std::to_string(t.game) + ", " + std::to_string(t.event) + ")";
      });

  py::class_<GraphEvent>(m, "GraphEvent")
      .def(py::init([](const std::string& kind, int src, int dst,
                       const std::string& label, int t_g, int t_e) {
             auto parsed = event_kind_from_string(kind);
             if (!parsed) throw std::invalid_argument("unknown event kind: " + kind);
             return GraphEvent{*parsed, src, dst, label, {t_g, t_e}};
           }),
           py::arg("kind"), py::arg("src") = -1, py::arg("dst") = -1,
           py::arg("label") = "", py::arg("t_g") = 0, py::arg("t_e") = 0)
      .def_property_readonly("kind",
                             [](const GraphEvent& e) { return std::string(to_string(e.kind)); })
      .def_readwrite("src", &GraphEvent::src)
      .def_readwrite("dst", &GraphEvent::dst)
      .def_readwrite("label", &GraphEvent::label)
      .def_readwrite("ts", &GraphEvent::ts)
      .def("__eq__", [](const GraphEvent& a, const GraphEvent& b) { return a == b; })
      .def("__repr__", [](const GraphEvent& e) {
        std::string out = std::string("GraphEvent(") + to_string(e.kind);
        if (e.src >= 0) out += ", src=" + std::to_string(e.src);
        if (e.dst >= 0) out += ", dst=" + std::to_string(e.dst);
        if (!e.label.empty()) out += ", label='" + e.label + "'";
        out += ", ts=[" + std::to_string(e.ts.game) + "," + std::to_string(e.ts.event) + "])";
        return out;
      });

  m.def("well_formed", &well_formed, py::arg("event"),
        "argument presence matches the event kind");

  py::class_<BeliefGraph>(m, "BeliefGraph")
      .def(py::init<>())
      .def_property_readonly("node_count", &BeliefGraph::node_count)
      .def_property_readonly("edge_count", &BeliefGraph::edge_count)
      .def("node_labels",
           [](const BeliefGraph& g) {
             std::vector<std::string> out;
             for (const auto& n : g.nodes()) out.push_back(n.label);
             return out;
           })
      .def("apply",
           [](BeliefGraph& g, const GraphEvent& e, bool lenient) {
             return apply_event(g, e, lenient ? ApplyMode::Lenient : ApplyMode::Strict);
           },
           py::arg("event"), py::arg("lenient") = false,
           "apply one event in place; returns True if the graph changed")
      .def("triples", [](const BeliefGraph& g) { return triples_to_py(extract_triples(g)); })
      .def("merge_colored",
           [](const BeliefGraph& g, const std::set<std::string>& colors) {
             return triples_to_py(merge_colored_nodes(g, colors));
           },
           py::arg("colors"))
      .def("to_dot", &to_dot)
      .def("to_json", [](const BeliefGraph& g) { return graph_to_json(g); })
      .def_static("from_json", &graph_from_json, py::arg("text"))
      .def("__eq__", [](const BeliefGraph& a, const BeliefGraph& b) { return a == b; })
      .def("__len__", &BeliefGraph::node_count);

  m.def("tokenize",
        [](const std::string& text) { return default_tokenizer().tokenize(text); },
        py::arg("text"));

  m.def("parse_command",
        [](const std::string& text) {
          UpdateCommand c = parse_command_or_throw(text);
          return py::make_tuple(c.op == UpdateCommand::Op::Add ? "add" : "delete", c.n1,
                                c.n2, c.r);
        },
        py::arg("text"));

  m.def("sort_commands",
        [](const std::vector<std::string>& texts) {
          std::vector<std::string> out;
          for (const auto& c : sort_commands(parse_commands(texts))) {
            out.push_back(format_command(c));
          }
          return out;
        },
        py::arg("commands"), "deletes first, then adds, lexicographic within groups");

  m.def("commands_to_events",
        [](const std::vector<std::string>& commands, BeliefGraph& graph, int t_g,
           bool lenient, bool multi, const std::optional<std::set<std::string>>& colors,
           const std::optional<std::set<std::string>>& exit_labels,
           const std::optional<std::set<std::string>>& state_labels) {
          NodePolicy policy = make_policy(multi, colors, exit_labels, state_labels);
          return commands_to_events(parse_commands(commands), graph, t_g, policy,
                                    lenient ? ApplyMode::Lenient : ApplyMode::Strict);
        },
        py::arg("commands"), py::arg("graph"), py::arg("t_g") = 0,
        py::arg("lenient") = false, py::arg("multi") = false,
        py::arg("colors") = std::nullopt, py::arg("exit_labels") = std::nullopt,
        py::arg("state_labels") = std::nullopt,
        "convert label-level commands to timestamped events, mutating graph");

  m.def("events_to_commands",
        [](const std::vector<GraphEvent>& events, const BeliefGraph& graph,
           bool lenient) {
          std::vector<std::string> out;
          for (const auto& c : events_to_commands(
                   events, graph, lenient ? ApplyMode::Lenient : ApplyMode::Strict)) {
            out.push_back(format_command(c));
          }
          return out;
        },
        py::arg("events"), py::arg("graph"), py::arg("lenient") = false);

  m.def("set_f1",
        [](const std::set<std::string>& predicted, const std::set<std::string>& gold) {
          return set_f1(predicted, gold);
        },
        py::arg("predicted"), py::arg("gold"),
        "set F1; both empty scores 1.0, exactly one empty scores 0.0");

  py::class_<GraphUpdateModel>(m, "Model")
      .def_property_readonly("hidden",
                             [](const GraphUpdateModel& m) { return m.config().enc.hidden; })
      .def_property_readonly("parameter_count",
                             [](const GraphUpdateModel& m) {
                               return m.params().total_parameters();
                             })
      .def("generate",
           [](const GraphUpdateModel& model, const std::string& obs,
              const std::string& action, BeliefGraph& graph, int t_g,
              std::optional<int> max_events) {
             const Tokenizer& tok = default_tokenizer();
             return model.generate(tok.tokenize(obs), tok.tokenize(action), graph, t_g,
                                   max_events);
           },
           py::arg("obs"), py::arg("action") = "", py::arg("graph"), py::arg("t_g") = 0,
           py::arg("max_events") = std::nullopt,
           "greedy decoding for one step; events are applied to graph leniently");

  m.def("load_checkpoint",
        [](const std::string& path) {
          return std::unique_ptr<GraphUpdateModel>(load_checkpoint(path));
        },
        py::arg("path"));
}
