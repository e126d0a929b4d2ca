#include "tkg/graph.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tkg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
  throw std::runtime_error(message);
}

std::string describe(const GraphEvent& e) {
  std::ostringstream out;
  out << to_string(e.kind) << "(src=" << e.src << ", dst=" << e.dst
      << ", label=\"" << e.label << "\", ts=[" << e.ts.game << "," << e.ts.event
      << "])";
  return out.str();
}

std::string trim(const std::string& s) {
  size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::End: return "end";
    case EventKind::Start: return "start";
    case EventKind::NodeAdd: return "node-add";
    case EventKind::NodeDelete: return "node-delete";
    case EventKind::EdgeAdd: return "edge-add";
    case EventKind::EdgeDelete: return "edge-delete";
  }
  return "?";
}

std::optional<EventKind> event_kind_from_string(const std::string& name) {
  for (int k = 0; k < kNumEventKinds; ++k) {
    EventKind kind = static_cast<EventKind>(k);
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

bool well_formed(const GraphEvent& event) {
  ArgMask mask = arg_mask(event.kind);
  if (mask.src != (event.src >= 0)) return false;
  if (mask.dst != (event.dst >= 0)) return false;
  if (mask.label != !event.label.empty()) return false;
  return true;
}

std::optional<UpdateCommand> parse_command(const std::string& text) {
  std::string s = trim(text);
  UpdateCommand cmd;
  size_t cursor = 0;
  if (s.rfind("add", 0) == 0) {
    cmd.op = UpdateCommand::Op::Add;
    cursor = 3;
  } else if (s.rfind("delete", 0) == 0) {
    cmd.op = UpdateCommand::Op::Delete;
    cursor = 6;
  } else {
    return std::nullopt;
  }

  std::string rest = trim(s.substr(cursor));
  if (rest.empty()) return std::nullopt;
  if (rest.front() == '(') {
    if (rest.back() != ')') return std::nullopt;
    rest = rest.substr(1, rest.size() - 2);
  } else if (rest.front() == ',') {
    rest = rest.substr(1);
  } else {
    return std::nullopt;
  }

  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t comma = rest.find(',', start);
    if (comma == std::string::npos) {
      parts.push_back(trim(rest.substr(start)));
      break;
    }
    parts.push_back(trim(rest.substr(start, comma - start)));
    start = comma + 1;
  }
  if (parts.size() != 3) return std::nullopt;
  for (const auto& p : parts) {
    if (p.empty()) return std::nullopt;
  }
  cmd.n1 = parts[0];
  cmd.n2 = parts[1];
  cmd.r = parts[2];
  return cmd;
}

UpdateCommand parse_command_or_throw(const std::string& text) {
  auto cmd = parse_command(text);
  if (!cmd) fail("malformed update command: \"" + text + "\"");
  return *cmd;
}

std::string format_command(const UpdateCommand& command) {
  std::string op = command.op == UpdateCommand::Op::Add ? "add" : "delete";
  return op + " ( " + command.n1 + " , " + command.n2 + " , " + command.r + " )";
}

std::optional<int> BeliefGraph::find_edge(int src, int dst) const {
  for (int i = 0; i < edge_count(); ++i) {
    if (edges_[i].src == src && edges_[i].dst == dst) return i;
  }
  return std::nullopt;
}

int BeliefGraph::degree(int node_index) const {
  int d = 0;
  for (const Edge& e : edges_) {
    if (e.src == node_index || e.dst == node_index) ++d;
  }
  return d;
}

std::optional<int> BeliefGraph::find_node_by_label(const std::string& label) const {
  for (int i = 0; i < node_count(); ++i) {
    if (nodes_[i].label == label) return i;
  }
  return std::nullopt;
}

// Shared by apply_event and by merge_colored_nodes' scratch edits.
bool apply_event_impl(BeliefGraph& g, const GraphEvent& event, bool strict) {
  switch (event.kind) {
    case EventKind::Start:
    case EventKind::End:
      return false;

    case EventKind::NodeAdd:
      g.nodes_.push_back({event.label, event.ts});
      return true;

    case EventKind::NodeDelete: {
      if (!g.has_node(event.src)) {
        if (strict) fail("node-delete of missing node: " + describe(event));
        return false;
      }
      g.nodes_.erase(g.nodes_.begin() + event.src);
      std::erase_if(g.edges_, [&](const BeliefGraph::Edge& e) {
        return e.src == event.src || e.dst == event.src;
      });
      for (auto& e : g.edges_) {
        if (e.src > event.src) --e.src;
        if (e.dst > event.src) --e.dst;
      }
      return true;
    }

    case EventKind::EdgeAdd: {
      if (!g.has_node(event.src) || !g.has_node(event.dst)) {
        if (strict) fail("edge-add with dangling index: " + describe(event));
        return false;
      }
      if (g.find_edge(event.src, event.dst)) {
        if (strict) fail("duplicate edge-add: " + describe(event));
        return false;
      }
      g.edges_.push_back({event.src, event.dst, event.label, event.ts});
      return true;
    }

    case EventKind::EdgeDelete: {
      if (!g.has_node(event.src) || !g.has_node(event.dst)) {
        if (strict) fail("edge-delete with dangling index: " + describe(event));
        return false;
      }
      auto idx = g.find_edge(event.src, event.dst);
      if (!idx) {
        if (strict) fail("edge-delete of missing edge: " + describe(event));
        return false;
      }
      g.edges_.erase(g.edges_.begin() + *idx);
      return true;
    }
  }
  return false;
}

bool apply_event(BeliefGraph& graph, const GraphEvent& event, ApplyMode mode) {
  if (!well_formed(event)) {
    fail("malformed event arguments: " + describe(event));
  }
  return apply_event_impl(graph, event, mode == ApplyMode::Strict);
}

BeliefGraph applied(BeliefGraph graph, const GraphEvent& event, ApplyMode mode) {
  apply_event(graph, event, mode);
  return graph;
}

std::set<RdfTriple> extract_triples(const BeliefGraph& graph) {
  std::set<RdfTriple> triples;
  for (const auto& e : graph.edges()) {
    triples.insert({graph.node(e.src).label, graph.node(e.dst).label, e.label});
  }
  return triples;
}

std::optional<std::pair<std::string, std::string>> NodePolicy::split_colored(
    const std::string& label) const {
  if (!multi_mode) return std::nullopt;
  size_t space = label.find(' ');
  if (space == std::string::npos || space + 1 >= label.size()) return std::nullopt;
  std::string head = label.substr(0, space);
  if (colors.count(head) == 0) return std::nullopt;
  return std::make_pair(head, label.substr(space + 1));
}

namespace {

// The effective label a command endpoint matches against: in multi mode a
// node with an "is" edge to a color node stands for "<color> <label>".
std::string display_label(const BeliefGraph& g, int node, const NodePolicy& policy) {
  const std::string& base = g.node(node).label;
  if (!policy.multi_mode) return base;
  for (const auto& e : g.edges()) {
    if (e.src == node && e.label == kColorEdgeLabel &&
        policy.colors.count(g.node(e.dst).label) > 0) {
      return g.node(e.dst).label + " " + base;
    }
  }
  return base;
}

struct EventEmitter {
  BeliefGraph& graph;
  std::vector<GraphEvent>& out;
  int t_g;
  int& counter;
  ApplyMode mode;

  void emit(GraphEvent event) {
    event.ts = {t_g, counter++};
    apply_event(graph, event, mode);
    out.push_back(std::move(event));
  }
};

// Finds or creates the node a command endpoint refers to, emitting any
// node-add / "is"-edge events required.
int resolve_endpoint(const std::string& label, EventEmitter& em,
                     const NodePolicy& policy) {
  BeliefGraph& g = em.graph;
  if (auto split = policy.split_colored(label)) {
    const auto& [color, base] = *split;
    for (int i = 0; i < g.node_count(); ++i) {
      if (g.node(i).label != base) continue;
      for (const auto& e : g.edges()) {
        if (e.src == i && e.label == kColorEdgeLabel && g.node(e.dst).label == color) {
          return i;
        }
      }
    }
    em.emit(GraphEvent::node_add(base, {}));
    int base_index = g.node_count() - 1;
    em.emit(GraphEvent::node_add(color, {}));
    em.emit(GraphEvent::edge_add(base_index, g.node_count() - 1, kColorEdgeLabel, {}));
    return base_index;
  }

  if (!policy.fresh_per_attachment(label)) {
    for (int i = 0; i < g.node_count(); ++i) {
      if (g.node(i).label == label && display_label(g, i, policy) == label) return i;
    }
  }
  em.emit(GraphEvent::node_add(label, {}));
  return g.node_count() - 1;
}

// The edge a delete command refers to, matched by display labels. When
// several edges match (possible with fresh-per-attachment nodes) the one with
// the lowest index wins.
std::optional<int> resolve_edge(const BeliefGraph& g, const UpdateCommand& cmd,
                                const NodePolicy& policy) {
  for (int i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edge(i);
    if (e.label != cmd.r) continue;
    if (display_label(g, e.src, policy) != cmd.n1) continue;
    if (display_label(g, e.dst, policy) != cmd.n2) continue;
    return i;
  }
  return std::nullopt;
}

}  // namespace

std::vector<GraphEvent> commands_to_events(std::span<const UpdateCommand> commands,
                                           BeliefGraph& graph, int t_g,
                                           int& event_counter,
                                           const NodePolicy& policy,
                                           ApplyMode mode) {
  std::vector<GraphEvent> events;
  EventEmitter em{graph, events, t_g, event_counter, mode};

  for (const UpdateCommand& cmd : commands) {
    if (cmd.op == UpdateCommand::Op::Add) {
      int src = resolve_endpoint(cmd.n1, em, policy);
      int dst = resolve_endpoint(cmd.n2, em, policy);
      if (graph.find_edge(src, dst)) {
        if (mode == ApplyMode::Strict && graph.edge(*graph.find_edge(src, dst)).label != cmd.r) {
          fail("add command conflicts with existing edge: " + format_command(cmd));
        }
        continue;  // set semantics: re-adding an occupied pair is a no-op
      }
      em.emit(GraphEvent::edge_add(src, dst, cmd.r, {}));
    } else {
      auto edge_index = resolve_edge(graph, cmd, policy);
      if (!edge_index) {
        if (mode == ApplyMode::Strict) {
          fail("delete command does not match any edge: " + format_command(cmd));
        }
        continue;
      }
      const auto edge = graph.edge(*edge_index);
      em.emit(GraphEvent::edge_delete(edge.src, edge.dst, {}));

      // Orphan removal, higher index first so the lower one stays valid.
      std::vector<int> endpoints = {edge.src, edge.dst};
      std::sort(endpoints.rbegin(), endpoints.rend());
      endpoints.erase(std::unique(endpoints.begin(), endpoints.end()), endpoints.end());
      for (int node : endpoints) {
        if (graph.degree(node) == 0) {
          em.emit(GraphEvent::node_delete(node, {}));
        }
      }
    }
  }
  return events;
}

std::vector<GraphEvent> commands_to_events(std::span<const UpdateCommand> commands,
                                           BeliefGraph& graph, int t_g,
                                           const NodePolicy& policy,
                                           ApplyMode mode) {
  int counter = 0;
  return commands_to_events(commands, graph, t_g, counter, policy, mode);
}

std::set<UpdateCommand> events_to_commands(std::span<const GraphEvent> events,
                                           BeliefGraph graph, ApplyMode mode) {
  std::set<UpdateCommand> commands;
  for (const GraphEvent& event : events) {
    if (!well_formed(event)) fail("malformed event: " + describe(event));
    bool resolvable = true;
    switch (event.kind) {
      case EventKind::EdgeAdd: {
        if (graph.has_node(event.src) && graph.has_node(event.dst)) {
          commands.insert({UpdateCommand::Op::Add, graph.node(event.src).label,
                           graph.node(event.dst).label, event.label});
        } else {
          resolvable = false;
        }
        break;
      }
      case EventKind::EdgeDelete: {
        std::optional<int> idx;
        if (graph.has_node(event.src) && graph.has_node(event.dst)) {
          idx = graph.find_edge(event.src, event.dst);
        }
        if (idx) {
          commands.insert({UpdateCommand::Op::Delete, graph.node(event.src).label,
                           graph.node(event.dst).label, graph.edge(*idx).label});
        } else {
          resolvable = false;
        }
        break;
      }
      default:
        break;
    }
    if (!resolvable && mode == ApplyMode::Strict) {
      fail("event does not resolve against the replayed graph: " + describe(event));
    }
    apply_event(graph, event, mode);
  }
  return commands;
}

void relabel_node_for_merge(BeliefGraph& g, int node, std::string label) {
  g.nodes_.at(node).label = std::move(label);
}

void remove_edge_for_merge(BeliefGraph& g, int edge) {
  g.edges_.erase(g.edges_.begin() + edge);
}

void remove_node_for_merge(BeliefGraph& g, int node) {
  apply_event_impl(g, GraphEvent::node_delete(node, {}), true);
}

std::set<RdfTriple> merge_colored_nodes(const BeliefGraph& graph,
                                        const std::set<std::string>& colors) {
  BeliefGraph g = graph;

  // Pick each subject's color by earliest attachment.
  std::map<int, std::pair<Timestamp, std::string>> chosen;
  std::vector<int> color_edges;
  std::set<int> color_nodes;
  for (int i = 0; i < g.edge_count(); ++i) {
    const auto& e = g.edge(i);
    if (e.label != kColorEdgeLabel || colors.count(g.node(e.dst).label) == 0) continue;
    color_edges.push_back(i);
    color_nodes.insert(e.dst);
    auto it = chosen.find(e.src);
    if (it == chosen.end() || e.added_at < it->second.first) {
      chosen[e.src] = {e.added_at, g.node(e.dst).label};
    }
  }

  for (const auto& [node, pick] : chosen) {
    relabel_node_for_merge(g, node, pick.second + " " + g.node(node).label);
  }
  for (auto it = color_edges.rbegin(); it != color_edges.rend(); ++it) {
    remove_edge_for_merge(g, *it);
  }
  for (auto it = color_nodes.rbegin(); it != color_nodes.rend(); ++it) {
    remove_node_for_merge(g, *it);
  }
  return extract_triples(g);
}

std::string to_dot(const BeliefGraph& graph) {
  std::ostringstream out;
  out << "digraph belief {\n";
  for (int i = 0; i < graph.node_count(); ++i) {
    const auto& n = graph.node(i);
    out << "  n" << i << " [label=\"" << n.label << "\\n[" << n.added_at.game
        << "," << n.added_at.event << "]\"];\n";
  }
  for (const auto& e : graph.edges()) {
    out << "  n" << e.src << " -> n" << e.dst << " [label=\"" << e.label
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

std::string graph_to_json(const BeliefGraph& graph, int indent) {
  json j;
  j["nodes"] = json::array();
  j["edges"] = json::array();
  for (int i = 0; i < graph.node_count(); ++i) {
    const auto& n = graph.node(i);
    j["nodes"].push_back({{"id", i},
                          {"label", n.label},
                          {"added_at", {n.added_at.game, n.added_at.event}}});
  }
  for (const auto& e : graph.edges()) {
    j["edges"].push_back({{"src", e.src},
                          {"dst", e.dst},
                          {"label", e.label},
                          {"added_at", {e.added_at.game, e.added_at.event}}});
  }
  return j.dump(indent);
}

BeliefGraph graph_from_json(const std::string& text) {
  json j = json::parse(text);
  BeliefGraph g;
  int expected_id = 0;
  for (const auto& n : j.at("nodes")) {
    if (n.at("id").get<int>() != expected_id++) {
      fail("graph json: node ids must be contiguous from 0");
    }
    apply_event_impl(
        g,
        GraphEvent::node_add(n.at("label").get<std::string>(),
                             {n.at("added_at").at(0).get<int>(),
                              n.at("added_at").at(1).get<int>()}),
        true);
  }
  for (const auto& e : j.at("edges")) {
    GraphEvent ev = GraphEvent::edge_add(
        e.at("src").get<int>(), e.at("dst").get<int>(),
        e.at("label").get<std::string>(),
        {e.at("added_at").at(0).get<int>(), e.at("added_at").at(1).get<int>()});
    if (!well_formed(ev)) fail("graph json: malformed edge");
    apply_event_impl(g, ev, true);
  }
  return g;
}

}  // namespace tkg
