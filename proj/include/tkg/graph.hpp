#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tkg {

// Two-dimensional timestamp: `game` is the game step, `event` the index of
// the graph event within that game step. Event counters reset to 0 at the
// start of every game step.
struct Timestamp {
  int game = 0;
  int event = 0;

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
  friend bool operator<(const Timestamp& a, const Timestamp& b) {
    return a.game != b.game ? a.game < b.game : a.event < b.event;
  }
};

// Ids 0 and 1 are pinned to end/start so checkpoints stay stable.
enum class EventKind : int {
  End = 0,
  Start = 1,
  NodeAdd = 2,
  NodeDelete = 3,
  EdgeAdd = 4,
  EdgeDelete = 5,
};

inline constexpr int kNumEventKinds = 6;

const char* to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(const std::string& name);

// Which arguments an event kind carries. This table is the single source of
// truth shared by event validation, decoder embedding masking, loss masking
// and constrained decoding.
struct ArgMask {
  bool src = false;
  bool dst = false;
  bool label = false;
};

constexpr ArgMask arg_mask(EventKind kind) {
  switch (kind) {
    case EventKind::End:
    case EventKind::Start:
      return {false, false, false};
    case EventKind::NodeAdd:
      return {false, false, true};
    case EventKind::NodeDelete:
      return {true, false, false};
    case EventKind::EdgeAdd:
      return {true, true, true};
    case EventKind::EdgeDelete:
      return {true, true, false};
  }
  return {};
}

// One timestamped discrete graph update. Node indices refer to positions in
// the graph immediately before the event is applied. Absent arguments are
// src/dst = -1 and label = "".
struct GraphEvent {
  EventKind kind = EventKind::Start;
  int src = -1;
  int dst = -1;
  std::string label;
  Timestamp ts;

  static GraphEvent start(Timestamp ts) { return {EventKind::Start, -1, -1, "", ts}; }
  static GraphEvent end(Timestamp ts) { return {EventKind::End, -1, -1, "", ts}; }
  static GraphEvent node_add(std::string label, Timestamp ts) {
    return {EventKind::NodeAdd, -1, -1, std::move(label), ts};
  }
  static GraphEvent node_delete(int src, Timestamp ts) {
    return {EventKind::NodeDelete, src, -1, "", ts};
  }
  static GraphEvent edge_add(int src, int dst, std::string label, Timestamp ts) {
    return {EventKind::EdgeAdd, src, dst, std::move(label), ts};
  }
  static GraphEvent edge_delete(int src, int dst, Timestamp ts) {
    return {EventKind::EdgeDelete, src, dst, "", ts};
  }

  friend bool operator==(const GraphEvent&, const GraphEvent&) = default;
};

// True iff argument presence matches the kind's mask exactly.
bool well_formed(const GraphEvent& event);

// Legacy label-level update command: add/delete a directed edge labeled `r`
// from `n1` to `n2`.
struct UpdateCommand {
  enum class Op { Add, Delete };
  Op op = Op::Add;
  std::string n1;
  std::string n2;
  std::string r;

  friend bool operator==(const UpdateCommand&, const UpdateCommand&) = default;
  friend bool operator<(const UpdateCommand& a, const UpdateCommand& b) {
    if (a.op != b.op) return a.op < b.op;
    if (a.n1 != b.n1) return a.n1 < b.n1;
    if (a.n2 != b.n2) return a.n2 < b.n2;
    return a.r < b.r;
  }
};

// Parses "add ( n1 , n2 , r )", "delete ( n1 , n2 , r )" or the
// comma-delimited variant "add , n1 , n2 , r". Labels may contain spaces.
// Returns nullopt on malformed input.
std::optional<UpdateCommand> parse_command(const std::string& text);
UpdateCommand parse_command_or_throw(const std::string& text);
std::string format_command(const UpdateCommand& command);

struct RdfTriple {
  std::string subject;
  std::string object;
  std::string relation;

  friend bool operator==(const RdfTriple&, const RdfTriple&) = default;
  friend bool operator<(const RdfTriple& a, const RdfTriple& b) {
    if (a.subject != b.subject) return a.subject < b.subject;
    if (a.object != b.object) return a.object < b.object;
    return a.relation < b.relation;
  }
};

// Mutable labeled directed multigraph state with per-node/per-edge insertion
// timestamps. Node indices are contiguous 0..N-1; deleting node i removes its
// row and decrements every stored index greater than i. At most one edge per
// ordered (src, dst) pair; self-loops are allowed.
class BeliefGraph {
 public:
  struct Node {
    std::string label;
    Timestamp added_at;
    friend bool operator==(const Node&, const Node&) = default;
  };
  struct Edge {
    int src = 0;
    int dst = 0;
    std::string label;
    Timestamp added_at;
    friend bool operator==(const Edge&, const Edge&) = default;
  };

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  bool empty() const { return nodes_.empty(); }

  const Node& node(int i) const { return nodes_.at(i); }
  const Edge& edge(int i) const { return edges_.at(i); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool has_node(int i) const { return i >= 0 && i < node_count(); }
  // Index into edges() of the unique edge src->dst, if present.
  std::optional<int> find_edge(int src, int dst) const;
  // Number of incident edges (in + out; a self-loop counts once).
  int degree(int node_index) const;
  // First node carrying `label`, if any.
  std::optional<int> find_node_by_label(const std::string& label) const;

  friend bool operator==(const BeliefGraph&, const BeliefGraph&) = default;

 private:
  friend bool apply_event_impl(BeliefGraph&, const GraphEvent&, bool strict);
  friend void remove_node_for_merge(BeliefGraph&, int);
  friend void relabel_node_for_merge(BeliefGraph&, int, std::string);
  friend void remove_edge_for_merge(BeliefGraph&, int);

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
};

enum class ApplyMode { Strict, Lenient };

// Applies one event in place. start/end are structural no-ops. Returns true
// if the graph changed. Strict mode throws on dangling indices, duplicate
// edge additions and deletions of missing edges; lenient mode turns those
// into no-ops. Both modes throw on malformed argument presence.
bool apply_event(BeliefGraph& graph, const GraphEvent& event, ApplyMode mode);

// Value-returning convenience wrapper.
BeliefGraph applied(BeliefGraph graph, const GraphEvent& event, ApplyMode mode);

// One triple per edge using current node labels; duplicates collapse.
std::set<RdfTriple> extract_triples(const BeliefGraph& graph);

// Node reuse policy for converting label-level commands into events.
// Exit and state labels are instantiated fresh per attachment instead of
// being shared by label. In multi mode, labels of the form
// "<color> <rest>" are split into a base node plus a color node joined by an
// "is" edge.
struct NodePolicy {
  std::set<std::string> exit_labels = {"exit"};
  std::set<std::string> state_labels;
  std::set<std::string> colors;
  bool multi_mode = false;

  bool fresh_per_attachment(const std::string& label) const {
    return exit_labels.count(label) > 0 || state_labels.count(label) > 0;
  }
  // "purple potato" -> {"purple", "potato"} when multi mode is on and the
  // first token is a configured color.
  std::optional<std::pair<std::string, std::string>> split_colored(
      const std::string& label) const;
};

inline constexpr const char* kColorEdgeLabel = "is";

// Converts one game step's worth of pre-sorted commands into timestamped
// graph events, applying them to `graph` as it goes. `event_counter` is the
// running event-step counter for game step `t_g` and is advanced past the
// emitted events. Only effective events are emitted: adds of already-present
// edges produce nothing, and delete commands whose edge cannot be resolved
// throw in strict mode and are skipped in lenient mode. After an edge
// deletion, endpoints left with degree 0 are deleted as well.
std::vector<GraphEvent> commands_to_events(std::span<const UpdateCommand> commands,
                                           BeliefGraph& graph, int t_g,
                                           int& event_counter,
                                           const NodePolicy& policy,
                                           ApplyMode mode);

// Convenience overload starting the event counter at 0.
std::vector<GraphEvent> commands_to_events(std::span<const UpdateCommand> commands,
                                           BeliefGraph& graph, int t_g,
                                           const NodePolicy& policy,
                                           ApplyMode mode = ApplyMode::Strict);

// Projects edge events back onto label-level commands, replaying `graph`
// incrementally so labels are read from the state at the moment each event
// applies. Node events carry no relation and produce no command. Unresolvable
// events throw in strict mode and are skipped in lenient mode.
std::set<UpdateCommand> events_to_commands(std::span<const GraphEvent> events,
                                           BeliefGraph graph,
                                           ApplyMode mode = ApplyMode::Strict);

// Rewrites every node that is the subject of an "is" edge to a color node as
// "<color> <label>", drops the color nodes and their "is" edges, and extracts
// triples from the result. Nodes with several colors keep the one whose edge
// was added earliest.
std::set<RdfTriple> merge_colored_nodes(const BeliefGraph& graph,
                                        const std::set<std::string>& colors);

// Graphviz DOT rendering with labels and timestamps.
std::string to_dot(const BeliefGraph& graph);

// JSON round trip (schema: {"nodes":[{"id","label","added_at":[g,e]}],
// "edges":[{"src","dst","label","added_at":[g,e]}]}).
std::string graph_to_json(const BeliefGraph& graph, int indent = 2);
BeliefGraph graph_from_json(const std::string& text);

}  // namespace tkg
