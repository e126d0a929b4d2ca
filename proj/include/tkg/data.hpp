#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tkg/graph.hpp"
#include "tkg/tokenizer.hpp"

namespace tkg {

// One line of the command-generation dataset.
struct RawExample {
  std::string game_id;
  int walkthrough_step = 0;
  int random_step = 0;  // 0 = the walkthrough step itself
  std::string observation;
  std::string previous_action;
  std::set<RdfTriple> previous_graph;
  std::vector<UpdateCommand> target_commands;
};

// JSON Lines, one example per line. Schema violations are reported with line
// numbers; command strings go through the command grammar parser.
std::vector<RawExample> load_dataset(const std::string& path);
void save_dataset(const std::string& path, std::span<const RawExample> examples);

struct DatasetStats {
  std::size_t example_count = 0;
  double avg_observation_tokens = 0.0;
  double avg_commands = 0.0;
  std::size_t node_label_count = 0;
  std::size_t edge_label_count = 0;
  double avg_connections = 0.0;  // mean edges per prior graph
};

DatasetStats compute_stats(std::span<const RawExample> examples,
                           const Tokenizer& tokenizer = default_tokenizer());

// Deterministic command order used before event conversion: all deletes
// before all adds, each group lexicographic by (n1, n2, r).
std::vector<UpdateCommand> sort_commands(std::vector<UpdateCommand> commands);
inline constexpr const char* kSortOrderName = "deletes_first_then_lexicographic";

// One teacher-forcing example. prior_events reconstruct the belief graph at
// step start with true historical timestamps; target_events are bracketed by
// start/end markers and stamped with this step's game step.
struct Datapoint {
  std::string game_id;
  int walkthrough_step = 0;
  int random_step = 0;
  int t_g = 0;  // position in the trajectory chain
  std::vector<std::string> obs_tokens;
  std::vector<std::string> action_tokens;
  std::vector<GraphEvent> prior_events;
  std::vector<GraphEvent> target_events;
  std::vector<UpdateCommand> target_commands;  // sorted
  std::set<RdfTriple> previous_graph;          // gold triples, never split
};

// The unit of free-run evaluation: the walkthrough prefix up to
// walkthrough_step plus the random steps branching from it.
struct Trajectory {
  std::string game_id;
  int walkthrough_step = 0;
  std::vector<int> datapoint_indices;
};

struct PreprocessOptions {
  bool multi_mode = false;
  std::set<std::string> exit_labels = {"exit"};
  // State labels are normally derived from the dataset's "is" objects; any
  // entries given here are merged in.
  std::set<std::string> state_labels;
  bool derive_state_labels = true;
  std::set<std::string> colors = {"red",  "orange", "yellow", "green",
                                  "blue", "purple", "white",  "black"};
  unsigned seed = 0;  // recorded for provenance; preprocessing is deterministic
};

struct PreprocessedData {
  std::vector<Datapoint> datapoints;
  std::vector<Trajectory> trajectories;
  NodePolicy policy;
  bool multi_mode = false;
};

// Groups examples into trajectories and replays every chain from the empty
// graph, assigning true historical timestamps. Throws if the replayed prior
// graph ever desynchronizes from the recorded previous_graph.
PreprocessedData build_datapoints(std::vector<RawExample> examples,
                                  const Tokenizer& tokenizer,
                                  const PreprocessOptions& options);

// Token/label id tables. Ids 0 and 1 are reserved for padding and unknowns.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> entries);  // without reserved ids

  int id(const std::string& token) const;  // kUnk when missing
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Entries after the reserved ids.
  std::vector<std::string> entries() const;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

// Word vocabulary over observation/action tokens plus the tokens of every
// node and edge label (labels are embedded through the same word table).
Vocabulary build_word_vocab(std::span<const Datapoint> datapoints,
                            const Tokenizer& tokenizer);
// Whole-label vocabulary over node and edge labels seen in events.
Vocabulary build_label_vocab(std::span<const Datapoint> datapoints);

// Padded batch of teacher-forcing targets. Grid row p holds the event at
// position p+1 of target_events (start is input only, never a target).
struct Batch {
  std::vector<int> datapoint_indices;
  std::vector<std::vector<int>> obs_ids;        // [B][Lo]
  std::vector<std::vector<std::uint8_t>> obs_mask;
  std::vector<std::vector<int>> action_ids;     // [B][La]
  std::vector<std::vector<std::uint8_t>> action_mask;
  std::vector<std::vector<int>> kind_ids;       // [B][E]
  std::vector<std::vector<int>> src_ids;
  std::vector<std::vector<int>> dst_ids;
  std::vector<std::vector<int>> label_ids;
  std::vector<std::vector<std::uint8_t>> type_mask;
  std::vector<std::vector<std::uint8_t>> src_mask;
  std::vector<std::vector<std::uint8_t>> dst_mask;
  std::vector<std::vector<std::uint8_t>> label_mask;

  int size() const { return static_cast<int>(datapoint_indices.size()); }
};

// Deterministic given the seed: shuffles datapoint order, pads to the batch
// maxima and emits per-head masks from the argument mask table.
std::vector<Batch> make_batches(std::span<const Datapoint> datapoints,
                                const Vocabulary& words, const Vocabulary& labels,
                                int batch_size, unsigned shuffle_seed);

// Preprocessed cache + manifest on disk.
struct Manifest {
  int schema_version = 1;
  unsigned seed = 0;
  bool multi_mode = false;
  std::string sort_order = kSortOrderName;
  std::set<std::string> exit_labels;
  std::set<std::string> state_labels;
  std::set<std::string> colors;
  std::vector<std::string> word_vocab;   // entries without reserved ids
  std::vector<std::string> label_vocab;
  std::map<std::string, std::string> split_files;  // split name -> file name
};

void save_manifest(const std::string& path, const Manifest& manifest);
Manifest load_manifest(const std::string& path);

void save_preprocessed(const std::string& path, const PreprocessedData& data);
PreprocessedData load_preprocessed(const std::string& path, const Manifest& manifest);

}  // namespace tkg
