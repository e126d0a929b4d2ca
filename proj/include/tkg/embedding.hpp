#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tkg/autodiff.hpp"
#include "tkg/data.hpp"
#include "tkg/graph.hpp"
#include "tkg/tokenizer.hpp"

namespace tkg {

// Model width hyperparameters shared by every component.
struct EncodingConfig {
  int hidden = 64;           // token/node representation width
  int temporal = 16;         // temporal embedding width, split over (game, event)
  int event_type = 16;       // event type embedding width
  int autoregressive = 128;  // autoregressive head embedding width
  int node_key = 16;         // node pointer query/key width
  int word_dim = 300;        // pretrained word vector width

  enum class TemporalMode { Sinusoidal, Zero };
  TemporalMode temporal_mode = TemporalMode::Sinusoidal;

  void validate() const;
};

// Standard sinusoidal positional encoding row; dim must be even.
nn::Mat positional_encoding(int position, int dim);
// Rows 0..count-1 stacked.
nn::Mat positional_encoding_rows(int count, int dim);

// [pos(t_g); pos(t_e)], each half width; all-zero in the Zero temporal mode.
nn::Mat temporal_embedding(Timestamp ts, const EncodingConfig& config);

// Word-embedding table with its projection into the hidden width. Vectors
// load from a text file of "token v1 .. v300" lines (optionally preceded by a
// "<count> <dim>" header); vocabulary tokens absent from the file start at
// zero. Without a file the table is randomly initialized so that label
// embeddings stay distinguishable. The table itself is frozen by default,
// the projection is always trainable.
class EmbeddingTable {
 public:
  EmbeddingTable(nn::ParameterStore& params, Vocabulary words,
                 const EncodingConfig& config,
                 const std::optional<std::string>& vector_file, bool freeze_table,
                 const Tokenizer& tokenizer = default_tokenizer());

  const Vocabulary& vocabulary() const { return words_; }
  std::vector<int> word_ids(const std::vector<std::string>& tokens) const;

  // Projected word embeddings, one row per id (L x hidden; 0 rows for empty).
  nn::Var project_ids(const std::vector<int>& ids) const;
  // Mean projected word embedding of a label string; "" gives a zero row.
  nn::Var label_embedding(const std::string& label) const;

 private:
  Vocabulary words_;
  const Tokenizer* tokenizer_;
  int hidden_;
  nn::Var table_;        // |V| x word_dim
  nn::Var projection_;   // word_dim x hidden
  nn::Var projection_b_; // 1 x hidden
};

}  // namespace tkg
