#pragma once

#include <memory>
#include <optional>

#include "tkg/aggregator.hpp"
#include "tkg/data.hpp"
#include "tkg/decoder.hpp"
#include "tkg/encoders.hpp"

namespace tkg {

struct ModelConfig {
  EncodingConfig enc;
  int max_events = 100;  // per-step generation cap
  bool freeze_word_table = true;
  unsigned seed = 0;
  std::optional<std::string> word_vector_file;
};

// The full text-to-graph-events model: text encoder, graph encoder,
// co-attention aggregator and the autoregressive event decoder, together
// with the learned per-head loss uncertainty weights.
class GraphUpdateModel {
 public:
  GraphUpdateModel(ModelConfig config, Vocabulary words, Vocabulary labels);

  // One teacher-forcing position: logits per active head plus its target.
  struct PositionOutput {
    EventKind target_kind = EventKind::End;
    nn::Var type_logits, type_dist;
    int type_target = 0;
    std::optional<nn::Var> src_logits, src_dist;
    int src_target = -1;
    std::optional<nn::Var> dst_logits, dst_dist;
    int dst_target = -1;
    std::optional<nn::Var> label_logits, label_dist;
    int label_target = -1;
  };

  // Runs the model over every position of the bracketed target sequence,
  // re-encoding the evolving graph after each ground-truth event. Heads
  // receive ground-truth previous arguments.
  std::vector<PositionOutput> teacher_forward(const Datapoint& dp) const;

  // Greedy constrained decoding for one game step. Applies each generated
  // event to `graph` leniently and returns the real events (start/end
  // markers excluded). Kinds needing nodes are masked while the graph is
  // empty; end is forced once max_events is reached.
  std::vector<GraphEvent> generate(const std::vector<std::string>& obs_tokens,
                                   const std::vector<std::string>& action_tokens,
                                   BeliefGraph& graph, int t_g,
                                   std::optional<int> max_events = {}) const;

  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }
  const ModelConfig& config() const { return config_; }
  const Vocabulary& words() const { return embeddings_->vocabulary(); }
  const Vocabulary& labels() const { return labels_; }
  const EmbeddingTable& embeddings() const { return *embeddings_; }
  const TextEncoder& text_encoder() const { return *text_encoder_; }
  const GraphEncoder& graph_encoder() const { return *graph_encoder_; }
  const Aggregator& aggregator() const { return *aggregator_; }
  const EventDecoder& decoder() const { return *decoder_; }
  // Learned per-head uncertainty parameters (1 x 4, order: type, src, dst, label).
  nn::Var loss_weights() const { return loss_weights_; }

  // Graph-conditioned memories for one encoded text pair; exposed for tests.
  AggregatedReps aggregate(const nn::Var& obs_enc, const nn::Var& act_enc,
                           const nn::Var& node_embeddings) const;

 private:
  ModelConfig config_;
  Vocabulary labels_;
  nn::ParameterStore params_;
  std::unique_ptr<EmbeddingTable> embeddings_;
  std::unique_ptr<TextEncoder> text_encoder_;
  std::unique_ptr<GraphEncoder> graph_encoder_;
  std::unique_ptr<Aggregator> aggregator_;
  std::unique_ptr<EventDecoder> decoder_;
  nn::Var loss_weights_;
};

}  // namespace tkg
