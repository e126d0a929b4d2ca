#include <array>
#pragma once

#include <optional>

#include "tkg/aggregator.hpp"
#include "tkg/embedding.hpp"

namespace tkg {

// Autoregressive graph-event decoder: per-kind masked event embeddings, a
// causal transformer block cross-attending over the four aggregated
// memories, and the chain of type -> source -> destination -> label heads
// threaded by an autoregressive embedding.
class EventDecoder {
 public:
  EventDecoder(nn::ParameterStore& params, const EncodingConfig& config,
               int label_vocab_size, const std::string& scope = "event_decoder");

  // Eq-style event embedding (1 x (event_type + 3*hidden)); source and
  // destination label segments are resolved against `graph` and zeroed per
  // the argument mask table.
  nn::Var embed_event(const GraphEvent& event, const BeliefGraph& graph,
                      const EmbeddingTable& embeddings) const;

  // Projection + decoder positional encoding for sequence position `pos`.
  nn::Var input_row(const nn::Var& event_embedding, int pos) const;

  // Runs the block over the whole prefix and returns the last position's
  // hidden vector (1 x hidden). Memories with zero rows contribute their
  // output bias only.
  nn::Var decode_hidden(const std::vector<nn::Var>& input_rows,
                        const AggregatedReps& memories) const;

  struct TypeHead {
    nn::Var logits;  // 1 x 6
    nn::Var dist;
    int chosen = 0;
    nn::Var h_auto;  // 1 x autoregressive
  };
  // `forced` pins the chain argument (teacher forcing); `allowed` masks
  // logits for constrained decoding (nullptr = unconstrained).
  TypeHead type_head(const nn::Var& h_dec, std::optional<EventKind> forced,
                     const std::array<bool, kNumEventKinds>* allowed) const;

  struct NodeHead {
    nn::Var logits;  // 1 x N
    nn::Var dist;
    int chosen = 0;
    nn::Var h_auto;
  };
  enum class NodeRole { Source, Destination };
  NodeHead node_head(const nn::Var& h_auto, const nn::Var& node_embeddings,
                     NodeRole role, std::optional<int> forced) const;

  struct LabelHead {
    nn::Var logits;  // 1 x |labels|
    nn::Var dist;
    int chosen = 0;
  };
  LabelHead label_head(const nn::Var& h_auto) const;

  int label_vocab_size() const { return label_vocab_size_; }

 private:
  struct CrossAttention {
    nn::Var norm_gamma, norm_beta;
    nn::Var wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct NodeHeadParams {
    nn::Var key_w, key_b;      // hidden -> node_key (pointwise conv)
    nn::Var query_w0, query_b0;
    nn::Var query_w1, query_b1;
    nn::Var auto_w;            // node_key -> autoregressive, no bias so that
                               // choosing the mean key leaves h_auto unchanged
  };

  nn::Var project_label_segment(const std::string& label,
                                const EmbeddingTable& embeddings, bool active) const;

  int hidden_;
  int event_dim_;
  int auto_dim_;
  int node_key_;
  int label_vocab_size_;

  nn::Var type_embedding_;  // 6 x event_type
  nn::Var input_w_, input_b_;

  nn::Var self_norm_gamma_, self_norm_beta_;
  nn::Var self_wq_, self_bq_, self_wk_, self_bk_, self_wv_, self_bv_, self_wo_, self_bo_;
  std::array<CrossAttention, 4> cross_;
  nn::Var ffn_norm_gamma_, ffn_norm_beta_;
  nn::Var ffn_w1_, ffn_b1_, ffn_w2_, ffn_b2_;
  nn::Var out_norm_gamma_, out_norm_beta_;

  nn::Var type_w0_, type_b0_, type_g0_, type_be0_;
  nn::Var type_w1_, type_b1_, type_g1_, type_be1_;
  nn::Var type_w2_, type_b2_;
  nn::Var type_dec_w_, type_dec_b_;    // h_dec -> autoregressive
  nn::Var type_auto_w0_, type_auto_b0_;
  nn::Var type_auto_w1_, type_auto_b1_;

  NodeHeadParams src_head_;
  NodeHeadParams dst_head_;

  nn::Var label_w0_, label_b0_, label_g0_, label_be0_;
  nn::Var label_w1_, label_b1_, label_g1_, label_be1_;
  nn::Var label_w2_, label_b2_;
};

}  // namespace tkg
