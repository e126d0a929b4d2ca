#pragma once

#include <string>
#include <vector>

#include "tkg/embedding.hpp"

namespace tkg {

// Dynamically built per-graph feature rows: row i of node_attrs is
// [label embedding; temporal embedding of added_at] for node i, and likewise
// for edges. edge_index[k] is the (src, dst) pair of edge row k.
struct AttributeMatrices {
  nn::Var node_attrs;  // N x (hidden + temporal)
  nn::Var edge_attrs;  // E x (hidden + temporal)
  std::vector<std::pair<int, int>> edge_index;
};

AttributeMatrices build_attribute_matrices(const BeliefGraph& graph,
                                           const EmbeddingTable& embeddings,
                                           const EncodingConfig& config);

// Token encoder: projected word embeddings plus positional encodings through
// a block of five separable convolutions, one self-attention layer and a
// two-layer feed-forward, all with pre-norm residuals.
class TextEncoder {
 public:
  TextEncoder(nn::ParameterStore& params, const EncodingConfig& config,
              const std::string& scope = "text_encoder");

  // ids -> L x hidden (0 rows for empty input)
  nn::Var encode(const EmbeddingTable& embeddings, const std::vector<int>& ids) const;

  static constexpr int kConvLayers = 5;
  static constexpr int kKernel = 7;

 private:
  int hidden_;
  struct ConvLayer {
    nn::Var norm_gamma, norm_beta;
    nn::Var depthwise, depthwise_b;
    nn::Var pointwise, pointwise_b;
  };
  std::vector<ConvLayer> convs_;
  nn::Var attn_norm_gamma_, attn_norm_beta_;
  nn::Var wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  nn::Var ffn_norm_gamma_, ffn_norm_beta_;
  nn::Var ffn_w1_, ffn_b1_, ffn_w2_, ffn_b2_;
  nn::Var out_norm_gamma_, out_norm_beta_;
};

// Single-head graph transformer over the attribute matrices: each node
// attends over its in-neighbours with edge features added to keys and
// messages, plus a skip transform of itself, then ReLU and a projection down
// to the hidden width. Works for empty graphs and isolated nodes.
class GraphEncoder {
 public:
  GraphEncoder(nn::ParameterStore& params, const EncodingConfig& config,
               const std::string& scope = "graph_encoder");

  // N x hidden node embeddings.
  nn::Var encode(const AttributeMatrices& attrs) const;

 private:
  int attr_dim_;
  int hidden_;
  nn::Var skip_w_, skip_b_;    // transform of the node itself
  nn::Var query_w_, query_b_;
  nn::Var key_w_, key_b_;
  nn::Var value_w_, value_b_;
  nn::Var edge_w_, edge_b_;    // shared edge contribution to keys and values
  nn::Var out_w_, out_b_;      // (hidden + temporal) -> hidden
};

}  // namespace tkg
