#pragma once

#include "tkg/embedding.hpp"

namespace tkg {

// The four co-attended matrices consumed by the decoder. Graph-side matrices
// have zero rows when the graph is empty.
struct AggregatedReps {
  nn::Var obs_to_graph;     // L_obs x hidden
  nn::Var graph_to_obs;     // N x hidden
  nn::Var action_to_graph;  // L_act x hidden
  nn::Var graph_to_action;  // N x hidden
};

// Bidirectional co-attention with a trilinear similarity. One parameter set
// serves both text pathways and both directions.
class Aggregator {
 public:
  Aggregator(nn::ParameterStore& params, const EncodingConfig& config,
             const std::string& scope = "aggregator");

  // S[i, j] = w1 . a_i + w2 . b_j + w3 . (a_i * b_j); masked entries (mask 0)
  // become -inf before any softmax taken by the caller.
  nn::Var trilinear(const nn::Var& a, const nn::Var& b) const;

  // One direction: attends `primary` over `context` and returns
  // a primary-sized aggregation (m x hidden). context may have 0 rows.
  nn::Var aggregate(const nn::Var& primary, const nn::Var& context) const;

  // Both directions for one text input.
  std::pair<nn::Var, nn::Var> coattend(const nn::Var& text, const nn::Var& graph) const;

 private:
  int hidden_;
  nn::Var w_primary_;   // hidden x 1
  nn::Var w_context_;   // hidden x 1
  nn::Var w_product_;   // 1 x hidden
  nn::Var out_w_, out_b_;  // 4*hidden -> hidden
};

}  // namespace tkg
