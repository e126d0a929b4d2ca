#include "tkg/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace tkg {

using nn::Var;

namespace {

int argmax_row(const nn::Mat& row) {
  int best = 0;
  for (Eigen::Index c = 1; c < row.cols(); ++c) {
    if (row(0, c) > row(0, best)) best = static_cast<int>(c);
  }
  return best;
}

}  // namespace

EventDecoder::EventDecoder(nn::ParameterStore& params, const EncodingConfig& config,
                           int label_vocab_size, const std::string& scope)
    : hidden_(config.hidden),
      event_dim_(config.event_type + 3 * config.hidden),
      auto_dim_(config.autoregressive),
      node_key_(config.node_key),
      label_vocab_size_(label_vocab_size) {
  auto lin = [&](const std::string& name, int in, int out, Var& w, Var& b) {
    w = params.add(scope + "." + name + ".weight", in, out, nn::Init::XavierUniform);
    b = params.add(scope + "." + name + ".bias", 1, out, nn::Init::Zero);
  };
  auto norm = [&](const std::string& name, int dim, Var& gamma, Var& beta) {
    gamma = params.add(scope + "." + name + ".gamma", 1, dim, nn::Init::One);
    beta = params.add(scope + "." + name + ".beta", 1, dim, nn::Init::Zero);
  };

  type_embedding_ = params.add(scope + ".type_embedding", kNumEventKinds,
                               config.event_type, nn::Init::Normal, true, 0.3);
  lin("input", event_dim_, hidden_, input_w_, input_b_);

  norm("self_attn.norm", hidden_, self_norm_gamma_, self_norm_beta_);
  lin("self_attn.query", hidden_, hidden_, self_wq_, self_bq_);
  lin("self_attn.key", hidden_, hidden_, self_wk_, self_bk_);
  lin("self_attn.value", hidden_, hidden_, self_wv_, self_bv_);
  lin("self_attn.out", hidden_, hidden_, self_wo_, self_bo_);
  static const char* kMemoryNames[4] = {"obs_to_graph", "graph_to_obs",
                                        "action_to_graph", "graph_to_action"};
  for (int m = 0; m < 4; ++m) {
    std::string mem = std::string("cross_attn.") + kMemoryNames[m];
    norm(mem + ".norm", hidden_, cross_[m].norm_gamma, cross_[m].norm_beta);
    lin(mem + ".query", hidden_, hidden_, cross_[m].wq, cross_[m].bq);
    lin(mem + ".key", hidden_, hidden_, cross_[m].wk, cross_[m].bk);
    lin(mem + ".value", hidden_, hidden_, cross_[m].wv, cross_[m].bv);
    lin(mem + ".out", hidden_, hidden_, cross_[m].wo, cross_[m].bo);
  }
  norm("ffn.norm", hidden_, ffn_norm_gamma_, ffn_norm_beta_);
  lin("ffn.lin1", hidden_, hidden_, ffn_w1_, ffn_b1_);
  lin("ffn.lin2", hidden_, hidden_, ffn_w2_, ffn_b2_);
  norm("out.norm", hidden_, out_norm_gamma_, out_norm_beta_);

  lin("type_head.lin0", hidden_, hidden_, type_w0_, type_b0_);
  norm("type_head.norm0", hidden_, type_g0_, type_be0_);
  lin("type_head.lin1", hidden_, hidden_, type_w1_, type_b1_);
  norm("type_head.norm1", hidden_, type_g1_, type_be1_);
  lin("type_head.lin2", hidden_, kNumEventKinds, type_w2_, type_b2_);
  lin("type_head.dec", hidden_, auto_dim_, type_dec_w_, type_dec_b_);
  lin("type_head.auto0", kNumEventKinds, auto_dim_, type_auto_w0_, type_auto_b0_);
  lin("type_head.auto1", auto_dim_, auto_dim_, type_auto_w1_, type_auto_b1_);

  auto node_head_params = [&](const std::string& role, NodeHeadParams& head) {
    lin(role + ".key", hidden_, node_key_, head.key_w, head.key_b);
    lin(role + ".query0", auto_dim_, auto_dim_, head.query_w0, head.query_b0);
    lin(role + ".query1", auto_dim_, node_key_, head.query_w1, head.query_b1);
    head.auto_w = params.add(scope + "." + role + ".auto.weight", node_key_,
                             auto_dim_, nn::Init::XavierUniform);
  };
  node_head_params("src_head", src_head_);
  node_head_params("dst_head", dst_head_);

  lin("label_head.lin0", auto_dim_, auto_dim_, label_w0_, label_b0_);
  norm("label_head.norm0", auto_dim_, label_g0_, label_be0_);
  lin("label_head.lin1", auto_dim_, auto_dim_, label_w1_, label_b1_);
  norm("label_head.norm1", auto_dim_, label_g1_, label_be1_);
  lin("label_head.lin2", auto_dim_, label_vocab_size_, label_w2_, label_b2_);
}

Var EventDecoder::project_label_segment(const std::string& label,
                                        const EmbeddingTable& embeddings,
                                        bool active) const {
  if (!active) return Var::constant(nn::Mat::Zero(1, hidden_), "masked_segment");
  return embeddings.label_embedding(label);
}

Var EventDecoder::embed_event(const GraphEvent& event, const BeliefGraph& graph,
                              const EmbeddingTable& embeddings) const {
  if (!well_formed(event)) {
    throw std::runtime_error("embed_event: malformed event arguments");
  }
  ArgMask mask = arg_mask(event.kind);
  if (mask.src && !graph.has_node(event.src)) {
    throw std::runtime_error("embed_event: dangling source index");
  }
  if (mask.dst && !graph.has_node(event.dst)) {
    throw std::runtime_error("embed_event: dangling destination index");
  }

  Var type_row = nn::gather_rows(type_embedding_, {static_cast<int>(event.kind)});
  Var src_row = project_label_segment(
      mask.src ? graph.node(event.src).label : "", embeddings, mask.src);
  Var dst_row = project_label_segment(
      mask.dst ? graph.node(event.dst).label : "", embeddings, mask.dst);
  Var label_row = project_label_segment(event.label, embeddings, mask.label);
  return nn::concat_cols({type_row, src_row, dst_row, label_row});
}

Var EventDecoder::input_row(const Var& event_embedding, int pos) const {
  Var projected = nn::linear(event_embedding, input_w_, input_b_);
  return nn::add_const(projected, positional_encoding(pos, hidden_));
}

Var EventDecoder::decode_hidden(const std::vector<Var>& input_rows,
                                const AggregatedReps& memories) const {
  if (input_rows.empty()) {
    throw std::runtime_error("decode_hidden: at least the start event is required");
  }
  const int length = static_cast<int>(input_rows.size());
  Var x = nn::concat_rows(input_rows);

  // Causal self-attention.
  {
    auto causal = std::make_shared<nn::Mat>(nn::Mat::Zero(length, length));
    for (int r = 0; r < length; ++r) {
      for (int c = 0; c <= r; ++c) (*causal)(r, c) = 1.0;
    }
    Var h = nn::layer_norm(x, self_norm_gamma_, self_norm_beta_);
    Var q = nn::linear(h, self_wq_, self_bq_);
    Var k = nn::linear(h, self_wk_, self_bk_);
    Var v = nn::linear(h, self_wv_, self_bv_);
    Var scores = nn::scale(nn::matmul(q, nn::transpose(k)),
                           1.0 / std::sqrt(static_cast<double>(hidden_)));
    Var weights = nn::softmax_rows(scores, causal);
    Var attended = nn::linear(nn::matmul(weights, v), self_wo_, self_bo_);
    x = nn::add(x, attended);
  }

  // One cross-attention sub-layer per memory, in a fixed order.
  const Var* memory_inputs[4] = {&memories.obs_to_graph, &memories.graph_to_obs,
                                 &memories.action_to_graph, &memories.graph_to_action};
  for (int m = 0; m < 4; ++m) {
    const CrossAttention& layer = cross_[m];
    Var h = nn::layer_norm(x, layer.norm_gamma, layer.norm_beta);
    Var attended;
    if (memory_inputs[m]->rows() == 0) {
      // Empty memory: the sub-layer reduces to its output bias.
      attended = nn::add_rowvec(
          Var::constant(nn::Mat::Zero(length, hidden_), "empty_memory"), layer.bo);
    } else {
      Var q = nn::linear(h, layer.wq, layer.bq);
      Var k = nn::linear(*memory_inputs[m], layer.wk, layer.bk);
      Var v = nn::linear(*memory_inputs[m], layer.wv, layer.bv);
      Var scores = nn::scale(nn::matmul(q, nn::transpose(k)),
                             1.0 / std::sqrt(static_cast<double>(hidden_)));
      attended = nn::linear(nn::matmul(nn::softmax_rows(scores), v), layer.wo, layer.bo);
    }
    x = nn::add(x, attended);
  }

  {
    Var h = nn::layer_norm(x, ffn_norm_gamma_, ffn_norm_beta_);
    h = nn::linear(nn::relu(nn::linear(h, ffn_w1_, ffn_b1_)), ffn_w2_, ffn_b2_);
    x = nn::add(x, h);
  }
  x = nn::layer_norm(x, out_norm_gamma_, out_norm_beta_);
  return nn::slice_rows(x, length - 1, 1);
}

EventDecoder::TypeHead EventDecoder::type_head(
    const Var& h_dec, std::optional<EventKind> forced,
    const std::array<bool, kNumEventKinds>* allowed) const {
  TypeHead out;
  Var h0 = nn::relu(nn::layer_norm(nn::linear(h_dec, type_w0_, type_b0_), type_g0_, type_be0_));
  Var h1 = nn::relu(nn::layer_norm(nn::linear(h0, type_w1_, type_b1_), type_g1_, type_be1_));
  out.logits = nn::linear(h1, type_w2_, type_b2_);
  out.dist = nn::softmax_rows(out.logits);

  if (forced) {
    out.chosen = static_cast<int>(*forced);
  } else if (allowed) {
    int best = -1;
    for (int k = 0; k < kNumEventKinds; ++k) {
      if (!(*allowed)[k]) continue;
      if (best < 0 || out.logits.value()(0, k) > out.logits.value()(0, best)) best = k;
    }
    if (best < 0) throw std::runtime_error("type_head: no kind permitted");
    out.chosen = best;
  } else {
    out.chosen = argmax_row(out.logits.value());
  }

  nn::Mat onehot = nn::Mat::Zero(1, kNumEventKinds);
  onehot(0, out.chosen) = 1.0;
  Var choice = nn::linear(
      nn::relu(nn::linear(Var::constant(onehot, "kind_onehot"), type_auto_w0_,
                          type_auto_b0_)),
      type_auto_w1_, type_auto_b1_);
  out.h_auto = nn::add(nn::linear(h_dec, type_dec_w_, type_dec_b_), choice);
  return out;
}

EventDecoder::NodeHead EventDecoder::node_head(const Var& h_auto,
                                               const Var& node_embeddings,
                                               NodeRole role,
                                               std::optional<int> forced) const {
  const int n = static_cast<int>(node_embeddings.rows());
  if (n == 0) throw std::runtime_error("node_head: no nodes to point at");
  const NodeHeadParams& head = role == NodeRole::Source ? src_head_ : dst_head_;

  Var keys = nn::linear(node_embeddings, head.key_w, head.key_b);  // N x node_key
  Var query = nn::linear(
      nn::relu(nn::linear(h_auto, head.query_w0, head.query_b0)), head.query_w1,
      head.query_b1);  // 1 x node_key

  NodeHead out;
  out.logits = nn::matmul(query, nn::transpose(keys));  // 1 x N
  out.dist = nn::softmax_rows(out.logits);
  out.chosen = forced ? *forced : argmax_row(out.logits.value());
  if (out.chosen < 0 || out.chosen >= n) {
    throw std::runtime_error("node_head: chosen index out of range");
  }

  Var chosen_key = nn::slice_rows(keys, out.chosen, 1);
  Var mean_key = nn::mean_over_rows(keys);
  Var delta = nn::matmul(nn::sub(chosen_key, mean_key), head.auto_w);
  out.h_auto = nn::add(h_auto, delta);
  return out;
}

EventDecoder::LabelHead EventDecoder::label_head(const Var& h_auto) const {
  LabelHead out;
  Var h0 = nn::relu(
      nn::layer_norm(nn::linear(h_auto, label_w0_, label_b0_), label_g0_, label_be0_));
  Var h1 = nn::relu(
      nn::layer_norm(nn::linear(h0, label_w1_, label_b1_), label_g1_, label_be1_));
  out.logits = nn::linear(h1, label_w2_, label_b2_);
  out.dist = nn::softmax_rows(out.logits);
  out.chosen = argmax_row(out.logits.value());
  return out;
}

}  // namespace tkg
