#include "tkg/encoders.hpp"

#include <cmath>

namespace tkg {

using nn::Var;

AttributeMatrices build_attribute_matrices(const BeliefGraph& graph,
                                           const EmbeddingTable& embeddings,
                                           const EncodingConfig& config) {
  AttributeMatrices out;
  const int attr_dim = config.hidden + config.temporal;

  auto attribute_row = [&](const std::string& label, Timestamp ts) {
    Var temporal = Var::constant(temporal_embedding(ts, config), "temporal");
    return nn::concat_cols({embeddings.label_embedding(label), temporal});
  };

  if (graph.node_count() == 0) {
    out.node_attrs = Var::constant(nn::Mat(0, attr_dim), "no_nodes");
  } else {
    std::vector<Var> rows;
    rows.reserve(graph.node_count());
    for (const auto& node : graph.nodes()) {
      rows.push_back(attribute_row(node.label, node.added_at));
    }
    out.node_attrs = nn::concat_rows(rows);
  }

  if (graph.edge_count() == 0) {
    out.edge_attrs = Var::constant(nn::Mat(0, attr_dim), "no_edges");
  } else {
    std::vector<Var> rows;
    rows.reserve(graph.edge_count());
    for (const auto& edge : graph.edges()) {
      rows.push_back(attribute_row(edge.label, edge.added_at));
      out.edge_index.emplace_back(edge.src, edge.dst);
    }
    out.edge_attrs = nn::concat_rows(rows);
  }
  return out;
}

namespace {

struct LinearInit {
  nn::ParameterStore& params;
  std::string scope;
  void make(const std::string& name, int in, int out, Var& w, Var& b) {
    w = params.add(scope + "." + name + ".weight", in, out, nn::Init::XavierUniform);
    b = params.add(scope + "." + name + ".bias", 1, out, nn::Init::Zero);
  }
  void make_norm(const std::string& name, int dim, Var& gamma, Var& beta) {
    gamma = params.add(scope + "." + name + ".gamma", 1, dim, nn::Init::One);
    beta = params.add(scope + "." + name + ".beta", 1, dim, nn::Init::Zero);
  }
};

// Single-head scaled dot-product attention; a null mask means all positions
// attend everywhere.
Var attention(const Var& query_input, const Var& memory, const Var& wq, const Var& bq,
              const Var& wk, const Var& bk, const Var& wv, const Var& bv,
              const Var& wo, const Var& bo, std::shared_ptr<const nn::Mat> mask) {
  Var q = nn::linear(query_input, wq, bq);
  Var k = nn::linear(memory, wk, bk);
  Var v = nn::linear(memory, wv, bv);
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var scores = nn::scale(nn::matmul(q, nn::transpose(k)), inv_sqrt);
  Var weights = nn::softmax_rows(scores, std::move(mask));
  return nn::linear(nn::matmul(weights, v), wo, bo);
}

}  // namespace

TextEncoder::TextEncoder(nn::ParameterStore& params, const EncodingConfig& config,
                         const std::string& scope)
    : hidden_(config.hidden) {
  LinearInit init{params, scope};
  convs_.resize(kConvLayers);
  for (int i = 0; i < kConvLayers; ++i) {
    std::string layer = "conv" + std::to_string(i);
    init.make_norm(layer + ".norm", hidden_, convs_[i].norm_gamma, convs_[i].norm_beta);
    convs_[i].depthwise = params.add(scope + "." + layer + ".depthwise.weight", kKernel,
                                     hidden_, nn::Init::XavierUniform);
    convs_[i].depthwise_b =
        params.add(scope + "." + layer + ".depthwise.bias", 1, hidden_, nn::Init::Zero);
    init.make(layer + ".pointwise", hidden_, hidden_, convs_[i].pointwise,
              convs_[i].pointwise_b);
  }
  init.make_norm("attn.norm", hidden_, attn_norm_gamma_, attn_norm_beta_);
  init.make("attn.query", hidden_, hidden_, wq_, bq_);
  init.make("attn.key", hidden_, hidden_, wk_, bk_);
  init.make("attn.value", hidden_, hidden_, wv_, bv_);
  init.make("attn.out", hidden_, hidden_, wo_, bo_);
  init.make_norm("ffn.norm", hidden_, ffn_norm_gamma_, ffn_norm_beta_);
  init.make("ffn.lin1", hidden_, hidden_, ffn_w1_, ffn_b1_);
  init.make("ffn.lin2", hidden_, hidden_, ffn_w2_, ffn_b2_);
  init.make_norm("out.norm", hidden_, out_norm_gamma_, out_norm_beta_);
}

Var TextEncoder::encode(const EmbeddingTable& embeddings,
                        const std::vector<int>& ids) const {
  if (ids.empty()) return Var::constant(nn::Mat(0, hidden_), "empty_text");

  Var x = embeddings.project_ids(ids);
  x = nn::add_const(x, positional_encoding_rows(static_cast<int>(ids.size()), hidden_));

  for (const auto& conv : convs_) {
    Var h = nn::layer_norm(x, conv.norm_gamma, conv.norm_beta);
    h = nn::depthwise_conv1d(h, conv.depthwise, conv.depthwise_b);
    h = nn::relu(nn::linear(h, conv.pointwise, conv.pointwise_b));
    x = nn::add(x, h);
  }

  Var h = nn::layer_norm(x, attn_norm_gamma_, attn_norm_beta_);
  h = attention(h, h, wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_, nullptr);
  x = nn::add(x, h);

  h = nn::layer_norm(x, ffn_norm_gamma_, ffn_norm_beta_);
  h = nn::linear(nn::relu(nn::linear(h, ffn_w1_, ffn_b1_)), ffn_w2_, ffn_b2_);
  x = nn::add(x, h);

  return nn::layer_norm(x, out_norm_gamma_, out_norm_beta_);
}

GraphEncoder::GraphEncoder(nn::ParameterStore& params, const EncodingConfig& config,
                           const std::string& scope)
    : attr_dim_(config.hidden + config.temporal), hidden_(config.hidden) {
  LinearInit init{params, scope};
  init.make("skip", attr_dim_, attr_dim_, skip_w_, skip_b_);
  init.make("query", attr_dim_, attr_dim_, query_w_, query_b_);
  init.make("key", attr_dim_, attr_dim_, key_w_, key_b_);
  init.make("value", attr_dim_, attr_dim_, value_w_, value_b_);
  init.make("edge", attr_dim_, attr_dim_, edge_w_, edge_b_);
  init.make("out", attr_dim_, hidden_, out_w_, out_b_);
}

Var GraphEncoder::encode(const AttributeMatrices& attrs) const {
  const int n = static_cast<int>(attrs.node_attrs.rows());
  if (n == 0) return Var::constant(nn::Mat(0, hidden_), "empty_graph");

  Var skip = nn::linear(attrs.node_attrs, skip_w_, skip_b_);
  Var queries = nn::linear(attrs.node_attrs, query_w_, query_b_);
  Var keys = nn::linear(attrs.node_attrs, key_w_, key_b_);
  Var values = nn::linear(attrs.node_attrs, value_w_, value_b_);
  Var edge_terms;
  if (!attrs.edge_index.empty()) {
    edge_terms = nn::linear(attrs.edge_attrs, edge_w_, edge_b_);
  }

  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(attr_dim_));
  std::vector<Var> rows;
  rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    // Incoming edges src -> i carry the messages.
    std::vector<Var> key_rows, value_rows;
    for (std::size_t e = 0; e < attrs.edge_index.size(); ++e) {
      if (attrs.edge_index[e].second != i) continue;
      int src = attrs.edge_index[e].first;
      Var edge_term = nn::slice_rows(edge_terms, static_cast<int>(e), 1);
      key_rows.push_back(nn::add(nn::slice_rows(keys, src, 1), edge_term));
      value_rows.push_back(nn::add(nn::slice_rows(values, src, 1), edge_term));
    }
    Var row = nn::slice_rows(skip, i, 1);
    if (!key_rows.empty()) {
      Var k = nn::concat_rows(key_rows);
      Var v = nn::concat_rows(value_rows);
      Var scores = nn::scale(
          nn::matmul(nn::slice_rows(queries, i, 1), nn::transpose(k)), inv_sqrt);
      Var message = nn::matmul(nn::softmax_rows(scores), v);
      row = nn::add(row, message);
    }
    rows.push_back(row);
  }
  return nn::linear(nn::relu(nn::concat_rows(rows)), out_w_, out_b_);
}

}  // namespace tkg
