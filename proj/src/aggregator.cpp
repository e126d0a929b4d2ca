#include "tkg/aggregator.hpp"

namespace tkg {

using nn::Var;

Aggregator::Aggregator(nn::ParameterStore& params, const EncodingConfig& config,
                       const std::string& scope)
    : hidden_(config.hidden) {
  w_primary_ = params.add(scope + ".similarity.primary", hidden_, 1,
                          nn::Init::XavierUniform);
  w_context_ = params.add(scope + ".similarity.context", hidden_, 1,
                          nn::Init::XavierUniform);
  w_product_ = params.add(scope + ".similarity.product", 1, hidden_,
                          nn::Init::XavierUniform);
  out_w_ = params.add(scope + ".out.weight", 4 * hidden_, hidden_,
                      nn::Init::XavierUniform);
  out_b_ = params.add(scope + ".out.bias", 1, hidden_, nn::Init::Zero);
}

Var Aggregator::trilinear(const Var& a, const Var& b) const {
  // S = (A w1) 1^T + 1 (B w2)^T + (A * w3) B^T
  Var cross = nn::matmul(nn::mul_rowvec(a, w_product_), nn::transpose(b));
  Var with_context = nn::add_rowvec(cross, nn::transpose(nn::matmul(b, w_context_)));
  return nn::add_colvec(with_context, nn::matmul(a, w_primary_));
}

Var Aggregator::aggregate(const Var& primary, const Var& context) const {
  const auto m = primary.rows();
  if (m == 0) return Var::constant(nn::Mat(0, hidden_), "empty_aggregate");

  Var attended;  // P
  Var self_attended;  // Q
  if (context.rows() == 0) {
    // Degenerate softmax over no entries: both mixtures are zero.
    attended = Var::constant(nn::Mat::Zero(m, hidden_), "empty_context");
    self_attended = Var::constant(nn::Mat::Zero(m, hidden_), "empty_context");
  } else {
    Var similarity = trilinear(primary, context);
    Var over_context = nn::softmax_rows(similarity);
    Var over_primary =
        nn::transpose(nn::softmax_rows(nn::transpose(similarity)));
    attended = nn::matmul(over_context, context);
    self_attended =
        nn::matmul(nn::matmul(over_primary, nn::transpose(over_primary)), primary);
  }
  Var features = nn::concat_cols({primary, attended, nn::mul(primary, attended),
                                  nn::mul(primary, self_attended)});
  return nn::linear(features, out_w_, out_b_);
}

std::pair<Var, Var> Aggregator::coattend(const Var& text, const Var& graph) const {
  return {aggregate(text, graph), aggregate(graph, text)};
}

}  // namespace tkg
