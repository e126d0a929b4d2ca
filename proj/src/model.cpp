#include "tkg/model.hpp"

#include <stdexcept>

namespace tkg {

using nn::Var;

GraphUpdateModel::GraphUpdateModel(ModelConfig config, Vocabulary words,
                                   Vocabulary labels)
    : config_(std::move(config)), labels_(std::move(labels)), params_(config_.seed) {
  config_.enc.validate();
  embeddings_ = std::make_unique<EmbeddingTable>(params_, std::move(words), config_.enc,
                                                 config_.word_vector_file,
                                                 config_.freeze_word_table);
  text_encoder_ = std::make_unique<TextEncoder>(params_, config_.enc);
  graph_encoder_ = std::make_unique<GraphEncoder>(params_, config_.enc);
  aggregator_ = std::make_unique<Aggregator>(params_, config_.enc);
  decoder_ = std::make_unique<EventDecoder>(params_, config_.enc, labels_.size());
  loss_weights_ = params_.add("loss_weights.s", 1, 4, nn::Init::Zero);
}

AggregatedReps GraphUpdateModel::aggregate(const Var& obs_enc, const Var& act_enc,
                                           const Var& node_embeddings) const {
  AggregatedReps reps;
  auto [og, go] = aggregator_->coattend(obs_enc, node_embeddings);
  auto [ag, ga] = aggregator_->coattend(act_enc, node_embeddings);
  reps.obs_to_graph = og;
  reps.graph_to_obs = go;
  reps.action_to_graph = ag;
  reps.graph_to_action = ga;
  return reps;
}

std::vector<GraphUpdateModel::PositionOutput> GraphUpdateModel::teacher_forward(
    const Datapoint& dp) const {
  if (dp.target_events.size() < 2 ||
      dp.target_events.front().kind != EventKind::Start ||
      dp.target_events.back().kind != EventKind::End) {
    throw std::runtime_error("teacher_forward: targets must be start/end bracketed");
  }

  Var obs_enc = text_encoder_->encode(*embeddings_, embeddings_->word_ids(dp.obs_tokens));
  Var act_enc =
      text_encoder_->encode(*embeddings_, embeddings_->word_ids(dp.action_tokens));

  BeliefGraph graph;
  for (const auto& e : dp.prior_events) apply_event(graph, e, ApplyMode::Strict);

  std::vector<PositionOutput> outputs;
  std::vector<Var> rows;
  const int positions = static_cast<int>(dp.target_events.size()) - 1;
  outputs.reserve(positions);
  for (int k = 0; k < positions; ++k) {
    const GraphEvent& current = dp.target_events[k];
    rows.push_back(decoder_->input_row(
        decoder_->embed_event(current, graph, *embeddings_), k));
    apply_event(graph, current, ApplyMode::Strict);

    Var node_embeddings =
        graph_encoder_->encode(build_attribute_matrices(graph, *embeddings_, config_.enc));
    AggregatedReps memories = aggregate(obs_enc, act_enc, node_embeddings);
    Var h_dec = decoder_->decode_hidden(rows, memories);

    const GraphEvent& target = dp.target_events[k + 1];
    ArgMask mask = arg_mask(target.kind);

    PositionOutput out;
    out.target_kind = target.kind;
    out.type_target = static_cast<int>(target.kind);
    auto type = decoder_->type_head(h_dec, target.kind, nullptr);
    out.type_logits = type.logits;
    out.type_dist = type.dist;

    Var h_auto = type.h_auto;
    if (mask.src) {
      auto src = decoder_->node_head(h_auto, node_embeddings,
                                     EventDecoder::NodeRole::Source, target.src);
      out.src_logits = src.logits;
      out.src_dist = src.dist;
      out.src_target = target.src;
      h_auto = src.h_auto;
    }
    if (mask.dst) {
      auto dst = decoder_->node_head(h_auto, node_embeddings,
                                     EventDecoder::NodeRole::Destination, target.dst);
      out.dst_logits = dst.logits;
      out.dst_dist = dst.dist;
      out.dst_target = target.dst;
      h_auto = dst.h_auto;
    }
    if (mask.label) {
      auto label = decoder_->label_head(h_auto);
      out.label_logits = label.logits;
      out.label_dist = label.dist;
      out.label_target = labels_.id(target.label);
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

std::vector<GraphEvent> GraphUpdateModel::generate(
    const std::vector<std::string>& obs_tokens,
    const std::vector<std::string>& action_tokens, BeliefGraph& graph, int t_g,
    std::optional<int> max_events) const {
  const int cap = max_events.value_or(config_.max_events);

  Var obs_enc = text_encoder_->encode(*embeddings_, embeddings_->word_ids(obs_tokens));
  Var act_enc =
      text_encoder_->encode(*embeddings_, embeddings_->word_ids(action_tokens));

  std::vector<GraphEvent> generated;
  std::vector<Var> rows;
  rows.push_back(decoder_->input_row(
      decoder_->embed_event(GraphEvent::start({t_g, 0}), graph, *embeddings_), 0));

  while (true) {
    Var node_embeddings =
        graph_encoder_->encode(build_attribute_matrices(graph, *embeddings_, config_.enc));
    AggregatedReps memories = aggregate(obs_enc, act_enc, node_embeddings);
    Var h_dec = decoder_->decode_hidden(rows, memories);

    EventDecoder::TypeHead type;
    if (static_cast<int>(generated.size()) >= cap) {
      type = decoder_->type_head(h_dec, EventKind::End, nullptr);
    } else {
      std::array<bool, kNumEventKinds> allowed{};
      bool has_nodes = graph.node_count() > 0;
      allowed[static_cast<int>(EventKind::End)] = true;
      allowed[static_cast<int>(EventKind::Start)] = false;
      allowed[static_cast<int>(EventKind::NodeAdd)] = true;
      allowed[static_cast<int>(EventKind::NodeDelete)] = has_nodes;
      allowed[static_cast<int>(EventKind::EdgeAdd)] = has_nodes;
      allowed[static_cast<int>(EventKind::EdgeDelete)] = has_nodes;
      type = decoder_->type_head(h_dec, std::nullopt, &allowed);
    }
    EventKind kind = static_cast<EventKind>(type.chosen);
    if (kind == EventKind::End) break;

    ArgMask mask = arg_mask(kind);
    Var h_auto = type.h_auto;
    GraphEvent event;
    event.kind = kind;
    event.ts = {t_g, static_cast<int>(generated.size())};
    if (mask.src) {
      auto src = decoder_->node_head(h_auto, node_embeddings,
                                     EventDecoder::NodeRole::Source, std::nullopt);
      event.src = src.chosen;
      h_auto = src.h_auto;
    }
    if (mask.dst) {
      auto dst = decoder_->node_head(h_auto, node_embeddings,
                                     EventDecoder::NodeRole::Destination, std::nullopt);
      event.dst = dst.chosen;
      h_auto = dst.h_auto;
    }
    if (mask.label) {
      auto label = decoder_->label_head(h_auto);
      event.label = labels_.token(label.chosen);
    }

    rows.push_back(decoder_->input_row(
        decoder_->embed_event(event, graph, *embeddings_),
        static_cast<int>(rows.size())));
    apply_event(graph, event, ApplyMode::Lenient);
    generated.push_back(std::move(event));
  }
  return generated;
}

}  // namespace tkg
