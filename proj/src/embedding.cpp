#include "tkg/embedding.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tkg {

void EncodingConfig::validate() const {
  if (hidden <= 0 || temporal <= 0 || event_type <= 0 || autoregressive <= 0 ||
      node_key <= 0 || word_dim <= 0) {
    throw std::runtime_error("encoding config: all dimensions must be positive");
  }
  if (temporal % 2 != 0) {
    throw std::runtime_error("encoding config: temporal width must be even");
  }
}

nn::Mat positional_encoding(int position, int dim) {
  if (position < 0) throw std::runtime_error("positional encoding: negative position");
  if (dim <= 0 || dim % 2 != 0) {
    throw std::runtime_error("positional encoding: dim must be positive and even");
  }
  nn::Mat row(1, dim);
  for (int i = 0; i < dim / 2; ++i) {
    double rate = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
    row(0, 2 * i) = std::sin(position * rate);
    row(0, 2 * i + 1) = std::cos(position * rate);
  }
  return row;
}

nn::Mat positional_encoding_rows(int count, int dim) {
  nn::Mat rows(count, dim);
  for (int p = 0; p < count; ++p) rows.row(p) = positional_encoding(p, dim);
  return rows;
}

nn::Mat temporal_embedding(Timestamp ts, const EncodingConfig& config) {
  if (config.temporal_mode == EncodingConfig::TemporalMode::Zero) {
    return nn::Mat::Zero(1, config.temporal);
  }
  int half = config.temporal / 2;
  nn::Mat out(1, config.temporal);
  out.leftCols(half) = positional_encoding(ts.game, half);
  out.rightCols(half) = positional_encoding(ts.event, half);
  return out;
}

namespace {

void load_word_vectors(nn::Mat& table, const Vocabulary& words,
                       const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word vector file: " + path);
  std::string line;
  bool first = true;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string token;
    row >> token;
    if (first) {
      first = false;
      // Optional "<count> <dim>" header.
      long maybe_dim = 0;
      std::istringstream probe(line);
      long maybe_count = 0;
      if (probe >> maybe_count >> maybe_dim && probe.eof() && maybe_dim == dim) continue;
    }
    if (!words.contains(token)) continue;
    int id = words.id(token);
    for (int d = 0; d < dim; ++d) {
      if (!(row >> table(id, d))) {
        throw std::runtime_error(path + ":" + std::to_string(line_number) +
                                 ": expected " + std::to_string(dim) + " values");
      }
    }
  }
}

}  // namespace

EmbeddingTable::EmbeddingTable(nn::ParameterStore& params, Vocabulary words,
                               const EncodingConfig& config,
                               const std::optional<std::string>& vector_file,
                               bool freeze_table, const Tokenizer& tokenizer)
    : words_(std::move(words)), tokenizer_(&tokenizer), hidden_(config.hidden) {
  config.validate();
  if (vector_file) {
    table_ = params.add("embeddings.word_table", words_.size(), config.word_dim,
                        nn::Init::Zero, !freeze_table);
    load_word_vectors(table_.mutable_value(), words_, *vector_file, config.word_dim);
  } else {
    table_ = params.add("embeddings.word_table", words_.size(), config.word_dim,
                        nn::Init::Normal, !freeze_table, 0.3);
  }
  table_.mutable_value().row(Vocabulary::kPad).setZero();
  projection_ = params.add("embeddings.text_projection.weight", config.word_dim,
                           config.hidden, nn::Init::XavierUniform);
  projection_b_ =
      params.add("embeddings.text_projection.bias", 1, config.hidden, nn::Init::Zero);
}

std::vector<int> EmbeddingTable::word_ids(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(words_.id(t));
  return ids;
}

nn::Var EmbeddingTable::project_ids(const std::vector<int>& ids) const {
  if (ids.empty()) return nn::Var::constant(nn::Mat(0, hidden_), "empty_tokens");
  return nn::linear(nn::gather_rows(table_, ids), projection_, projection_b_);
}

nn::Var EmbeddingTable::label_embedding(const std::string& label) const {
  if (label.empty()) return nn::Var::constant(nn::Mat::Zero(1, hidden_), "empty_label");
  auto ids = word_ids(tokenizer_->tokenize(label));
  if (ids.empty()) return nn::Var::constant(nn::Mat::Zero(1, hidden_), "empty_label");
  return nn::mean_over_rows(project_ids(ids));
}

}  // namespace tkg
