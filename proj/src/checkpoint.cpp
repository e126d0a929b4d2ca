#include "tkg/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace tkg {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'T', 'K', 'G', '1'};

[[noreturn]] void fail(const std::string& message) {
  throw std::runtime_error("checkpoint: " + message);
}

json config_to_json(const ModelConfig& config) {
  return {{"hidden", config.enc.hidden},
          {"temporal", config.enc.temporal},
          {"event_type", config.enc.event_type},
          {"autoregressive", config.enc.autoregressive},
          {"node_key", config.enc.node_key},
          {"word_dim", config.enc.word_dim},
          {"temporal_mode",
           config.enc.temporal_mode == EncodingConfig::TemporalMode::Zero ? "zero"
                                                                          : "sinusoidal"},
          {"max_events", config.max_events},
          {"freeze_word_table", config.freeze_word_table},
          {"seed", config.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig config;
  config.enc.hidden = j.at("hidden").get<int>();
  config.enc.temporal = j.at("temporal").get<int>();
  config.enc.event_type = j.at("event_type").get<int>();
  config.enc.autoregressive = j.at("autoregressive").get<int>();
  config.enc.node_key = j.at("node_key").get<int>();
  config.enc.word_dim = j.at("word_dim").get<int>();
  config.enc.temporal_mode = j.at("temporal_mode").get<std::string>() == "zero"
                                 ? EncodingConfig::TemporalMode::Zero
                                 : EncodingConfig::TemporalMode::Sinusoidal;
  config.max_events = j.at("max_events").get<int>();
  config.freeze_word_table = j.at("freeze_word_table").get<bool>();
  config.seed = j.at("seed").get<unsigned>();
  return config;
}

}  // namespace

void save_checkpoint(const std::string& path, const GraphUpdateModel& model) {
  json header;
  header["schema_version"] = 1;
  header["config"] = config_to_json(model.config());
  header["words"] = model.words().entries();
  header["labels"] = model.labels().entries();
  json tensors = json::array();
  for (const auto& entry : model.params().entries()) {
    tensors.push_back({{"name", entry.name},
                       {"rows", entry.var.rows()},
                       {"cols", entry.var.cols()}});
  }
  header["tensors"] = tensors;
  std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  std::uint64_t header_size = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_size), sizeof(header_size));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& entry : model.params().entries()) {
    const auto& value = entry.var.value();
    out.write(reinterpret_cast<const char*>(value.data()),
              static_cast<std::streamsize>(sizeof(double) * value.size()));
  }
  if (!out) fail("write failed for " + path);
}

std::unique_ptr<GraphUpdateModel> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
    fail(path + " is not a checkpoint file");
  }
  std::uint64_t header_size = 0;
  in.read(reinterpret_cast<char*>(&header_size), sizeof(header_size));
  std::string header_text(header_size, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_size));
  if (!in) fail("truncated header in " + path);

  json header = json::parse(header_text);
  if (header.at("schema_version").get<int>() != 1) {
    fail("unsupported checkpoint schema version");
  }
  ModelConfig config = config_from_json(header.at("config"));
  config.word_vector_file = std::nullopt;  // values come from the blob
  Vocabulary words(header.at("words").get<std::vector<std::string>>());
  Vocabulary labels(header.at("labels").get<std::vector<std::string>>());
  auto model = std::make_unique<GraphUpdateModel>(config, words, labels);

  std::size_t loaded = 0;
  for (const auto& t : header.at("tensors")) {
    std::string name = t.at("name").get<std::string>();
    Eigen::Index rows = t.at("rows").get<Eigen::Index>();
    Eigen::Index cols = t.at("cols").get<Eigen::Index>();
    if (!model->params().contains(name)) fail("unexpected tensor " + name);
    nn::Var var = model->params().find(name);
    if (var.rows() != rows || var.cols() != cols) {
      fail("shape mismatch for tensor " + name);
    }
    in.read(reinterpret_cast<char*>(var.mutable_value().data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) fail("truncated data for tensor " + name);
    ++loaded;
  }
  if (loaded != model->params().entries().size()) {
    fail("checkpoint tensor set does not cover the model");
  }
  return model;
}

void save_vocabulary_dump(const std::string& path, const GraphUpdateModel& model) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path);
  json j = {{"words", model.words().entries()}, {"labels", model.labels().entries()}};
  out << j.dump(2) << "\n";
}

}  // namespace tkg
