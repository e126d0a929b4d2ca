#include "tkg/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tkg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
  throw std::runtime_error(message);
}

json triples_to_json(const std::set<RdfTriple>& triples) {
  json out = json::array();
  for (const auto& t : triples) out.push_back({t.subject, t.object, t.relation});
  return out;
}

std::set<RdfTriple> triples_from_json(const json& j) {
  std::set<RdfTriple> out;
  for (const auto& t : j) {
    if (!t.is_array() || t.size() != 3) fail("triple must be [subject, object, relation]");
    out.insert({t.at(0).get<std::string>(), t.at(1).get<std::string>(),
                t.at(2).get<std::string>()});
  }
  return out;
}

json event_to_json(const GraphEvent& e) {
  return json::array({to_string(e.kind), e.src, e.dst, e.label, e.ts.game, e.ts.event});
}

GraphEvent event_from_json(const json& j) {
  if (!j.is_array() || j.size() != 6) fail("event must be [kind, src, dst, label, tg, te]");
  auto kind = event_kind_from_string(j.at(0).get<std::string>());
  if (!kind) fail("unknown event kind: " + j.at(0).get<std::string>());
  GraphEvent e;
  e.kind = *kind;
  e.src = j.at(1).get<int>();
  e.dst = j.at(2).get<int>();
  e.label = j.at(3).get<std::string>();
  e.ts = {j.at(4).get<int>(), j.at(5).get<int>()};
  return e;
}

}  // namespace

std::vector<RawExample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open dataset file: " + path);

  std::vector<RawExample> examples;
  std::set<std::tuple<std::string, int, int>> keys;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = [&] { return path + ":" + std::to_string(line_number) + ": "; };
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      fail(where() + "invalid json: " + e.what());
    }
    try {
      RawExample ex;
      ex.game_id = j.at("game_id").get<std::string>();
      ex.walkthrough_step = j.at("walkthrough_step").get<int>();
      ex.random_step = j.at("random_step").get<int>();
      ex.observation = j.at("observation").get<std::string>();
      ex.previous_action = j.at("previous_action").get<std::string>();
      ex.previous_graph = triples_from_json(j.at("previous_graph"));
      for (const auto& c : j.at("target_commands")) {
        ex.target_commands.push_back(parse_command_or_throw(c.get<std::string>()));
      }
      if (ex.walkthrough_step < 0 || ex.random_step < 0) {
        fail("steps must be non-negative");
      }
      auto key = std::make_tuple(ex.game_id, ex.walkthrough_step, ex.random_step);
      if (!keys.insert(key).second) {
        fail("duplicate (game_id, walkthrough_step, random_step)");
      }
      examples.push_back(std::move(ex));
    } catch (const std::exception& e) {
      fail(where() + e.what());
    }
  }
  return examples;
}

void save_dataset(const std::string& path, std::span<const RawExample> examples) {
  std::ofstream out(path);
  if (!out) fail("cannot write dataset file: " + path);
  for (const auto& ex : examples) {
    json cmds = json::array();
    for (const auto& c : ex.target_commands) cmds.push_back(format_command(c));
    json j = {{"game_id", ex.game_id},
              {"walkthrough_step", ex.walkthrough_step},
              {"random_step", ex.random_step},
              {"observation", ex.observation},
              {"previous_action", ex.previous_action},
              {"previous_graph", triples_to_json(ex.previous_graph)},
              {"target_commands", cmds}};
    out << j.dump() << "\n";
  }
}

DatasetStats compute_stats(std::span<const RawExample> examples,
                           const Tokenizer& tokenizer) {
  DatasetStats stats;
  stats.example_count = examples.size();
  std::set<std::string> node_labels;
  std::set<std::string> edge_labels;
  double token_sum = 0, command_sum = 0, edge_sum = 0;
  for (const auto& ex : examples) {
    token_sum += static_cast<double>(tokenizer.tokenize(ex.observation).size());
    command_sum += static_cast<double>(ex.target_commands.size());
    edge_sum += static_cast<double>(ex.previous_graph.size());
    for (const auto& t : ex.previous_graph) {
      node_labels.insert(t.subject);
      node_labels.insert(t.object);
      edge_labels.insert(t.relation);
    }
    for (const auto& c : ex.target_commands) {
      node_labels.insert(c.n1);
      node_labels.insert(c.n2);
      edge_labels.insert(c.r);
    }
  }
  if (!examples.empty()) {
    stats.avg_observation_tokens = token_sum / static_cast<double>(examples.size());
    stats.avg_commands = command_sum / static_cast<double>(examples.size());
    stats.avg_connections = edge_sum / static_cast<double>(examples.size());
  }
  stats.node_label_count = node_labels.size();
  stats.edge_label_count = edge_labels.size();
  return stats;
}

std::vector<UpdateCommand> sort_commands(std::vector<UpdateCommand> commands) {
  std::stable_sort(commands.begin(), commands.end(),
                   [](const UpdateCommand& a, const UpdateCommand& b) {
                     bool a_del = a.op == UpdateCommand::Op::Delete;
                     bool b_del = b.op == UpdateCommand::Op::Delete;
                     if (a_del != b_del) return a_del;
                     return std::tie(a.n1, a.n2, a.r) < std::tie(b.n1, b.n2, b.r);
                   });
  return commands;
}

namespace {

// Replay cursor for one chain of steps; copied when a random branch forks off
// the walkthrough.
struct ReplayState {
  BeliefGraph graph;
  std::vector<GraphEvent> events;
  int next_t_g = 0;
};

void check_sync(const ReplayState& state, const RawExample& ex, const NodePolicy& policy) {
  std::set<RdfTriple> have = policy.multi_mode
                                 ? merge_colored_nodes(state.graph, policy.colors)
                                 : extract_triples(state.graph);
  if (have != ex.previous_graph) {
    std::ostringstream out;
    out << "replay desynchronized from previous_graph at game " << ex.game_id
        << " walkthrough_step " << ex.walkthrough_step << " random_step "
        << ex.random_step << ": replay has " << have.size() << " triples, gold has "
        << ex.previous_graph.size();
    fail(out.str());
  }
}

Datapoint make_datapoint(ReplayState& state, const RawExample& ex,
                         const Tokenizer& tokenizer, const NodePolicy& policy) {
  check_sync(state, ex, policy);

  Datapoint dp;
  dp.game_id = ex.game_id;
  dp.walkthrough_step = ex.walkthrough_step;
  dp.random_step = ex.random_step;
  dp.t_g = state.next_t_g;
  dp.obs_tokens = tokenizer.tokenize(ex.observation);
  dp.action_tokens = tokenizer.tokenize(ex.previous_action);
  dp.prior_events = state.events;
  dp.previous_graph = ex.previous_graph;
  dp.target_commands = sort_commands(ex.target_commands);

  int counter = 0;
  auto step_events = commands_to_events(dp.target_commands, state.graph, dp.t_g,
                                        counter, policy, ApplyMode::Strict);

  dp.target_events.push_back(GraphEvent::start({dp.t_g, 0}));
  dp.target_events.insert(dp.target_events.end(), step_events.begin(),
                          step_events.end());
  dp.target_events.push_back(GraphEvent::end({dp.t_g, counter}));

  state.events.insert(state.events.end(), step_events.begin(), step_events.end());
  state.next_t_g += 1;
  return dp;
}

}  // namespace

PreprocessedData build_datapoints(std::vector<RawExample> examples,
                                  const Tokenizer& tokenizer,
                                  const PreprocessOptions& options) {
  PreprocessedData out;
  out.multi_mode = options.multi_mode;
  out.policy.exit_labels = options.exit_labels;
  out.policy.state_labels = options.state_labels;
  out.policy.colors = options.colors;
  out.policy.multi_mode = options.multi_mode;
  if (options.derive_state_labels) {
    for (const auto& ex : examples) {
      for (const auto& c : ex.target_commands) {
        if (c.r == kColorEdgeLabel) out.policy.state_labels.insert(c.n2);
      }
      for (const auto& t : ex.previous_graph) {
        if (t.relation == kColorEdgeLabel) out.policy.state_labels.insert(t.object);
      }
    }
  }

  // Group by game, order steps.
  std::map<std::string, std::vector<RawExample>> games;
  for (auto& ex : examples) games[ex.game_id].push_back(std::move(ex));

  for (auto& [game_id, steps] : games) {
    std::sort(steps.begin(), steps.end(), [](const RawExample& a, const RawExample& b) {
      return std::tie(a.walkthrough_step, a.random_step) <
             std::tie(b.walkthrough_step, b.random_step);
    });
    int walkthrough_count = 0;
    for (const auto& ex : steps) {
      if (ex.random_step == 0 && ex.walkthrough_step != walkthrough_count++) {
        fail("game " + game_id + ": walkthrough steps must be contiguous from 0");
      }
    }
    if (walkthrough_count == 0) {
      fail("game " + game_id + ": no walkthrough steps");
    }

    ReplayState walkthrough;  // the walkthrough chain cursor
    for (int ws = 0; ws < walkthrough_count; ++ws) {
      Trajectory trajectory;
      trajectory.game_id = game_id;
      trajectory.walkthrough_step = ws;

      // Walkthrough prefix datapoints are shared across trajectories.
      for (const Trajectory& prev : out.trajectories) {
        if (prev.game_id != game_id) continue;
        trajectory.datapoint_indices.push_back(prev.datapoint_indices[prev.walkthrough_step]);
      }

      auto ws_it = std::find_if(steps.begin(), steps.end(), [&](const RawExample& e) {
        return e.walkthrough_step == ws && e.random_step == 0;
      });
      out.datapoints.push_back(make_datapoint(walkthrough, *ws_it, tokenizer, out.policy));
      trajectory.datapoint_indices.push_back(static_cast<int>(out.datapoints.size()) - 1);

      // Random steps branch off the walkthrough state.
      ReplayState branch = walkthrough;
      int expected_rs = 1;
      for (const auto& ex : steps) {
        if (ex.walkthrough_step != ws || ex.random_step == 0) continue;
        if (ex.random_step != expected_rs++) {
          fail("game " + game_id + ": random steps must be contiguous from 1");
        }
        out.datapoints.push_back(make_datapoint(branch, ex, tokenizer, out.policy));
        trajectory.datapoint_indices.push_back(static_cast<int>(out.datapoints.size()) - 1);
      }
      out.trajectories.push_back(std::move(trajectory));
    }
  }
  return out;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {
  index_["<pad>"] = kPad;
  index_["<unk>"] = kUnk;
}

Vocabulary::Vocabulary(std::vector<std::string> entries) : Vocabulary() {
  for (auto& e : entries) {
    if (index_.count(e)) continue;
    index_[e] = static_cast<int>(tokens_.size());
    tokens_.push_back(std::move(e));
  }
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const { return tokens_.at(id); }

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

std::vector<std::string> Vocabulary::entries() const {
  return {tokens_.begin() + 2, tokens_.end()};
}

namespace {

void collect_label_tokens(const GraphEvent& e, const Tokenizer& tokenizer,
                          std::set<std::string>& words) {
  if (e.label.empty()) return;
  for (auto& t : tokenizer.tokenize(e.label)) words.insert(t);
}

}  // namespace

Vocabulary build_word_vocab(std::span<const Datapoint> datapoints,
                            const Tokenizer& tokenizer) {
  std::set<std::string> words;
  for (const auto& dp : datapoints) {
    words.insert(dp.obs_tokens.begin(), dp.obs_tokens.end());
    words.insert(dp.action_tokens.begin(), dp.action_tokens.end());
    for (const auto& e : dp.prior_events) collect_label_tokens(e, tokenizer, words);
    for (const auto& e : dp.target_events) collect_label_tokens(e, tokenizer, words);
  }
  return Vocabulary({words.begin(), words.end()});
}

Vocabulary build_label_vocab(std::span<const Datapoint> datapoints) {
  std::set<std::string> labels;
  for (const auto& dp : datapoints) {
    for (const auto& e : dp.prior_events) {
      if (!e.label.empty()) labels.insert(e.label);
    }
    for (const auto& e : dp.target_events) {
      if (!e.label.empty()) labels.insert(e.label);
    }
  }
  return Vocabulary({labels.begin(), labels.end()});
}

std::vector<Batch> make_batches(std::span<const Datapoint> datapoints,
                                const Vocabulary& words, const Vocabulary& labels,
                                int batch_size, unsigned shuffle_seed) {
  if (batch_size <= 0) fail("batch_size must be positive");
  std::vector<int> order(datapoints.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    std::size_t end = std::min(order.size(), begin + batch_size);
    Batch batch;
    std::size_t max_obs = 0, max_act = 0, max_events = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const Datapoint& dp = datapoints[order[i]];
      max_obs = std::max(max_obs, dp.obs_tokens.size());
      max_act = std::max(max_act, dp.action_tokens.size());
      max_events = std::max(max_events, dp.target_events.size() - 1);
    }
    for (std::size_t i = begin; i < end; ++i) {
      const Datapoint& dp = datapoints[order[i]];
      batch.datapoint_indices.push_back(order[i]);

      auto pad_tokens = [&](const std::vector<std::string>& tokens, std::size_t width,
                            std::vector<std::vector<int>>& ids,
                            std::vector<std::vector<std::uint8_t>>& mask) {
        std::vector<int> row(width, Vocabulary::kPad);
        std::vector<std::uint8_t> row_mask(width, 0);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
          row[t] = words.id(tokens[t]);
          row_mask[t] = 1;
        }
        ids.push_back(std::move(row));
        mask.push_back(std::move(row_mask));
      };
      pad_tokens(dp.obs_tokens, max_obs, batch.obs_ids, batch.obs_mask);
      pad_tokens(dp.action_tokens, max_act, batch.action_ids, batch.action_mask);

      std::vector<int> kinds(max_events, 0), srcs(max_events, 0), dsts(max_events, 0),
          labs(max_events, 0);
      std::vector<std::uint8_t> tmask(max_events, 0), smask(max_events, 0),
          dmask(max_events, 0), lmask(max_events, 0);
      for (std::size_t p = 0; p + 1 < dp.target_events.size(); ++p) {
        const GraphEvent& target = dp.target_events[p + 1];
        ArgMask mask = arg_mask(target.kind);
        kinds[p] = static_cast<int>(target.kind);
        tmask[p] = 1;
        if (mask.src) {
          srcs[p] = target.src;
          smask[p] = 1;
        }
        if (mask.dst) {
          dsts[p] = target.dst;
          dmask[p] = 1;
        }
        if (mask.label) {
          labs[p] = labels.id(target.label);
          lmask[p] = 1;
        }
      }
      batch.kind_ids.push_back(std::move(kinds));
      batch.src_ids.push_back(std::move(srcs));
      batch.dst_ids.push_back(std::move(dsts));
      batch.label_ids.push_back(std::move(labs));
      batch.type_mask.push_back(std::move(tmask));
      batch.src_mask.push_back(std::move(smask));
      batch.dst_mask.push_back(std::move(dmask));
      batch.label_mask.push_back(std::move(lmask));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

void save_manifest(const std::string& path, const Manifest& manifest) {
  json j = {{"schema_version", manifest.schema_version},
            {"seed", manifest.seed},
            {"multi_mode", manifest.multi_mode},
            {"sort_order", manifest.sort_order},
            {"exit_labels", manifest.exit_labels},
            {"state_labels", manifest.state_labels},
            {"colors", manifest.colors},
            {"word_vocab", manifest.word_vocab},
            {"label_vocab", manifest.label_vocab},
            {"split_files", manifest.split_files}};
  std::ofstream out(path);
  if (!out) fail("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open manifest: " + path);
  json j = json::parse(in);
  Manifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != 1) fail("unsupported manifest schema version");
  m.seed = j.at("seed").get<unsigned>();
  m.multi_mode = j.at("multi_mode").get<bool>();
  m.sort_order = j.at("sort_order").get<std::string>();
  m.exit_labels = j.at("exit_labels").get<std::set<std::string>>();
  m.state_labels = j.at("state_labels").get<std::set<std::string>>();
  m.colors = j.at("colors").get<std::set<std::string>>();
  m.word_vocab = j.at("word_vocab").get<std::vector<std::string>>();
  m.label_vocab = j.at("label_vocab").get<std::vector<std::string>>();
  m.split_files = j.at("split_files").get<std::map<std::string, std::string>>();
  return m;
}

void save_preprocessed(const std::string& path, const PreprocessedData& data) {
  std::ofstream out(path);
  if (!out) fail("cannot write preprocessed cache: " + path);
  for (const auto& dp : data.datapoints) {
    json prior = json::array(), target = json::array(), cmds = json::array();
    for (const auto& e : dp.prior_events) prior.push_back(event_to_json(e));
    for (const auto& e : dp.target_events) target.push_back(event_to_json(e));
    for (const auto& c : dp.target_commands) cmds.push_back(format_command(c));
    json j = {{"game_id", dp.game_id},
              {"walkthrough_step", dp.walkthrough_step},
              {"random_step", dp.random_step},
              {"t_g", dp.t_g},
              {"obs_tokens", dp.obs_tokens},
              {"action_tokens", dp.action_tokens},
              {"prior_events", prior},
              {"target_events", target},
              {"target_commands", cmds},
              {"previous_graph", triples_to_json(dp.previous_graph)}};
    out << j.dump() << "\n";
  }
}

PreprocessedData load_preprocessed(const std::string& path, const Manifest& manifest) {
  std::ifstream in(path);
  if (!in) fail("cannot open preprocessed cache: " + path);

  PreprocessedData data;
  data.multi_mode = manifest.multi_mode;
  data.policy.exit_labels = manifest.exit_labels;
  data.policy.state_labels = manifest.state_labels;
  data.policy.colors = manifest.colors;
  data.policy.multi_mode = manifest.multi_mode;

  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      Datapoint dp;
      dp.game_id = j.at("game_id").get<std::string>();
      dp.walkthrough_step = j.at("walkthrough_step").get<int>();
      dp.random_step = j.at("random_step").get<int>();
      dp.t_g = j.at("t_g").get<int>();
      dp.obs_tokens = j.at("obs_tokens").get<std::vector<std::string>>();
      dp.action_tokens = j.at("action_tokens").get<std::vector<std::string>>();
      for (const auto& e : j.at("prior_events")) dp.prior_events.push_back(event_from_json(e));
      for (const auto& e : j.at("target_events")) dp.target_events.push_back(event_from_json(e));
      for (const auto& c : j.at("target_commands")) {
        dp.target_commands.push_back(parse_command_or_throw(c.get<std::string>()));
      }
      dp.previous_graph = triples_from_json(j.at("previous_graph"));
      data.datapoints.push_back(std::move(dp));
    } catch (const std::exception& e) {
      fail(path + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }

  // Trajectories are rebuilt from the step keys.
  std::map<std::string, std::map<std::pair<int, int>, int>> by_game;
  for (int i = 0; i < static_cast<int>(data.datapoints.size()); ++i) {
    const auto& dp = data.datapoints[i];
    by_game[dp.game_id][{dp.walkthrough_step, dp.random_step}] = i;
  }
  for (const auto& [game_id, steps] : by_game) {
    int walkthrough_count = 0;
    for (const auto& [key, index] : steps) {
      if (key.second == 0) walkthrough_count = std::max(walkthrough_count, key.first + 1);
    }
    for (int ws = 0; ws < walkthrough_count; ++ws) {
      Trajectory t;
      t.game_id = game_id;
      t.walkthrough_step = ws;
      for (int w = 0; w <= ws; ++w) {
        auto it = steps.find({w, 0});
        if (it == steps.end()) fail("missing walkthrough step in cache for game " + game_id);
        t.datapoint_indices.push_back(it->second);
      }
      for (int rs = 1;; ++rs) {
        auto it = steps.find({ws, rs});
        if (it == steps.end()) break;
        t.datapoint_indices.push_back(it->second);
      }
      data.trajectories.push_back(std::move(t));
    }
  }
  return data;
}

}  // namespace tkg
