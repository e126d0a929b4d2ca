// tkg: build, train and evaluate dynamic knowledge graphs from text-game
// observations via timestamped graph events.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "tkg/checkpoint.hpp"
#include "tkg/evaluation.hpp"
#include "tkg/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tkg;

namespace {

constexpr const char* kVectorEnvVar = "TKG_WORD_VECTORS";

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return json::parse(in);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Splits found in a dataset directory (or the single file given).
std::map<std::string, std::string> find_splits(const std::string& input) {
  std::map<std::string, std::string> splits;
  fs::path p(input);
  if (fs::is_directory(p)) {
    for (const auto& entry : fs::directory_iterator(p)) {
      if (entry.path().extension() == ".jsonl") {
        splits[entry.path().stem().string()] = entry.path().string();
      }
    }
  } else if (fs::exists(p)) {
    splits[p.stem().string()] = p.string();
  }
  if (splits.empty()) {
    throw std::runtime_error("no .jsonl dataset files found at " + input);
  }
  return splits;
}

struct LoadedData {
  Manifest manifest;
  std::map<std::string, PreprocessedData> splits;
};

LoadedData load_data_dir(const std::string& dir,
                         const std::vector<std::string>& wanted = {}) {
  LoadedData out;
  out.manifest = load_manifest((fs::path(dir) / "manifest.json").string());
  for (const auto& [split, file] : out.manifest.split_files) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), split) == wanted.end()) {
      continue;
    }
    out.splits[split] =
        load_preprocessed((fs::path(dir) / file).string(), out.manifest);
  }
  return out;
}

std::optional<std::string> resolve_vector_file(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv(kVectorEnvVar); env && *env) return std::string(env);
  return std::nullopt;
}

int run_stats(const std::string& input, const std::string& report_path) {
  auto examples = load_dataset(input);
  DatasetStats stats = compute_stats(examples);
  std::printf("examples            %zu\n", stats.example_count);
  std::printf("avg obs tokens      %.2f\n", stats.avg_observation_tokens);
  std::printf("avg commands        %.2f\n", stats.avg_commands);
  std::printf("node label types    %zu\n", stats.node_label_count);
  std::printf("edge label types    %zu\n", stats.edge_label_count);
  std::printf("avg edges per graph %.2f\n", stats.avg_connections);
  if (!report_path.empty()) {
    json j = {{"examples", stats.example_count},
              {"avg_observation_tokens", stats.avg_observation_tokens},
              {"avg_commands", stats.avg_commands},
              {"node_label_types", stats.node_label_count},
              {"edge_label_types", stats.edge_label_count},
              {"avg_edges_per_graph", stats.avg_connections}};
    write_text_file(report_path, j.dump(2) + "\n");
  }
  return 0;
}

int run_preprocess(const std::string& input, const std::string& output, bool multi,
                   unsigned seed) {
  auto splits = find_splits(input);
  fs::create_directories(output);

  PreprocessOptions options;
  options.multi_mode = multi;
  options.seed = seed;

  // State labels are derived from every split so evaluation data replays
  // consistently with training data.
  std::map<std::string, std::vector<RawExample>> raw;
  for (const auto& [split, file] : splits) raw[split] = load_dataset(file);

  Manifest manifest;
  manifest.seed = seed;
  manifest.multi_mode = multi;
  std::map<std::string, PreprocessedData> processed;
  for (const auto& [split, examples] : raw) {
    processed[split] = build_datapoints(examples, default_tokenizer(), options);
    std::string file = split + ".events.jsonl";
    save_preprocessed((fs::path(output) / file).string(), processed[split]);
    manifest.split_files[split] = file;
    std::printf("%s: %zu datapoints, %zu trajectories\n", split.c_str(),
                processed[split].datapoints.size(),
                processed[split].trajectories.size());
  }

  // Vocabularies come from the training split when present.
  const PreprocessedData& vocab_source =
      processed.count("train") ? processed.at("train") : processed.begin()->second;
  manifest.word_vocab =
      build_word_vocab(vocab_source.datapoints, default_tokenizer()).entries();
  manifest.label_vocab = build_label_vocab(vocab_source.datapoints).entries();
  manifest.exit_labels = vocab_source.policy.exit_labels;
  manifest.state_labels = vocab_source.policy.state_labels;
  manifest.colors = vocab_source.policy.colors;
  save_manifest((fs::path(output) / "manifest.json").string(), manifest);
  std::printf("manifest: %zu words, %zu labels, %zu state labels\n",
              manifest.word_vocab.size(), manifest.label_vocab.size(),
              manifest.state_labels.size());
  return 0;
}

struct TrainCliOptions {
  std::string data_dir;
  std::string out_dir;
  std::string config_file;
  std::string vectors;
  bool no_temp = false;
  std::optional<int> steps;
  std::optional<unsigned> seed;
};

int run_train(const TrainCliOptions& cli) {
  json config_json = json::object();
  if (!cli.config_file.empty()) config_json = load_json_file(cli.config_file);

  TrainConfig config;
  config.batch_size = config_json.value("batch_size", config.batch_size);
  config.learning_rate = config_json.value("learning_rate", config.learning_rate);
  config.max_steps = config_json.value("max_steps", config.max_steps);
  config.eval_interval = config_json.value("eval_interval", config.eval_interval);
  config.seed = config_json.value("seed", config.seed);
  config.weight_decay = config_json.value("weight_decay", config.weight_decay);
  config.clip_norm = config_json.value("clip_norm", config.clip_norm);
  std::optional<double> stop_tf, stop_fr;
  if (config_json.contains("early_stop_tf")) stop_tf = config_json["early_stop_tf"].get<double>();
  if (config_json.contains("early_stop_fr")) stop_fr = config_json["early_stop_fr"].get<double>();
  if (cli.steps) config.max_steps = *cli.steps;
  if (cli.seed) config.seed = *cli.seed;

  ModelConfig model_config;
  model_config.enc.hidden = config_json.value("hidden", model_config.enc.hidden);
  model_config.enc.temporal = config_json.value("temporal", model_config.enc.temporal);
  model_config.enc.event_type =
      config_json.value("event_type", model_config.enc.event_type);
  model_config.enc.autoregressive =
      config_json.value("autoregressive", model_config.enc.autoregressive);
  model_config.enc.node_key = config_json.value("node_key", model_config.enc.node_key);
  model_config.enc.word_dim = config_json.value("word_dim", model_config.enc.word_dim);
  model_config.max_events = config_json.value("max_events", model_config.max_events);
  model_config.freeze_word_table =
      config_json.value("freeze_word_table", model_config.freeze_word_table);
  model_config.seed = config.seed;
  model_config.word_vector_file = resolve_vector_file(cli.vectors);
  if (cli.no_temp || config_json.value("temporal_mode", "sinusoidal") == "zero") {
    model_config.enc.temporal_mode = EncodingConfig::TemporalMode::Zero;
  }

  LoadedData data = load_data_dir(cli.data_dir);
  if (!data.splits.count("train")) {
    throw std::runtime_error("data dir has no 'train' split");
  }
  const PreprocessedData& train_data = data.splits.at("train");
  const PreprocessedData& valid_data =
      data.splits.count("valid") ? data.splits.at("valid") : train_data;
  if (!data.splits.count("valid")) {
    std::printf("no valid split; validating on train\n");
  }
  bool multi = data.manifest.multi_mode;

  GraphUpdateModel model(model_config, Vocabulary(data.manifest.word_vocab),
                         Vocabulary(data.manifest.label_vocab));
  std::printf("model: %zu parameters, %d-dim hidden, temporal %s\n",
              model.params().total_parameters(), model_config.enc.hidden,
              model_config.enc.temporal_mode == EncodingConfig::TemporalMode::Zero
                  ? "zero"
                  : "sinusoidal");

  fs::create_directories(cli.out_dir);
  std::ofstream log_file(fs::path(cli.out_dir) / "train_log.jsonl");

  // Validation: TF F1 normally, FR F1 in multi mode (TF is undefined there).
  // With early-stop targets set, the metric is the worst ratio to target.
  auto validation = [&](const GraphUpdateModel& m) -> double {
    ModelGenerator generator(m);
    double tf = multi ? 0.0 : tf_f1(generator, valid_data.datapoints).macro;
    double fr =
        (stop_fr || multi) ? fr_f1(generator, valid_data).macro : 0.0;
    std::printf("  eval: tf=%.4f fr=%.4f\n", tf, fr);
    std::fflush(stdout);
    if (stop_tf || stop_fr) {
      double ratio = 1e9;
      if (stop_tf && *stop_tf > 0) ratio = std::min(ratio, tf / *stop_tf);
      if (stop_fr && *stop_fr > 0) ratio = std::min(ratio, fr / *stop_fr);
      return ratio;
    }
    return multi ? fr : tf;
  };
  if (stop_tf || stop_fr) config.early_stop_at = 1.0;

  auto checkpoints = [&](const GraphUpdateModel& m, const std::string& tag) {
    save_checkpoint((fs::path(cli.out_dir) / (tag + ".ckpt")).string(), m);
  };
  auto logger = [&](const TrainLogEntry& e) {
    json j = {{"step", e.step},
              {"total", e.loss.total},
              {"type", e.loss.head_means[kTypeHead]},
              {"src", e.loss.head_means[kSrcHead]},
              {"dst", e.loss.head_means[kDstHead]},
              {"label", e.loss.head_means[kLabelHead]}};
    if (e.validation_metric) j["validation"] = *e.validation_metric;
    log_file << j.dump() << "\n";
    if (e.step % 10 == 0 || e.validation_metric) {
      std::printf("step %ld  loss %.4f (type %.3f src %.3f dst %.3f label %.3f)\n",
                  e.step, e.loss.total, e.loss.head_means[0], e.loss.head_means[1],
                  e.loss.head_means[2], e.loss.head_means[3]);
      std::fflush(stdout);
    }
  };

  auto started = std::chrono::steady_clock::now();
  TrainResult result = train(model, train_data, config, validation, checkpoints, logger);
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  save_vocabulary_dump((fs::path(cli.out_dir) / "vocab.json").string(), model);
  json echo = config_json;
  echo["resolved"] = {{"max_steps", config.max_steps},
                      {"steps_run", result.steps_run},
                      {"seed", config.seed},
                      {"multi_mode", multi},
                      {"temporal_mode",
                       model_config.enc.temporal_mode == EncodingConfig::TemporalMode::Zero
                           ? "zero"
                           : "sinusoidal"},
                      {"seconds", seconds}};
  write_text_file((fs::path(cli.out_dir) / "run_config.json").string(),
                  echo.dump(2) + "\n");
  std::printf("trained %ld steps in %.1f s; checkpoints in %s\n", result.steps_run,
              seconds, cli.out_dir.c_str());
  if (result.best_validation) {
    std::printf("best validation %.4f at step %ld\n", *result.best_validation,
                result.best_validation_step);
  }
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& metric, const std::string& split_flag, bool multi_flag,
             const std::string& report_path) {
  auto model = load_checkpoint(checkpoint);
  LoadedData data = load_data_dir(data_dir);

  std::string split = split_flag;
  if (split.empty()) {
    for (const char* candidate : {"test", "valid", "train"}) {
      if (data.splits.count(candidate)) {
        split = candidate;
        break;
      }
    }
  }
  if (!data.splits.count(split)) {
    throw std::runtime_error("split not found in data dir: " + split);
  }
  const PreprocessedData& eval_data = data.splits.at(split);
  bool multi = multi_flag || data.manifest.multi_mode;

  bool run_tf = metric == "tf" || metric == "both";
  bool run_fr = metric == "fr" || metric == "both";
  if (multi && run_tf) {
    std::printf("note: teacher-forced metric is not defined in multi mode; skipping\n");
  }

  ModelGenerator generator(*model);
  EvalReport report = evaluate(generator, eval_data, run_tf, run_fr);
  std::printf("split %s (%zu datapoints, %zu trajectories)\n", split.c_str(),
              report.datapoint_count, report.trajectory_count);
  if (report.tf) {
    std::printf("tf_f1  macro %.4f  micro %.4f\n", report.tf->macro, report.tf->micro);
  }
  if (report.fr) {
    std::printf("fr_f1  macro %.4f  micro %.4f\n", report.fr->macro, report.fr->micro);
  }
  if (!report_path.empty()) {
    write_text_file(report_path, report_to_json(report) + "\n");
    std::printf("report written to %s\n", report_path.c_str());
  }
  return 0;
}

int run_generate(const std::string& checkpoint, const std::string& obs,
                 const std::string& action, const std::string& graph_file, int t_g,
                 std::optional<int> max_events, bool strict, const std::string& dot_out,
                 const std::string& json_out) {
  auto model = load_checkpoint(checkpoint);
  BeliefGraph graph;
  if (!graph_file.empty()) {
    std::ifstream in(graph_file);
    if (!in) throw std::runtime_error("cannot open graph file: " + graph_file);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    graph = graph_from_json(text);
  }

  const Tokenizer& tokenizer = default_tokenizer();
  BeliefGraph before = graph;
  auto events = model->generate(tokenizer.tokenize(obs), tokenizer.tokenize(action),
                                graph, t_g, max_events);

  std::printf("events (%zu):\n", events.size());
  for (const auto& e : events) {
    std::printf("  [%d,%d] %s", e.ts.game, e.ts.event, to_string(e.kind));
    if (e.src >= 0) std::printf(" src=%d", e.src);
    if (e.dst >= 0) std::printf(" dst=%d", e.dst);
    if (!e.label.empty()) std::printf(" label=\"%s\"", e.label.c_str());
    std::printf("\n");
  }
  auto commands = events_to_commands(events, before,
                                     strict ? ApplyMode::Strict : ApplyMode::Lenient);
  std::printf("commands (%zu):\n", commands.size());
  for (const auto& c : commands) std::printf("  %s\n", format_command(c).c_str());

  if (!dot_out.empty()) write_text_file(dot_out, to_dot(graph));
  if (!json_out.empty()) write_text_file(json_out, graph_to_json(graph) + "\n");
  return 0;
}

int run_export_dot(const std::string& graph_file, const std::string& out) {
  std::ifstream in(graph_file);
  if (!in) throw std::runtime_error("cannot open graph file: " + graph_file);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::string dot = to_dot(graph_from_json(text));
  if (out.empty()) {
    std::fputs(dot.c_str(), stdout);
  } else {
    write_text_file(out, dot);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic knowledge graphs from text-game observations"};
  app.require_subcommand(1);

  // stats
  auto* stats = app.add_subcommand("stats", "dataset statistics");
  std::string stats_input, stats_report;
  stats->add_option("--input", stats_input, "dataset .jsonl file")->required();
  stats->add_option("--report", stats_report, "write statistics as json");

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "convert commands to event datasets");
  std::string pre_input, pre_output;
  bool pre_multi = false;
  unsigned pre_seed = 0;
  preprocess->add_option("--input", pre_input, "dataset dir or .jsonl file")->required();
  preprocess->add_option("--output", pre_output, "output directory")->required();
  preprocess->add_flag("--multi", pre_multi, "split colored items into attribute nodes");
  preprocess->add_option("--seed", pre_seed, "seed recorded in the manifest");

  // train
  auto* train_cmd = app.add_subcommand("train", "teacher-forced training");
  TrainCliOptions train_cli;
  int train_steps = -1;
  long long train_seed = -1;
  train_cmd->add_option("--data", train_cli.data_dir, "preprocessed data dir")->required();
  train_cmd->add_option("--out", train_cli.out_dir, "output directory")->required();
  train_cmd->add_option("--config", train_cli.config_file, "json config file");
  train_cmd->add_option("--vectors", train_cli.vectors,
                        "word vector file (overrides TKG_WORD_VECTORS)");
  train_cmd->add_flag("--no-temp", train_cli.no_temp, "zero temporal embeddings");
  train_cmd->add_option("--steps", train_steps, "override max steps");
  train_cmd->add_option("--seed", train_seed, "override seed");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "TF/FR F1 evaluation");
  std::string eval_ckpt, eval_data, eval_metric = "both", eval_split, eval_report;
  bool eval_multi = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "preprocessed data dir")->required();
  eval_cmd->add_option("--metric", eval_metric, "tf | fr | both")
      ->check(CLI::IsMember({"tf", "fr", "both"}));
  eval_cmd->add_option("--split", eval_split, "split name (default: test/valid/train)");
  eval_cmd->add_flag("--multi", eval_multi, "force multi mode scoring");
  eval_cmd->add_option("--report", eval_report, "write report json");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "decode events for one observation");
  std::string gen_ckpt, gen_obs, gen_action, gen_graph, gen_dot, gen_json;
  int gen_tg = 0, gen_max = -1;
  bool gen_strict = false;
  gen_cmd->add_option("--checkpoint", gen_ckpt, "checkpoint file")->required();
  gen_cmd->add_option("--obs", gen_obs, "textual observation")->required();
  gen_cmd->add_option("--action", gen_action, "previous action text");
  gen_cmd->add_option("--graph", gen_graph, "prior belief graph json");
  gen_cmd->add_option("--t-g", gen_tg, "game step");
  gen_cmd->add_option("--max-events", gen_max, "event cap for this step");
  gen_cmd->add_flag("--strict", gen_strict, "strict event application");
  gen_cmd->add_option("--dot", gen_dot, "write final graph as DOT");
  gen_cmd->add_option("--json", gen_json, "write final graph as json");

  // export-dot
  auto* export_cmd = app.add_subcommand("export-dot", "graph json to DOT");
  std::string export_graph, export_out;
  export_cmd->add_option("--graph", export_graph, "belief graph json file")->required();
  export_cmd->add_option("--out", export_out, "output file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*stats) return run_stats(stats_input, stats_report);
    if (*preprocess) return run_preprocess(pre_input, pre_output, pre_multi, pre_seed);
    if (*train_cmd) {
      if (train_steps >= 0) train_cli.steps = train_steps;
      if (train_seed >= 0) train_cli.seed = static_cast<unsigned>(train_seed);
      return run_train(train_cli);
    }
    if (*eval_cmd) {
      return run_eval(eval_ckpt, eval_data, eval_metric, eval_split, eval_multi,
                      eval_report);
    }
    if (*gen_cmd) {
      std::optional<int> cap;
      if (gen_max >= 0) cap = gen_max;
      return run_generate(gen_ckpt, gen_obs, gen_action, gen_graph, gen_tg, cap,
                          gen_strict, gen_dot, gen_json);
    }
    if (*export_cmd) return run_export_dot(export_graph, export_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
