// causalspan: convert, inspect, split, train, predict, and evaluate
// cause/effect span corpora from one binary.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "causalspan/corpus.hpp"
#include "causalspan/eval.hpp"
#include "causalspan/predictions.hpp"
#include "causalspan/span_model.hpp"
#include "causalspan/tagger.hpp"

namespace {

using namespace causalspan;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;
constexpr uint64_t kDefaultSeed = 42;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << content;
  if (!out) throw IoError("failed while writing file: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Seed precedence: explicit flag, then config file, then CAUSAL_SPAN_SEED,
// then the built-in default.
uint64_t resolve_seed(bool flag_given, uint64_t flag_value,
                      const std::optional<uint64_t>& config_value) {
  if (flag_given) return flag_value;
  if (config_value) return *config_value;
  if (const char* env = std::getenv("CAUSAL_SPAN_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ValidationError("CAUSAL_SPAN_SEED is not an integer: " + std::string(env));
    }
  }
  return kDefaultSeed;
}

// ---------------------------------------------------------------------------
// convert

struct ConvertArgs {
  std::string input;
  std::string output;
  std::string from = "charspan";
  bool allow_overlap = false;
};

CharSpan char_span_from_json(const json& value, const std::string& id) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number_integer() ||
      !value[1].is_number_integer())
    throw ValidationError("record '" + id + "': char span must be [int, int]");
  return CharSpan{value[0].get<int>(), value[1].get<int>()};
}

int run_convert(const ConvertArgs& args) {
  std::ifstream in(args.input);
  if (!in) throw IoError("cannot open input file: " + args.input);

  std::vector<Example> converted;
  int skipped = 0;

  if (args.from == "canonical") {
    LoadOptions options;
    options.allow_overlap = args.allow_overlap;
    options.skip_invalid = true;
    options.skipped = &skipped;
    converted = load_corpus(args.input, options);
  } else {
    std::string line;
    long line_no = 0;
    std::set<std::string> seen_ids;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json record;
      try {
        record = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ValidationError(args.input + ":" + std::to_string(line_no) +
                              ": malformed JSON: " + e.what());
      }
      // Structural problems are schema failures; per-record annotation
      // problems are skipped and counted.
      if (!record.is_object() || !record.contains("id") || !record["id"].is_string())
        throw ValidationError(args.input + ":" + std::to_string(line_no) +
                              ": record needs a string \"id\"");
      const std::string id = record["id"].get<std::string>();
      if (!record.contains("text") || !record["text"].is_string())
        throw ValidationError(args.input + ":" + std::to_string(line_no) +
                              ": char-offset record needs a string \"text\"");
      if (!record.value("char_offsets", false))
        throw ValidationError(args.input + ":" + std::to_string(line_no) +
                              ": char-offset record needs \"char_offsets\": true");
      const std::string text = record["text"].get<std::string>();
      std::vector<CharRelation> relations;
      if (record.contains("relations")) {
        if (!record["relations"].is_array())
          throw ValidationError(args.input + ":" + std::to_string(line_no) +
                                ": \"relations\" must be an array");
        for (const auto& rel : record["relations"]) {
          if (!rel.is_object() || !rel.contains("cause") || !rel.contains("effect"))
            throw ValidationError(args.input + ":" + std::to_string(line_no) +
                                  ": each relation needs \"cause\" and \"effect\"");
          relations.push_back(
              {char_span_from_json(rel["cause"], id), char_span_from_json(rel["effect"], id)});
        }
      }
      try {
        Example example =
            convert_char_spans(id, text, relations, record.value("source", std::string{}));
        validate_example(example, args.allow_overlap);
        if (!seen_ids.insert(example.id).second)
          throw ValidationError("duplicate example id '" + example.id + "'");
        converted.push_back(std::move(example));
      } catch (const ValidationError& e) {
        std::cerr << "warning: skipping " << args.input << ":" << line_no << ": " << e.what()
                  << "\n";
        ++skipped;
      }
    }
  }

  save_corpus(converted, args.output);
  std::cerr << "skipped: " << skipped << "\n";
  std::cout << "converted " << converted.size() << " examples to " << args.output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::string corpus;
  std::string connectives_path;
  std::string freq_table_path;
  std::string out_prefix;
  bool allow_overlap = false;
};

std::vector<Connective> load_connectives(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open connectives file: " + path);
  std::vector<Connective> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    Connective connective;
    std::string word;
    while (words >> word) {
      for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      connective.push_back(word);
    }
    if (!connective.empty()) out.push_back(std::move(connective));
  }
  if (out.empty()) throw ValidationError("connectives file has no entries: " + path);
  return out;
}

FreqTable load_freq_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open frequency table: " + path);
  FreqTable table;
  std::string token;
  double count = 0;
  while (in >> token >> count) {
    for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    table[token] = count;
  }
  return table;
}

int run_stats(const StatsArgs& args) {
  LoadOptions options;
  options.allow_overlap = args.allow_overlap;
  const auto corpus = load_corpus(args.corpus, options);

  const std::vector<Connective> connectives = args.connectives_path.empty()
                                                  ? default_connectives()
                                                  : load_connectives(args.connectives_path);
  std::optional<FreqTable> freq_table;
  if (!args.freq_table_path.empty()) freq_table = load_freq_table(args.freq_table_path);

  const CorpusStats stats =
      compute_stats(corpus, connectives, freq_table ? &*freq_table : nullptr);

  std::cout << "examples: " << stats.total << "\n"
            << "causal: " << stats.causal << "\n"
            << "non-causal: " << stats.non_causal << "\n";
  auto role_line = [](const char* name, const RoleLengthStats& role) {
    std::cout << name << " spans: " << role.count;
    if (!role.percentiles.empty())
      std::cout << " (p50 " << role.percentiles.at(50) << ", p99 " << role.percentiles.at(99)
                << ", max " << role.percentiles.at(100) << ")";
    std::cout << "\n";
  };
  role_line("cause", stats.cause);
  role_line("effect", stats.effect);
  role_line("all", stats.all);
  std::cout << "connective coverage: " << stats.connective_coverage << "\n";
  if (stats.avg_span_word_frequency)
    std::cout << "avg span word frequency: " << *stats.avg_span_word_frequency << "\n";

  if (!args.out_prefix.empty()) {
    write_text_file(args.out_prefix + ".json", stats_to_json(stats));
    write_text_file(args.out_prefix + "_cause_hist.csv", histogram_csv(stats.cause.histogram));
    write_text_file(args.out_prefix + "_effect_hist.csv",
                    histogram_csv(stats.effect.histogram));
    write_text_file(args.out_prefix + "_all_hist.csv", histogram_csv(stats.all.histogram));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// split

struct SplitArgs {
  std::string corpus;
  std::string out_prefix;
  std::string ratios = "0.6,0.2,0.2";
  bool seed_given = false;
  uint64_t seed = kDefaultSeed;
  bool allow_overlap = false;
};

SplitRatios parse_ratios(const std::string& text) {
  SplitRatios ratios{};
  char comma1 = 0, comma2 = 0;
  std::istringstream in(text);
  if (!(in >> ratios.train >> comma1 >> ratios.dev >> comma2 >> ratios.test) || comma1 != ',' ||
      comma2 != ',')
    throw ValidationError("ratios must look like 0.6,0.2,0.2");
  return ratios;
}

int run_split(const SplitArgs& args) {
  LoadOptions options;
  options.allow_overlap = args.allow_overlap;
  const auto corpus = load_corpus(args.corpus, options);
  const uint64_t seed = resolve_seed(args.seed_given, args.seed, std::nullopt);
  const CorpusSplit split = split_corpus(corpus, parse_ratios(args.ratios), seed);
  save_corpus(split.train, args.out_prefix + "_train.jsonl");
  save_corpus(split.dev, args.out_prefix + "_dev.jsonl");
  save_corpus(split.test, args.out_prefix + "_test.jsonl");
  std::cout << "train: " << split.train.size() << "\ndev: " << split.dev.size()
            << "\ntest: " << split.test.size() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string model_kind = "span";
  std::string corpus;
  std::string out;
  std::string manifest;
  std::string config_path;
  std::string scheme = "iobes";
  std::string n_max = "auto";
  int epochs = 40;
  double lr = 0.01;
  int dim = 24;
  int width_dim = 8;
  int buckets = 32768;
  int neg_entities = 10;
  int neg_relations = 5;
  bool seed_given = false;
  uint64_t seed = kDefaultSeed;
  bool allow_overlap = false;
  std::set<std::string> given;  // flags passed explicitly; they win over --config
};

// Fill options the user did not pass from the config file.
void merge_config_file(TrainArgs& args, std::optional<uint64_t>& config_seed) {
  if (args.config_path.empty()) return;
  json config;
  try {
    config = json::parse(read_text_file(args.config_path));
  } catch (const json::parse_error& e) {
    throw ValidationError(args.config_path + ": malformed JSON: " + e.what());
  }
  if (!config.is_object()) throw ValidationError(args.config_path + ": must be a JSON object");
  auto merge = [&](const char* key, auto& slot) {
    using T = std::decay_t<decltype(slot)>;
    if (!args.given.count(key) && config.contains(key)) slot = config[key].get<T>();
  };
  merge("model", args.model_kind);
  merge("corpus", args.corpus);
  merge("out", args.out);
  merge("scheme", args.scheme);
  merge("n_max", args.n_max);
  merge("epochs", args.epochs);
  merge("lr", args.lr);
  merge("dim", args.dim);
  merge("width_dim", args.width_dim);
  merge("buckets", args.buckets);
  merge("neg_entities", args.neg_entities);
  merge("neg_relations", args.neg_relations);
  if (config.contains("seed")) config_seed = config["seed"].get<uint64_t>();
}

int run_train(const TrainArgs& args_in) {
  TrainArgs args = args_in;
  std::optional<uint64_t> config_seed;
  merge_config_file(args, config_seed);
  const uint64_t seed = resolve_seed(args.seed_given, args.seed, config_seed);
  if (args.corpus.empty() || args.out.empty())
    throw ValidationError("train needs --corpus and --out (flags or config file)");

  LoadOptions options;
  options.allow_overlap = args.allow_overlap;
  const auto corpus = load_corpus(args.corpus, options);

  const auto start = std::chrono::steady_clock::now();
  std::optional<double> final_loss;
  ordered_json resolved;
  resolved["model"] = args.model_kind;
  resolved["corpus"] = args.corpus;
  resolved["epochs"] = args.epochs;
  resolved["lr"] = args.lr;
  resolved["dim"] = args.dim;
  resolved["buckets"] = args.buckets;
  resolved["seed"] = seed;

  Rng rng(seed);
  if (args.model_kind == "tagger") {
    TaggerConfig config;
    config.scheme = scheme_from_string(args.scheme);
    config.buckets = args.buckets;
    config.dim = args.dim;
    resolved["scheme"] = args.scheme;
    TaggerModel model = make_tagger(config, rng);
    for (int epoch = 1; epoch <= args.epochs; ++epoch) {
      final_loss = tagger_train_epoch(model, corpus, rng, args.lr);
      std::cerr << "epoch " << epoch << " loss " << *final_loss << "\n";
    }
    save_tagger(model, args.out);
  } else if (args.model_kind == "span") {
    SpanModelConfig config;
    config.n_max = args.n_max == "auto" ? auto_max_span(corpus) : std::stoi(args.n_max);
    config.neg_entities = args.neg_entities;
    config.neg_relations = args.neg_relations;
    config.dim = args.dim;
    config.width_dim = args.width_dim;
    config.buckets = args.buckets;
    resolved["n_max"] = config.n_max;
    resolved["width_dim"] = args.width_dim;
    resolved["neg_entities"] = args.neg_entities;
    resolved["neg_relations"] = args.neg_relations;
    SpanModel model = make_span_model(config, rng);
    bool warned = false;
    for (int epoch = 1; epoch <= args.epochs; ++epoch) {
      int skipped = 0;
      final_loss = span_train_epoch(model, corpus, rng, args.lr, &skipped);
      if (skipped > 0 && !warned) {
        std::cerr << "warning: " << skipped << " gold spans exceed n_max = " << config.n_max
                  << " and are not supervised\n";
        warned = true;
      }
      std::cerr << "epoch " << epoch << " loss " << *final_loss << "\n";
    }
    save_span_model(model, args.out);
  } else {
    throw ValidationError("unknown model kind '" + args.model_kind + "' (expected tagger|span)");
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ordered_json manifest;
  manifest["version"] = 1;
  manifest["command"] = "train";
  manifest["model_path"] = args.out;
  manifest["config"] = resolved;
  manifest["final_loss"] = final_loss ? json(*final_loss) : json(nullptr);
  manifest["wall_time_sec"] = wall;
  const std::string manifest_path =
      args.manifest.empty() ? args.out + ".manifest.json" : args.manifest;
  write_text_file(manifest_path, manifest.dump(2) + "\n");

  std::cout << "model: " << args.out << "\nmanifest: " << manifest_path << "\n";
  if (final_loss) std::cout << "final loss: " << *final_loss << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model;
  std::string corpus;
  std::string out;
  int threads = 1;
  bool allow_overlap = false;
};

int run_predict(const PredictArgs& args) {
  LoadOptions options;
  options.allow_overlap = args.allow_overlap;
  const auto corpus = load_corpus(args.corpus, options);

  const nn::LoadedModel probe = nn::load_model_file(args.model);
  const std::string kind = json::parse(probe.config_json).value("kind", std::string{});

  std::vector<PredictionRecord> records(corpus.size());
  std::function<void(size_t)> predict_one;
  std::optional<TaggerModel> tagger;
  std::optional<SpanModel> span;
  if (kind == "tagger") {
    tagger = load_tagger(args.model);
    predict_one = [&](size_t i) {
      PredictionRecord& record = records[i];
      record.id = corpus[i].id;
      for (const RoleSpan& rs : tagger_predict(*tagger, corpus[i].tokens))
        (rs.role == Role::Cause ? record.cause : record.effect).push_back(rs.span);
    };
  } else if (kind == "span") {
    span = load_span_model(args.model);
    predict_one = [&](size_t i) {
      PredictionRecord& record = records[i];
      record.id = corpus[i].id;
      const ExtractionResult result = span_predict(*span, corpus[i].tokens);
      if (result.cause) record.cause.push_back(*result.cause);
      if (result.effect) record.effect.push_back(*result.effect);
      record.relation_score = result.relation_score;
    };
  } else {
    throw ValidationError(args.model + ": unknown model kind '" + kind + "'");
  }

  // Fan out across worker threads; records land at their input index, so the
  // output order is the corpus order regardless of scheduling.
  const int threads = std::max(1, args.threads);
  if (threads == 1) {
    for (size_t i = 0; i < corpus.size(); ++i) predict_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < corpus.size(); i = next.fetch_add(1))
          predict_one(i);
      });
    for (std::thread& worker : pool) worker.join();
  }

  write_predictions(records, args.out);
  std::cout << "predictions: " << args.out << " (" << records.size() << " examples)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string gold;
  std::string pred;
  std::string format = "text";
  std::string out;
  bool allow_overlap = false;
};

int run_eval(const EvalArgs& args) {
  LoadOptions options;
  options.allow_overlap = args.allow_overlap;
  const auto gold = load_corpus(args.gold, options);
  const auto records = read_predictions(args.pred);
  const MetricsReport report = evaluate_corpus(gold, predictions_to_role_spans(records));
  const std::string rendered = emit_report(report, report_format_from_string(args.format));
  if (args.out.empty())
    std::cout << rendered;
  else
    write_text_file(args.out, rendered);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::string model_kind = "span";
  bool seed_given = false;
  uint64_t seed = kDefaultSeed;
  bool corrupt = false;  // test hook: falsify one analytic gradient
};

int run_gradcheck(const GradcheckArgs& args) {
  const uint64_t seed = resolve_seed(args.seed_given, args.seed, std::nullopt);
  Example example;
  example.id = "gradcheck";
  example.tokens = {"alpha", "bravo", "charlie", "delta", "echo"};
  example.relations = {{TokenSpan{3, 5}, TokenSpan{0, 2}}};

  Rng init_rng(seed);
  double max_err = 0.0;
  if (args.model_kind == "tagger") {
    TaggerConfig config;
    config.buckets = 48;
    config.dim = 6;
    TaggerModel model = make_tagger(config, init_rng);
    auto loss = [&](nn::ParamSet&) {
      const double value = tagger_loss_and_grad(model, example);
      if (args.corrupt) model.params.at("W").grad(0, 0) += 0.5;
      return value;
    };
    max_err = nn::grad_check(loss, model.params);
  } else if (args.model_kind == "span") {
    SpanModelConfig config;
    config.n_max = 3;
    config.buckets = 48;
    config.dim = 6;
    config.width_dim = 4;
    SpanModel model = make_span_model(config, init_rng);
    auto loss = [&](nn::ParamSet&) {
      Rng sample_rng(seed + 1);  // fixed per call: identical negative samples
      const double value = span_loss_and_grad(model, example, sample_rng);
      if (args.corrupt) model.params.at("Ws").grad(0, 0) += 0.5;
      return value;
    };
    // finite differences are unreliable on max-pool ties; skip them
    const auto ties = span_tie_coordinates(model, example, seed + 1, 1e-2);
    nn::GradCheckConfig check;
    check.skip = [&ties](const std::string& name, nn::Index i, nn::Index j) {
      return name == "emb" && ties.count({i, j}) > 0;
    };
    max_err = nn::grad_check(loss, model.params, check);
  } else {
    throw ValidationError("unknown model kind '" + args.model_kind + "' (expected tagger|span)");
  }

  std::cout << "max relative error: " << max_err << "\n";
  if (max_err < 1e-4) {
    std::cout << "gradcheck: PASS\n";
    return kExitOk;
  }
  std::cout << "gradcheck: FAIL\n";
  return kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cause/effect span extraction toolkit"};
  app.require_subcommand(1);

  ConvertArgs convert_args;
  auto* convert = app.add_subcommand("convert", "convert a corpus to the canonical JSONL form");
  convert->add_option("input", convert_args.input, "input JSONL file")->required();
  convert->add_option("output", convert_args.output, "output JSONL file")->required();
  convert->add_option("--from", convert_args.from, "input format: charspan|canonical")
      ->check(CLI::IsMember({"charspan", "canonical"}))
      ->capture_default_str();
  convert->add_flag("--allow-overlap", convert_args.allow_overlap,
                    "accept overlapping cause/effect spans");

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "corpus statistics and span-length histograms");
  stats->add_option("corpus", stats_args.corpus, "canonical JSONL corpus")->required();
  stats->add_option("--connectives", stats_args.connectives_path,
                    "connective list, one per line");
  stats->add_option("--freq-table", stats_args.freq_table_path,
                    "word frequency table, lines of `token count`");
  stats->add_option("--out-prefix", stats_args.out_prefix,
                    "write <prefix>.json and <prefix>_{cause,effect,all}_hist.csv");
  stats->add_flag("--allow-overlap", stats_args.allow_overlap,
                  "accept overlapping cause/effect spans");

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "deterministic train/dev/test split");
  split->add_option("corpus", split_args.corpus, "canonical JSONL corpus")->required();
  split->add_option("--out-prefix", split_args.out_prefix, "output prefix")->required();
  split->add_option("--ratios", split_args.ratios, "train,dev,test")->capture_default_str();
  auto* split_seed = split->add_option("--seed", split_args.seed, "shuffle seed");
  split->add_flag("--allow-overlap", split_args.allow_overlap,
                  "accept overlapping cause/effect spans");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a tagger or span model");
  train->add_option("--model", train_args.model_kind, "tagger|span")
      ->check(CLI::IsMember({"tagger", "span"}))
      ->capture_default_str();
  train->add_option("--corpus", train_args.corpus, "training corpus");
  train->add_option("--out", train_args.out, "output model file");
  train->add_option("--manifest", train_args.manifest,
                    "run manifest path (default: <out>.manifest.json)");
  train->add_option("--config", train_args.config_path,
                    "JSON config file, merged under explicit flags");
  train->add_option("--scheme", train_args.scheme, "tagger scheme: bio|iobes")
      ->check(CLI::IsMember({"bio", "iobes"}))
      ->capture_default_str();
  train->add_option("--n-max", train_args.n_max, "max span length or 'auto' (p99)")
      ->capture_default_str();
  train->add_option("--epochs", train_args.epochs, "training epochs")->capture_default_str();
  train->add_option("--lr", train_args.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--dim", train_args.dim, "token embedding dim")->capture_default_str();
  train->add_option("--width-dim", train_args.width_dim, "span width embedding dim")
      ->capture_default_str();
  train->add_option("--buckets", train_args.buckets, "hashed vocabulary buckets")
      ->capture_default_str();
  train->add_option("--neg-entities", train_args.neg_entities, "negative spans per example")
      ->capture_default_str();
  train->add_option("--neg-relations", train_args.neg_relations,
                    "negative relation pairs per example")
      ->capture_default_str();
  auto* train_seed = train->add_option("--seed", train_args.seed, "initialization seed");
  train->add_flag("--allow-overlap", train_args.allow_overlap,
                  "accept overlapping cause/effect spans");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "run a trained model over a corpus");
  predict->add_option("--model", predict_args.model, "model file")->required();
  predict->add_option("--corpus", predict_args.corpus, "input corpus")->required();
  predict->add_option("--out", predict_args.out, "prediction JSONL")->required();
  predict->add_option("--threads", predict_args.threads, "worker threads")
      ->capture_default_str();
  predict->add_flag("--allow-overlap", predict_args.allow_overlap,
                    "accept overlapping cause/effect spans");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "exact and partial micro-P/R/F1");
  eval->add_option("--gold", eval_args.gold, "gold corpus")->required();
  eval->add_option("--pred", eval_args.pred, "prediction JSONL")->required();
  eval->add_option("--format", eval_args.format, "text|json|csv")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();
  eval->add_option("--out", eval_args.out, "write the report here instead of stdout");
  eval->add_flag("--allow-overlap", eval_args.allow_overlap,
                 "accept overlapping cause/effect spans");

  GradcheckArgs gradcheck_args;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "verify model gradients against finite differences");
  gradcheck->add_option("--model-kind", gradcheck_args.model_kind, "tagger|span")
      ->check(CLI::IsMember({"tagger", "span"}))
      ->capture_default_str();
  auto* gradcheck_seed = gradcheck->add_option("--seed", gradcheck_args.seed, "model seed");
  gradcheck->add_flag("--corrupt-gradient", gradcheck_args.corrupt, "")->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (convert->parsed()) return run_convert(convert_args);
    if (stats->parsed()) return run_stats(stats_args);
    if (split->parsed()) {
      split_args.seed_given = split_seed->count() > 0;
      return run_split(split_args);
    }
    if (train->parsed()) {
      train_args.seed_given = train_seed->count() > 0;
      for (const auto* option : train->get_options())
        if (option->count() > 0) {
          std::string name = option->get_name();
          if (name.rfind("--", 0) == 0) name = name.substr(2);
          std::replace(name.begin(), name.end(), '-', '_');
          train_args.given.insert(name);
        }
      return run_train(train_args);
    }
    if (predict->parsed()) return run_predict(predict_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (gradcheck->parsed()) {
      gradcheck_args.seed_given = gradcheck_seed->count() > 0;
      return run_gradcheck(gradcheck_args);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailure;
  }
  return kExitOk;
}
