#include "causalspan/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace causalspan {

using nlohmann::json;
using nlohmann::ordered_json;

const char* role_name(Role role) { return role == Role::Cause ? "cause" : "effect"; }

std::vector<RoleSpan> Example::role_spans() const {
  std::vector<RoleSpan> spans;
  spans.reserve(relations.size() * 2);
  for (const Relation& rel : relations) {
    spans.push_back({rel.cause, Role::Cause});
    spans.push_back({rel.effect, Role::Effect});
  }
  std::sort(spans.begin(), spans.end());
  spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
  return spans;
}

void validate_example(const Example& example, bool allow_overlap) {
  if (example.tokens.empty())
    throw ValidationError("example '" + example.id + "': tokens must be non-empty");
  const int n = static_cast<int>(example.tokens.size());
  auto check_span = [&](const TokenSpan& span, const char* what) {
    if (span.start < 0 || span.start >= span.end || span.end > n) {
      std::ostringstream msg;
      msg << "example '" << example.id << "': " << what << " span [" << span.start << ", "
          << span.end << ") out of bounds for " << n << " tokens";
      throw ValidationError(msg.str());
    }
  };
  for (const Relation& rel : example.relations) {
    check_span(rel.cause, "cause");
    check_span(rel.effect, "effect");
    if (!allow_overlap && rel.cause.overlaps(rel.effect)) {
      std::ostringstream msg;
      msg << "example '" << example.id << "': cause [" << rel.cause.start << ", "
          << rel.cause.end << ") overlaps effect [" << rel.effect.start << ", "
          << rel.effect.end << ")";
      throw ValidationError(msg.str());
    }
  }
}

namespace {

TokenSpan span_from_json(const json& value, const std::string& id, const char* what) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number_integer() ||
      !value[1].is_number_integer())
    throw ValidationError("example '" + id + "': " + what + " span must be [int, int]");
  return TokenSpan{value[0].get<int>(), value[1].get<int>()};
}

Example example_from_json(const json& record) {
  if (!record.is_object()) throw ValidationError("record is not a JSON object");
  Example example;
  if (!record.contains("id") || !record["id"].is_string())
    throw ValidationError("record is missing a string \"id\"");
  example.id = record["id"].get<std::string>();
  if (!record.contains("tokens") || !record["tokens"].is_array())
    throw ValidationError("example '" + example.id + "': missing \"tokens\" array");
  for (const auto& token : record["tokens"]) {
    if (!token.is_string())
      throw ValidationError("example '" + example.id + "': tokens must be strings");
    example.tokens.push_back(token.get<std::string>());
  }
  if (record.contains("relations")) {
    if (!record["relations"].is_array())
      throw ValidationError("example '" + example.id + "': \"relations\" must be an array");
    for (const auto& rel : record["relations"]) {
      if (!rel.is_object() || !rel.contains("cause") || !rel.contains("effect"))
        throw ValidationError("example '" + example.id +
                              "': each relation needs \"cause\" and \"effect\"");
      example.relations.push_back({span_from_json(rel["cause"], example.id, "cause"),
                                   span_from_json(rel["effect"], example.id, "effect")});
    }
  }
  if (record.contains("source") && record["source"].is_string())
    example.source = record["source"].get<std::string>();
  return example;
}

}  // namespace

std::vector<Example> load_corpus(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::vector<Example> examples;
  std::set<std::string> seen_ids;
  int skipped = 0;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": malformed JSON: " + e.what());
    }
    try {
      Example example = example_from_json(record);
      validate_example(example, options.allow_overlap);
      if (!seen_ids.insert(example.id).second)
        throw ValidationError("duplicate example id '" + example.id + "'");
      examples.push_back(std::move(example));
    } catch (const ValidationError& e) {
      if (!options.skip_invalid)
        throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
      std::cerr << "warning: skipping " << path << ":" << line_no << ": " << e.what() << "\n";
      ++skipped;
    }
  }
  if (options.skipped) *options.skipped = skipped;
  return examples;
}

std::string to_canonical_json(const Example& example) {
  ordered_json record;
  record["id"] = example.id;
  record["tokens"] = example.tokens;
  record["relations"] = ordered_json::array();
  for (const Relation& rel : example.relations) {
    ordered_json r;
    r["cause"] = {rel.cause.start, rel.cause.end};
    r["effect"] = {rel.effect.start, rel.effect.end};
    record["relations"].push_back(std::move(r));
  }
  record["source"] = example.source;
  return record.dump();
}

void save_corpus(const std::vector<Example>& examples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file: " + path);
  for (const Example& example : examples) out << to_canonical_json(example) << "\n";
  if (!out) throw IoError("failed while writing corpus file: " + path);
}

namespace {

bool is_peeled_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '\'': case '(': case ')': case '[': case ']':
      return true;
    default:
      return false;
  }
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

Tokenization tokenize(std::string_view text) {
  Tokenization out;
  auto emit = [&](int start, int end) {
    out.tokens.emplace_back(text.substr(static_cast<size_t>(start),
                                        static_cast<size_t>(end - start)));
    out.offsets.push_back({start, end});
  };
  const int n = static_cast<int>(text.size());
  int i = 0;
  while (i < n) {
    if (is_space(text[static_cast<size_t>(i)])) {
      ++i;
      continue;
    }
    int chunk_end = i;
    while (chunk_end < n && !is_space(text[static_cast<size_t>(chunk_end)])) ++chunk_end;
    int s = i, e = chunk_end;
    while (s < e && is_peeled_punct(text[static_cast<size_t>(s)])) {
      emit(s, s + 1);
      ++s;
    }
    int core_end = e;
    while (core_end > s && is_peeled_punct(text[static_cast<size_t>(core_end - 1)])) --core_end;
    if (s < core_end) emit(s, core_end);
    for (int p = core_end; p < e; ++p) emit(p, p + 1);
    i = chunk_end;
  }
  return out;
}

TokenSpan snap_char_span(const Tokenization& tokenization, CharSpan chars) {
  int first = -1, last = -1;
  for (size_t t = 0; t < tokenization.offsets.size(); ++t) {
    const CharSpan& tok = tokenization.offsets[t];
    if (tok.start < chars.end && chars.start < tok.end) {
      if (first < 0) first = static_cast<int>(t);
      last = static_cast<int>(t);
    }
  }
  if (first < 0) {
    std::ostringstream msg;
    msg << "char span [" << chars.start << ", " << chars.end << ") covers no token";
    throw ValidationError(msg.str());
  }
  return TokenSpan{first, last + 1};
}

Example convert_char_spans(const std::string& id, std::string_view text,
                           const std::vector<CharRelation>& relations,
                           const std::string& source) {
  Example example;
  example.id = id;
  example.source = source;
  Tokenization tokenization = tokenize(text);
  example.tokens = tokenization.tokens;
  for (const CharRelation& rel : relations)
    example.relations.push_back({snap_char_span(tokenization, rel.cause),
                                 snap_char_span(tokenization, rel.effect)});
  return example;
}

CorpusSplit split_corpus(const std::vector<Example>& examples, SplitRatios ratios,
                         uint64_t seed) {
  const double sum = ratios.train + ratios.dev + ratios.test;
  if (ratios.train < 0 || ratios.dev < 0 || ratios.test < 0 || std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("split ratios must be non-negative and sum to 1");
  const size_t n = examples.size();
  int nonzero_parts = (ratios.train > 0) + (ratios.dev > 0) + (ratios.test > 0);
  if (nonzero_parts == 0) throw ValidationError("split ratios are all zero");
  if (n < static_cast<size_t>(nonzero_parts))
    throw ValidationError("fewer examples (" + std::to_string(n) + ") than non-zero parts (" +
                          std::to_string(nonzero_parts) + ")");

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  // 1e-9 absorbs representation error in ratio * n for exact products.
  auto part = [&](double ratio) {
    return static_cast<size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  };
  size_t n_train = part(ratios.train);
  const size_t n_dev = part(ratios.dev);
  const size_t n_test = part(ratios.test);
  n_train += n - (n_train + n_dev + n_test);  // remainder to train

  CorpusSplit split;
  size_t pos = 0;
  for (size_t i = 0; i < n_train; ++i) split.train.push_back(examples[order[pos++]]);
  for (size_t i = 0; i < n_dev; ++i) split.dev.push_back(examples[order[pos++]]);
  for (size_t i = 0; i < n_test; ++i) split.test.push_back(examples[order[pos++]]);
  return split;
}

int percentile_length(std::vector<int> lengths, double p) {
  if (lengths.empty()) throw ValidationError("percentile of an empty length set");
  if (!(p > 0.0 && p <= 100.0)) throw ValidationError("percentile p must lie in (0, 100]");
  std::sort(lengths.begin(), lengths.end());
  const size_t n = lengths.size();
  size_t rank;  // 1-based nearest rank ceil(p/100 * n)
  if (p == std::floor(p)) {
    const auto pi = static_cast<size_t>(p);
    rank = (pi * n + 99) / 100;
  } else {
    rank = static_cast<size_t>(std::ceil(p * static_cast<double>(n) / 100.0));
  }
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return lengths[rank - 1];
}

std::vector<Connective> default_connectives() {
  return {{"because"}, {"due", "to"}, {"lead", "to"}};
}

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains_connective(const std::vector<std::string>& lowered,
                         const std::vector<Connective>& connectives) {
  for (const Connective& conn : connectives) {
    if (conn.empty() || conn.size() > lowered.size()) continue;
    for (size_t i = 0; i + conn.size() <= lowered.size(); ++i) {
      bool match = true;
      for (size_t j = 0; j < conn.size(); ++j)
        if (lowered[i + j] != conn[j]) {
          match = false;
          break;
        }
      if (match) return true;
    }
  }
  return false;
}

void finish_role_stats(RoleLengthStats& stats, std::vector<int>& lengths) {
  stats.count = static_cast<long>(lengths.size());
  if (lengths.empty()) return;
  for (int len : lengths) ++stats.histogram[len];
  for (int p : kStatsPercentiles) stats.percentiles[p] = percentile_length(lengths, p);
}

}  // namespace

CorpusStats compute_stats(const std::vector<Example>& examples,
                          const std::vector<Connective>& connectives,
                          const FreqTable* freq_table) {
  CorpusStats stats;
  std::vector<int> cause_lengths, effect_lengths, all_lengths;
  long covered = 0;
  double freq_sum = 0.0;
  long freq_spans = 0;

  for (const Example& example : examples) {
    ++stats.total;
    if (example.causal())
      ++stats.causal;
    else
      ++stats.non_causal;

    std::vector<std::string> lowered;
    lowered.reserve(example.tokens.size());
    for (const std::string& token : example.tokens) lowered.push_back(ascii_lower(token));
    if (contains_connective(lowered, connectives)) ++covered;

    for (const RoleSpan& rs : example.role_spans()) {
      const int len = rs.span.length();
      (rs.role == Role::Cause ? cause_lengths : effect_lengths).push_back(len);
      all_lengths.push_back(len);
      if (freq_table) {
        double token_sum = 0.0;
        for (int t = rs.span.start; t < rs.span.end; ++t) {
          auto it = freq_table->find(lowered[static_cast<size_t>(t)]);
          if (it != freq_table->end()) token_sum += it->second;
        }
        freq_sum += token_sum / rs.span.length();
        ++freq_spans;
      }
    }
  }

  finish_role_stats(stats.cause, cause_lengths);
  finish_role_stats(stats.effect, effect_lengths);
  finish_role_stats(stats.all, all_lengths);
  stats.connective_coverage =
      stats.total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(stats.total);
  if (freq_table && freq_spans > 0)
    stats.avg_span_word_frequency = freq_sum / static_cast<double>(freq_spans);
  return stats;
}

namespace {

ordered_json role_stats_to_json(const RoleLengthStats& stats) {
  ordered_json out;
  out["count"] = stats.count;
  ordered_json hist = ordered_json::array();
  for (const auto& [len, count] : stats.histogram) hist.push_back({len, count});
  out["histogram"] = std::move(hist);
  ordered_json pct = ordered_json::object();
  for (const auto& [p, len] : stats.percentiles) pct["p" + std::to_string(p)] = len;
  out["percentiles"] = std::move(pct);
  return out;
}

}  // namespace

std::string stats_to_json(const CorpusStats& stats) {
  ordered_json out;
  out["version"] = 1;
  out["examples"] = {{"total", stats.total}, {"causal", stats.causal},
                     {"non_causal", stats.non_causal}};
  out["spans"] = {{"cause", role_stats_to_json(stats.cause)},
                  {"effect", role_stats_to_json(stats.effect)},
                  {"all", role_stats_to_json(stats.all)}};
  out["connective_coverage"] = stats.connective_coverage;
  if (stats.avg_span_word_frequency)
    out["avg_span_word_frequency"] = *stats.avg_span_word_frequency;
  else
    out["avg_span_word_frequency"] = nullptr;
  return out.dump(2);
}

std::string histogram_csv(const std::map<int, long>& histogram) {
  std::ostringstream out;
  out << "length,count\n";
  for (const auto& [len, count] : histogram) out << len << "," << count << "\n";
  return out.str();
}

}  // namespace causalspan
