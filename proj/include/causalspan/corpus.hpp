#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "causalspan/errors.hpp"
#include "causalspan/rng.hpp"

namespace causalspan {

/// Half-open token-index interval [start, end).
struct TokenSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  bool overlaps(const TokenSpan& other) const {
    return start < other.end && other.start < end;
  }
  bool operator==(const TokenSpan&) const = default;
  auto operator<=>(const TokenSpan&) const = default;
};

enum class Role { Cause, Effect };

const char* role_name(Role role);

/// A span annotated with the role it plays in a causal relation.
struct RoleSpan {
  TokenSpan span;
  Role role = Role::Cause;

  bool operator==(const RoleSpan&) const = default;
  auto operator<=>(const RoleSpan&) const = default;
};

/// One directed cause -> effect annotation over token spans.
struct Relation {
  TokenSpan cause;
  TokenSpan effect;

  bool operator==(const Relation&) const = default;
};

/// A tokenized context with zero or more causal relations.
/// An empty relation list marks a non-causal example.
struct Example {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<Relation> relations;
  std::string source;

  bool causal() const { return !relations.empty(); }

  /// All spans of all relations, role-tagged, exact duplicates merged,
  /// sorted by (start, end, role).
  std::vector<RoleSpan> role_spans() const;
};

/// Throws ValidationError if any invariant fails: non-empty tokens, spans in
/// bounds with start < end, and (unless allow_overlap) no overlap between the
/// cause and effect of a relation.
void validate_example(const Example& example, bool allow_overlap = false);

struct LoadOptions {
  bool allow_overlap = false;
  /// Drop records that fail validation instead of throwing; parse failures
  /// on individual lines still throw. Skipped records are counted through
  /// `skipped` when set and reported on stderr.
  bool skip_invalid = false;
  int* skipped = nullptr;
};

/// Reads a canonical JSONL corpus. Order of records is preserved.
/// Throws IoError if the file cannot be read, ValidationError on a malformed
/// line (with its line number), an out-of-bounds span, or a duplicate id.
std::vector<Example> load_corpus(const std::string& path, const LoadOptions& options = {});

/// Writes the canonical JSONL form, one object per line, fixed field order
/// {"id", "tokens", "relations", "source"}. save then load is the identity.
void save_corpus(const std::vector<Example>& examples, const std::string& path);

/// Canonical single-line JSON record for one example.
std::string to_canonical_json(const Example& example);

/// Half-open byte interval into the original text.
struct CharSpan {
  int start = 0;
  int end = 0;

  bool operator==(const CharSpan&) const = default;
};

struct Tokenization {
  std::vector<std::string> tokens;
  std::vector<CharSpan> offsets;  // offsets[i] is tokens[i] inside the input
};

/// Whitespace tokenizer that peels leading/trailing punctuation characters
/// (.,;:!?"'()[]) into their own tokens. Offsets index the input bytes, so
/// text.substr(offsets[i].start, ...) == tokens[i] always holds.
Tokenization tokenize(std::string_view text);

/// Smallest token span covering every token whose character extent intersects
/// the char range. Throws ValidationError when the range touches no token
/// (e.g. a whitespace-only range).
TokenSpan snap_char_span(const Tokenization& tokenization, CharSpan chars);

struct CharRelation {
  CharSpan cause;
  CharSpan effect;
};

/// Converts a char-offset record into a canonical Example by tokenizing the
/// text and snapping each char span to covering tokens.
Example convert_char_spans(const std::string& id, std::string_view text,
                           const std::vector<CharRelation>& relations,
                           const std::string& source);

struct SplitRatios {
  double train = 0.6;
  double dev = 0.2;
  double test = 0.2;
};

struct CorpusSplit {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

/// Deterministic shuffled partition. Part sizes are floor(ratio * n) with the
/// remainder assigned to train. Ratios must be non-negative and sum to 1
/// within 1e-9; throws ValidationError when there are fewer examples than
/// non-zero parts.
CorpusSplit split_corpus(const std::vector<Example>& examples, SplitRatios ratios,
                         uint64_t seed);

/// Nearest-rank percentile: sort ascending and take the element at 1-based
/// index ceil(p/100 * N). p must lie in (0, 100]; lengths must be non-empty.
int percentile_length(std::vector<int> lengths, double p);

/// Percentiles reported by compute_stats.
inline constexpr int kStatsPercentiles[] = {50, 90, 95, 99, 100};

struct RoleLengthStats {
  long count = 0;
  std::map<int, long> histogram;   // span length -> number of spans
  std::map<int, int> percentiles;  // p -> nearest-rank length; empty when count == 0
};

struct CorpusStats {
  long total = 0;
  long causal = 0;
  long non_causal = 0;
  RoleLengthStats cause;
  RoleLengthStats effect;
  RoleLengthStats all;  // both roles pooled
  double connective_coverage = 0.0;
  std::optional<double> avg_span_word_frequency;
};

/// A connective is a lowercase token sequence matched contiguously.
using Connective = std::vector<std::string>;

/// {"because"}, {"due","to"}, {"lead","to"}
std::vector<Connective> default_connectives();

using FreqTable = std::unordered_map<std::string, double>;

/// Corpus statistics. Connective coverage is the fraction of examples whose
/// lowercased token sequence contains at least one connective; the average
/// span word frequency (lowercased lookup, missing tokens count 0) is only
/// present when a frequency table is supplied.
CorpusStats compute_stats(const std::vector<Example>& examples,
                          const std::vector<Connective>& connectives = default_connectives(),
                          const FreqTable* freq_table = nullptr);

std::string stats_to_json(const CorpusStats& stats);

/// Two-column CSV "length,count" with a header row, lengths ascending.
std::string histogram_csv(const std::map<int, long>& histogram);

}  // namespace causalspan
