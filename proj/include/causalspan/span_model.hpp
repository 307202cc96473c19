#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "causalspan/corpus.hpp"
#include "causalspan/nn.hpp"

namespace causalspan {

struct SpanModelConfig {
  int n_max = 8;         // maximum candidate span length, inclusive
  int neg_entities = 10; // negative span samples per example
  int neg_relations = 5; // negative relation samples per example
  int dim = 24;          // token embedding dim d
  int width_dim = 8;     // span width embedding dim d_w
  int buckets = 32768;   // hashed word buckets V
};

inline constexpr int kSpanClasses = 3;  // cause, effect, none

enum class SpanClass { Cause = 0, Effect = 1, None = 2 };

/// Span-based extractor: every candidate span up to n_max tokens is embedded
/// as concat(max-pooled position-scaled token embeddings [2d], width row
/// [d_w], sentence mean [d]) and classified cause/effect/none; span pairs are
/// classified causal/none from the two span-head outputs plus the max-pooled
/// gap tokens.
struct SpanModel {
  SpanModelConfig config;
  nn::ParamSet params;  // "emb" [V x d], "width" [n_max x d_w],
                        // "Ws" [3 x (3d + d_w)], "bs" [3],
                        // "Wr" [2 x (6 + d)], "br" [2]

  int span_embedding_dim() const { return 3 * config.dim + config.width_dim; }
  int pair_embedding_dim() const { return 2 * kSpanClasses + config.dim; }
};

SpanModel make_span_model(const SpanModelConfig& config, Rng& rng);

/// All spans with 1 <= length <= n_max, ordered by (start, length). The count
/// is sum over k = 1..min(n_max, L) of (L - k + 1).
std::vector<TokenSpan> enumerate_candidates(int sentence_length, int n_max);

/// e(s) = concat(max-pool over the span's 2d token rows, width row for the
/// span's length, sentence mean). Token row j is concat(emb_j, emb_j * (1 +
/// j/L)). Throws ValidationError when the span is out of bounds or longer
/// than n_max.
nn::Vec span_embedding(const SpanModel& model, const std::vector<std::string>& tokens,
                       TokenSpan span);

/// softmax(Ws e + bs): distribution over {cause, effect, none}.
nn::Vec classify_span(const SpanModel& model, const nn::Vec& embedding);

/// concat(pre-softmax span-head outputs of s1 and s2, max-pooled embeddings
/// of the tokens strictly between them; the zero vector when no tokens lie
/// between).
nn::Vec pair_embedding(const SpanModel& model, const std::vector<std::string>& tokens,
                       TokenSpan s1, TokenSpan s2);

/// P(s1 causes s2) under softmax over {causal, none}.
double classify_relation(const SpanModel& model, const nn::Vec& pair_emb);

struct SpanItem {
  TokenSpan span;
  SpanClass label = SpanClass::None;
};

struct RelationItem {
  TokenSpan s1;
  TokenSpan s2;
  bool causal = false;
};

struct TrainingItems {
  std::vector<SpanItem> spans;
  std::vector<RelationItem> relations;
  int skipped_long_spans = 0;  // gold spans longer than n_max, left unsupervised
};

/// Gold spans plus up to neg_entities non-gold candidates (class none) and
/// gold relations plus up to neg_relations ordered non-gold pairs over the
/// gold and sampled spans. Sampling is uniform without replacement and
/// deterministic given the generator state.
TrainingItems sample_training_items(const Example& example, const SpanModelConfig& config,
                                    Rng& rng);

/// Summed span and relation cross-entropies of one example's sampled items,
/// gradients accumulated into the model.
double span_loss_and_grad(SpanModel& model, const Example& example, Rng& rng,
                          int* skipped_long_spans = nullptr);

/// Embedding-table coordinates that sit within `margin` of a max-pool tie
/// somewhere in this example's sampled items (items re-drawn from
/// Rng(sampling_seed), matching a loss closure built on the same seed). The
/// loss is not differentiable at a tie, so finite-difference checks skip
/// these coordinates.
std::set<std::pair<nn::Index, nn::Index>> span_tie_coordinates(const SpanModel& model,
                                                               const Example& example,
                                                               uint64_t sampling_seed,
                                                               double margin);

/// One pass in rng-shuffled order, one Adam update per example. Returns the
/// mean per-example loss. skipped_long_spans, when given, receives the number
/// of oversized gold spans left unsupervised this epoch.
double span_train_epoch(SpanModel& model, const std::vector<Example>& corpus, Rng& rng,
                        double lr, int* skipped_long_spans = nullptr);

/// A candidate whose argmax class is cause or effect.
struct SpanPrediction {
  TokenSpan span;
  Role role = Role::Cause;
  double score = 0.0;  // probability of the argmax class
};

/// Every candidate with a non-none argmax, in candidate order.
std::vector<SpanPrediction> classify_candidates(const SpanModel& model,
                                                const std::vector<std::string>& tokens);

/// The longest predicted span of a role; ties break toward the smallest
/// start. Absent when the role was not predicted at all.
std::optional<TokenSpan> select_longest_span(const std::vector<SpanPrediction>& predictions,
                                             Role role);

struct ExtractionResult {
  std::optional<TokenSpan> cause;
  std::optional<TokenSpan> effect;
  std::optional<double> relation_score;  // present when both spans are
};

/// Longest predicted span per role (ties break toward the smallest start);
/// the relation score is reported for the chosen (cause, effect) pair.
ExtractionResult span_predict(const SpanModel& model, const std::vector<std::string>& tokens);

/// Nearest-rank percentile of all gold span lengths (both roles pooled) in
/// the corpus; the standard way to pick n_max. Throws ValidationError when
/// the corpus has no spans.
int auto_max_span(const std::vector<Example>& train, double p = 99.0);

void save_span_model(const SpanModel& model, const std::string& path);
SpanModel load_span_model(const std::string& path);

}  // namespace causalspan
