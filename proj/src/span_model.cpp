#include "causalspan/span_model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace causalspan {

using nn::Index;
using nn::Mat;
using nn::Vec;

SpanModel make_span_model(const SpanModelConfig& config, Rng& rng) {
  if (config.n_max < 1) throw ValidationError("span model needs n_max >= 1");
  if (config.neg_entities < 0 || config.neg_relations < 0)
    throw ValidationError("negative sample counts must be >= 0");
  if (config.buckets <= 0 || config.dim <= 0 || config.width_dim <= 0)
    throw ValidationError("span model needs positive bucket count and dims");
  SpanModel model;
  model.config = config;
  nn::init_glorot(model.params.add("emb", config.buckets, config.dim), rng);
  nn::init_glorot(model.params.add("width", config.n_max, config.width_dim), rng);
  nn::init_glorot(model.params.add("Ws", kSpanClasses, model.span_embedding_dim()), rng);
  nn::init_glorot(model.params.add("bs", kSpanClasses, 1, 1), rng);
  nn::init_glorot(model.params.add("Wr", 2, model.pair_embedding_dim()), rng);
  nn::init_glorot(model.params.add("br", 2, 1, 1), rng);
  return model;
}

std::vector<TokenSpan> enumerate_candidates(int sentence_length, int n_max) {
  if (sentence_length < 1) throw ValidationError("sentence length must be >= 1");
  std::vector<TokenSpan> out;
  for (int start = 0; start < sentence_length; ++start)
    for (int len = 1; len <= n_max && start + len <= sentence_length; ++len)
      out.push_back(TokenSpan{start, start + len});
  return out;
}

namespace {

// Per-sentence forward state shared by every span of the sentence.
struct SentenceState {
  std::vector<int> buckets;
  Mat emb;       // L x d bucket embedding rows
  Mat span_rows; // L x 2d, row j = concat(emb_j, emb_j * (1 + j/L))
  Vec cls;       // sentence mean of emb rows, the [CLS] stand-in
  Index L = 0;
};

SentenceState analyze(const SpanModel& model, const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw ValidationError("cannot embed an empty token list");
  SentenceState st;
  st.L = static_cast<Index>(tokens.size());
  const int d = model.config.dim;
  const Mat& table = model.params.at("emb").value;
  st.buckets.resize(tokens.size());
  st.emb.resize(st.L, d);
  st.span_rows.resize(st.L, 2 * d);
  for (Index j = 0; j < st.L; ++j) {
    const int bucket = nn::hash_bucket(tokens[static_cast<size_t>(j)], model.config.buckets);
    st.buckets[static_cast<size_t>(j)] = bucket;
    st.emb.row(j) = table.row(bucket);
    const double scale = 1.0 + static_cast<double>(j) / static_cast<double>(st.L);
    st.span_rows.row(j).segment(0, d) = st.emb.row(j);
    st.span_rows.row(j).segment(d, d) = st.emb.row(j) * scale;
  }
  st.cls = nn::mean_pool(st.emb);
  return st;
}

void check_span(const SpanModel& model, const SentenceState& st, TokenSpan span) {
  if (span.start < 0 || span.start >= span.end || span.end > st.L) {
    std::ostringstream msg;
    msg << "span [" << span.start << ", " << span.end << ") out of bounds for " << st.L
        << " tokens";
    throw ValidationError(msg.str());
  }
  if (span.length() > model.config.n_max)
    throw ValidationError("span of length " + std::to_string(span.length()) +
                          " exceeds n_max = " + std::to_string(model.config.n_max));
}

// e(s) = concat(max-pooled span rows, width row, cls). pool_out, when given,
// receives the pool with argmax indices rebased to absolute token positions.
Vec span_embedding_cached(const SpanModel& model, const SentenceState& st, TokenSpan span,
                          nn::MaxPool* pool_out) {
  check_span(model, st, span);
  const int d = model.config.dim, dw = model.config.width_dim;
  nn::MaxPool pool = nn::max_pool(st.span_rows.middleRows(span.start, span.length()));
  for (Index& row : pool.argmax) row += span.start;
  Vec e(model.span_embedding_dim());
  e.segment(0, 2 * d) = pool.value;
  e.segment(2 * d, dw) = model.params.at("width").value.row(span.length() - 1).transpose();
  e.segment(2 * d + dw, d) = st.cls;
  if (pool_out) *pool_out = std::move(pool);
  return e;
}

// Tokens strictly between the two spans, empty when none.
std::pair<Index, Index> gap_bounds(TokenSpan s1, TokenSpan s2) {
  const Index lo = std::min(s1.end, s2.end);
  const Index hi = std::max(s1.start, s2.start);
  return lo < hi ? std::pair<Index, Index>{lo, hi} : std::pair<Index, Index>{0, 0};
}

Vec pair_embedding_cached(const SpanModel& model, const SentenceState& st, TokenSpan s1,
                          TokenSpan s2, nn::MaxPool* gap_pool_out) {
  const int d = model.config.dim;
  const Mat& Ws = model.params.at("Ws").value;
  const Vec bs = model.params.at("bs").value.col(0);
  const Vec z1 = nn::linear(Ws, span_embedding_cached(model, st, s1, nullptr), bs);
  const Vec z2 = nn::linear(Ws, span_embedding_cached(model, st, s2, nullptr), bs);
  Vec p = Vec::Zero(model.pair_embedding_dim());
  p.segment(0, kSpanClasses) = z1;
  p.segment(kSpanClasses, kSpanClasses) = z2;
  const auto [lo, hi] = gap_bounds(s1, s2);
  if (lo < hi) {
    nn::MaxPool pool = nn::max_pool(st.emb.middleRows(lo, hi - lo));
    for (Index& row : pool.argmax) row += lo;
    p.segment(2 * kSpanClasses, d) = pool.value;
    if (gap_pool_out) *gap_pool_out = std::move(pool);
  } else if (gap_pool_out) {
    gap_pool_out->argmax.clear();
  }
  return p;
}

// Gradient buffers accumulated per sentence, scattered into the embedding
// table once at the end.
struct SentenceGrads {
  Mat dE;    // L x d
  Vec dcls;  // d

  explicit SentenceGrads(const SentenceState& st)
      : dE(Mat::Zero(st.L, st.emb.cols())), dcls(Vec::Zero(st.emb.cols())) {}
};

// Routes de(s) — the gradient w.r.t. one span embedding — into the width
// table, the pooled token rows, and the cls accumulator.
void backprop_span_embedding(SpanModel& model, const SentenceState& st, TokenSpan span,
                             const nn::MaxPool& pool, const Vec& de, SentenceGrads& grads) {
  const int d = model.config.dim, dw = model.config.width_dim;
  for (int c = 0; c < 2 * d; ++c) {
    const Index row = pool.argmax[static_cast<size_t>(c)];
    if (c < d) {
      grads.dE(row, c) += de(c);
    } else {
      const double scale = 1.0 + static_cast<double>(row) / static_cast<double>(st.L);
      grads.dE(row, c - d) += de(c) * scale;
    }
  }
  model.params.at("width").grad.row(span.length() - 1) += de.segment(2 * d, dw).transpose();
  grads.dcls += de.segment(2 * d + dw, d);
}

void scatter_sentence_grads(SpanModel& model, const SentenceState& st, SentenceGrads& grads) {
  grads.dE.rowwise() += grads.dcls.transpose() / static_cast<double>(st.L);
  Mat& demb = model.params.at("emb").grad;
  for (Index j = 0; j < st.L; ++j)
    demb.row(st.buckets[static_cast<size_t>(j)]) += grads.dE.row(j);
}

}  // namespace

Vec span_embedding(const SpanModel& model, const std::vector<std::string>& tokens,
                   TokenSpan span) {
  const SentenceState st = analyze(model, tokens);
  return span_embedding_cached(model, st, span, nullptr);
}

Vec classify_span(const SpanModel& model, const Vec& embedding) {
  const Mat& Ws = model.params.at("Ws").value;
  const Vec bs = model.params.at("bs").value.col(0);
  return nn::softmax(nn::linear(Ws, embedding, bs));
}

Vec pair_embedding(const SpanModel& model, const std::vector<std::string>& tokens, TokenSpan s1,
                   TokenSpan s2) {
  const SentenceState st = analyze(model, tokens);
  return pair_embedding_cached(model, st, s1, s2, nullptr);
}

double classify_relation(const SpanModel& model, const Vec& pair_emb) {
  const Mat& Wr = model.params.at("Wr").value;
  const Vec br = model.params.at("br").value.col(0);
  return nn::softmax(nn::linear(Wr, pair_emb, br))(0);
}

TrainingItems sample_training_items(const Example& example, const SpanModelConfig& config,
                                    Rng& rng) {
  TrainingItems items;
  const int n_tokens = static_cast<int>(example.tokens.size());

  std::set<TokenSpan> gold_positions;
  for (const Relation& rel : example.relations) {
    gold_positions.insert(rel.cause);
    gold_positions.insert(rel.effect);
  }

  std::set<TokenSpan> usable;  // gold spans the model can represent
  for (const RoleSpan& rs : example.role_spans()) {
    if (rs.span.length() > config.n_max) {
      ++items.skipped_long_spans;
      continue;
    }
    items.spans.push_back(
        {rs.span, rs.role == Role::Cause ? SpanClass::Cause : SpanClass::Effect});
    usable.insert(rs.span);
  }

  std::vector<TokenSpan> negatives;
  for (const TokenSpan& cand : enumerate_candidates(n_tokens, config.n_max))
    if (!gold_positions.count(cand)) negatives.push_back(cand);
  std::vector<TokenSpan> sampled;
  for (size_t idx :
       rng.sample_indices(negatives.size(), static_cast<size_t>(config.neg_entities)))
    sampled.push_back(negatives[idx]);
  for (const TokenSpan& span : sampled) items.spans.push_back({span, SpanClass::None});

  std::set<std::pair<TokenSpan, TokenSpan>> gold_pairs;
  for (const Relation& rel : example.relations) {
    if (rel.cause.length() > config.n_max || rel.effect.length() > config.n_max) continue;
    if (gold_pairs.insert({rel.cause, rel.effect}).second)
      items.relations.push_back({rel.cause, rel.effect, true});
  }

  std::vector<TokenSpan> pool(usable.begin(), usable.end());
  for (const TokenSpan& span : sampled)
    if (!usable.count(span)) pool.push_back(span);
  std::vector<std::pair<TokenSpan, TokenSpan>> pair_pool;
  for (const TokenSpan& a : pool)
    for (const TokenSpan& b : pool)
      if (!gold_pairs.count({a, b})) pair_pool.push_back({a, b});
  for (size_t idx :
       rng.sample_indices(pair_pool.size(), static_cast<size_t>(config.neg_relations)))
    items.relations.push_back({pair_pool[idx].first, pair_pool[idx].second, false});

  return items;
}

double span_loss_and_grad(SpanModel& model, const Example& example, Rng& rng,
                          int* skipped_long_spans) {
  const TrainingItems items = sample_training_items(example, model.config, rng);
  if (skipped_long_spans) *skipped_long_spans = items.skipped_long_spans;
  if (items.spans.empty() && items.relations.empty()) return 0.0;

  const SentenceState st = analyze(model, example.tokens);
  SentenceGrads grads(st);
  const Mat& Ws = model.params.at("Ws").value;
  const Vec bs = model.params.at("bs").value.col(0);
  const Mat& Wr = model.params.at("Wr").value;
  const Vec br = model.params.at("br").value.col(0);
  Mat& dWs = model.params.at("Ws").grad;
  Mat& dbs = model.params.at("bs").grad;
  Mat& dWr = model.params.at("Wr").grad;
  Mat& dbr = model.params.at("br").grad;

  double loss = 0.0;

  // dz is the gradient w.r.t. the pre-softmax span-head output for `span`.
  auto backprop_span_head = [&](TokenSpan span, const Vec& e, const nn::MaxPool& pool,
                                const Vec& dz) {
    dWs += dz * e.transpose();
    dbs.col(0) += dz;
    backprop_span_embedding(model, st, span, pool, Ws.transpose() * dz, grads);
  };

  for (const SpanItem& item : items.spans) {
    nn::MaxPool pool;
    const Vec e = span_embedding_cached(model, st, item.span, &pool);
    const Vec logits = nn::linear(Ws, e, bs);
    auto [item_loss, dlogits] = nn::softmax_xent(logits, static_cast<int>(item.label));
    loss += item_loss;
    backprop_span_head(item.span, e, pool, dlogits);
  }

  for (const RelationItem& item : items.relations) {
    nn::MaxPool pool1, pool2, gap_pool;
    const Vec e1 = span_embedding_cached(model, st, item.s1, &pool1);
    const Vec e2 = span_embedding_cached(model, st, item.s2, &pool2);
    const Vec z1 = nn::linear(Ws, e1, bs);
    const Vec z2 = nn::linear(Ws, e2, bs);
    Vec p = Vec::Zero(model.pair_embedding_dim());
    p.segment(0, kSpanClasses) = z1;
    p.segment(kSpanClasses, kSpanClasses) = z2;
    const auto [lo, hi] = gap_bounds(item.s1, item.s2);
    if (lo < hi) {
      gap_pool = nn::max_pool(st.emb.middleRows(lo, hi - lo));
      for (Index& row : gap_pool.argmax) row += lo;
      p.segment(2 * kSpanClasses, model.config.dim) = gap_pool.value;
    }

    const Vec logits = nn::linear(Wr, p, br);
    auto [item_loss, dlogits] = nn::softmax_xent(logits, item.causal ? 0 : 1);
    loss += item_loss;

    dWr += dlogits * p.transpose();
    dbr.col(0) += dlogits;
    const Vec dp = Wr.transpose() * dlogits;
    backprop_span_head(item.s1, e1, pool1, dp.segment(0, kSpanClasses));
    backprop_span_head(item.s2, e2, pool2, dp.segment(kSpanClasses, kSpanClasses));
    if (lo < hi)
      for (int c = 0; c < model.config.dim; ++c)
        grads.dE(gap_pool.argmax[static_cast<size_t>(c)], c) += dp(2 * kSpanClasses + c);
  }

  scatter_sentence_grads(model, st, grads);
  return loss;
}

std::set<std::pair<Index, Index>> span_tie_coordinates(const SpanModel& model,
                                                       const Example& example,
                                                       uint64_t sampling_seed, double margin) {
  Rng rng(sampling_seed);
  const TrainingItems items = sample_training_items(example, model.config, rng);
  const SentenceState st = analyze(model, example.tokens);
  const int d = model.config.dim;
  std::set<std::pair<Index, Index>> ties;

  // Marks the embedding coordinates of every row whose pooled value sits
  // within `margin` of the column maximum.
  auto scan_pool = [&](const Mat& rows, Index row_offset, bool scaled_block) {
    for (Index c = 0; c < rows.cols(); ++c) {
      const double top = rows.col(c).maxCoeff();
      Index within = 0;
      for (Index r = 0; r < rows.rows(); ++r)
        if (top - rows(r, c) < margin) ++within;
      if (within < 2) continue;
      const Index emb_col = scaled_block && c >= d ? c - d : c;
      for (Index r = 0; r < rows.rows(); ++r)
        if (top - rows(r, c) < margin)
          ties.insert({st.buckets[static_cast<size_t>(r + row_offset)], emb_col});
    }
  };

  auto scan_span = [&](TokenSpan span) {
    if (span.length() > 1)
      scan_pool(st.span_rows.middleRows(span.start, span.length()), span.start, true);
  };
  for (const SpanItem& item : items.spans) scan_span(item.span);
  for (const RelationItem& item : items.relations) {
    scan_span(item.s1);
    scan_span(item.s2);
    const auto [lo, hi] = gap_bounds(item.s1, item.s2);
    if (hi - lo > 1) scan_pool(st.emb.middleRows(lo, hi - lo), lo, false);
  }
  return ties;
}

double span_train_epoch(SpanModel& model, const std::vector<Example>& corpus, Rng& rng,
                        double lr, int* skipped_long_spans) {
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  nn::AdamConfig adam;
  adam.lr = lr;
  double total_loss = 0.0;
  int total_skipped = 0;
  for (size_t idx : order) {
    int skipped = 0;
    total_loss += span_loss_and_grad(model, corpus[idx], rng, &skipped);
    total_skipped += skipped;
    nn::adam_step(model.params, adam);
  }
  if (skipped_long_spans) *skipped_long_spans = total_skipped;
  return corpus.empty() ? 0.0 : total_loss / static_cast<double>(corpus.size());
}

std::vector<SpanPrediction> classify_candidates(const SpanModel& model,
                                                const std::vector<std::string>& tokens) {
  const SentenceState st = analyze(model, tokens);
  const Mat& Ws = model.params.at("Ws").value;
  const Vec bs = model.params.at("bs").value.col(0);
  std::vector<SpanPrediction> out;
  for (const TokenSpan& span :
       enumerate_candidates(static_cast<int>(tokens.size()), model.config.n_max)) {
    const Vec dist = nn::softmax(nn::linear(Ws, span_embedding_cached(model, st, span, nullptr), bs));
    int best = 0;
    for (int c = 1; c < kSpanClasses; ++c)
      if (dist(c) > dist(best)) best = c;
    if (best == static_cast<int>(SpanClass::None)) continue;
    out.push_back({span, best == static_cast<int>(SpanClass::Cause) ? Role::Cause : Role::Effect,
                   dist(best)});
  }
  return out;
}

std::optional<TokenSpan> select_longest_span(const std::vector<SpanPrediction>& predictions,
                                             Role role) {
  std::optional<TokenSpan> best;
  for (const SpanPrediction& pred : predictions) {
    if (pred.role != role) continue;
    if (!best || pred.span.length() > best->length() ||
        (pred.span.length() == best->length() && pred.span.start < best->start))
      best = pred.span;
  }
  return best;
}

ExtractionResult span_predict(const SpanModel& model, const std::vector<std::string>& tokens) {
  ExtractionResult result;
  const std::vector<SpanPrediction> predictions = classify_candidates(model, tokens);
  const std::optional<TokenSpan> best_cause = select_longest_span(predictions, Role::Cause);
  const std::optional<TokenSpan> best_effect = select_longest_span(predictions, Role::Effect);
  result.cause = best_cause;
  result.effect = best_effect;
  if (best_cause && best_effect) {
    const SentenceState st = analyze(model, tokens);
    const Vec p = pair_embedding_cached(model, st, *best_cause, *best_effect, nullptr);
    result.relation_score = classify_relation(model, p);
  }
  return result;
}

int auto_max_span(const std::vector<Example>& train, double p) {
  std::vector<int> lengths;
  for (const Example& example : train)
    for (const RoleSpan& rs : example.role_spans()) lengths.push_back(rs.span.length());
  if (lengths.empty()) throw ValidationError("auto_max_span: corpus has no gold spans");
  return percentile_length(std::move(lengths), p);
}

void save_span_model(const SpanModel& model, const std::string& path) {
  nlohmann::ordered_json config;
  config["kind"] = "span";
  config["n_max"] = model.config.n_max;
  config["neg_entities"] = model.config.neg_entities;
  config["neg_relations"] = model.config.neg_relations;
  config["dim"] = model.config.dim;
  config["width_dim"] = model.config.width_dim;
  config["buckets"] = model.config.buckets;
  nn::save_model_file(path, model.params, config.dump());
}

SpanModel load_span_model(const std::string& path) {
  nn::LoadedModel loaded = nn::load_model_file(path);
  const auto config = nlohmann::json::parse(loaded.config_json);
  if (!config.contains("kind") || config["kind"] != "span")
    throw ValidationError(path + ": not a span model file");
  SpanModel model;
  model.config.n_max = config.at("n_max").get<int>();
  model.config.neg_entities = config.at("neg_entities").get<int>();
  model.config.neg_relations = config.at("neg_relations").get<int>();
  model.config.dim = config.at("dim").get<int>();
  model.config.width_dim = config.at("width_dim").get<int>();
  model.config.buckets = config.at("buckets").get<int>();
  model.params = std::move(loaded.params);

  auto expect = [&](const char* name, Index rows, Index cols) {
    const nn::Param& param = model.params.at(name);
    if (param.value.rows() != rows || param.value.cols() != cols)
      throw ValidationError(path + ": parameter '" + name + "' has the wrong shape");
  };
  expect("emb", model.config.buckets, model.config.dim);
  expect("width", model.config.n_max, model.config.width_dim);
  expect("Ws", kSpanClasses, model.span_embedding_dim());
  expect("bs", kSpanClasses, 1);
  expect("Wr", 2, model.pair_embedding_dim());
  expect("br", 2, 1);
  return model;
}

}  // namespace causalspan
