#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "causalspan/eval.hpp"
#include "causalspan/span_model.hpp"
#include "test_util.hpp"

using namespace causalspan;
using nn::Mat;
using nn::Vec;

namespace {

SpanModel small_model(int n_max = 4, uint64_t seed = 42) {
  SpanModelConfig config;
  config.n_max = n_max;
  config.dim = 6;
  config.width_dim = 4;
  config.buckets = 64;
  Rng rng(seed);
  return make_span_model(config, rng);
}

std::vector<Example> load_fixture() {
  return load_corpus(std::string(CAUSALSPAN_FIXTURE_DIR) + "/cue32.jsonl");
}

long closed_form_count(int length, int n_max) {
  long total = 0;
  for (int k = 1; k <= std::min(n_max, length); ++k) total += length - k + 1;
  return total;
}

}  // namespace

TEST_CASE("candidate enumeration") {
  auto candidates = enumerate_candidates(9, 4);
  CHECK(candidates.size() == 30);  // 9 + 8 + 7 + 6

  CHECK(enumerate_candidates(1, 5) == std::vector<TokenSpan>{TokenSpan{0, 1}});
  CHECK(enumerate_candidates(3, 10).size() == 6);

  // ordered by (start, length)
  for (size_t i = 1; i < candidates.size(); ++i) {
    const auto &a = candidates[i - 1], &b = candidates[i];
    CHECK((a.start < b.start || (a.start == b.start && a.length() < b.length())));
  }

  for (int length : {1, 5, 17, 50})
    for (int n_max : {1, 3, 8, 50})
      CHECK(enumerate_candidates(length, n_max).size() ==
            static_cast<size_t>(closed_form_count(length, n_max)));
}

TEST_CASE("every gold span within n_max is a candidate") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int length = 1 + static_cast<int>(rng.below(20));
    const int n_max = 1 + static_cast<int>(rng.below(8));
    const auto candidates = enumerate_candidates(length, n_max);
    const std::set<TokenSpan> set(candidates.begin(), candidates.end());
    const int start = static_cast<int>(rng.below(static_cast<uint64_t>(length)));
    const int len =
        1 + static_cast<int>(rng.below(static_cast<uint64_t>(std::min(n_max, length - start))));
    CHECK(set.count(TokenSpan{start, start + len}) == 1);
  }
}

TEST_CASE("span embedding structure") {
  auto model = small_model();
  const int d = model.config.dim, dw = model.config.width_dim;
  const std::vector<std::string> tokens{"one", "two", "three", "four"};

  SUBCASE("single-token span: first block is that token's position-scaled row") {
    const Vec e = span_embedding(model, tokens, {2, 3});
    const Mat& table = model.params.at("emb").value;
    const Vec emb = table.row(nn::hash_bucket("three", model.config.buckets)).transpose();
    CHECK((e.segment(0, d) - emb).norm() == doctest::Approx(0));
    CHECK((e.segment(d, d) - emb * (1.0 + 2.0 / 4.0)).norm() == doctest::Approx(0));
    // width block is the row for length 1
    CHECK((e.segment(2 * d, dw) - model.params.at("width").value.row(0).transpose()).norm() ==
          doctest::Approx(0));
  }

  SUBCASE("cls block is the sentence mean of the raw embeddings") {
    const Vec e = span_embedding(model, tokens, {0, 2});
    const Mat& table = model.params.at("emb").value;
    Vec mean = Vec::Zero(d);
    for (const std::string& token : tokens)
      mean += table.row(nn::hash_bucket(token, model.config.buckets)).transpose();
    mean /= 4.0;
    CHECK((e.segment(2 * d + dw, d) - mean).norm() == doctest::Approx(0));
  }

  SUBCASE("equal inputs give bitwise-equal embeddings") {
    const Vec a = span_embedding(model, tokens, {1, 3});
    const Vec b = span_embedding(model, tokens, {1, 3});
    CHECK((a - b).norm() == 0.0);
  }

  SUBCASE("bounds and length are validated") {
    CHECK_THROWS_AS(span_embedding(model, tokens, {0, 0}), ValidationError);
    CHECK_THROWS_AS(span_embedding(model, tokens, {2, 5}), ValidationError);
    CHECK_THROWS_AS(span_embedding(small_model(1), tokens, {0, 2}), ValidationError);
  }
}

TEST_CASE("hand-built span embedding") {
  SpanModelConfig config;
  config.n_max = 2;
  config.dim = 2;
  config.width_dim = 2;
  config.buckets = 64;
  Rng rng(1);
  auto model = make_span_model(config, rng);
  const std::vector<std::string> tokens{"aa", "bb", "cc"};
  Mat& table = model.params.at("emb").value;
  const int b0 = nn::hash_bucket("aa", 64), b1 = nn::hash_bucket("bb", 64),
            b2 = nn::hash_bucket("cc", 64);
  REQUIRE(b0 != b1);
  REQUIRE(b1 != b2);
  REQUIRE(b0 != b2);
  table.row(b0) << 1.0, -2.0;
  table.row(b1) << 0.5, 3.0;
  table.row(b2) << -1.0, 0.0;
  model.params.at("width").value.row(1) << 7.0, 8.0;

  // span [0,2): rows are [1,-2 | 1*(1+0/3), -2*(1+0/3)] and [0.5,3 | 0.5*(1+1/3), 3*(1+1/3)]
  const Vec e = span_embedding(model, tokens, {0, 2});
  CHECK(e(0) == doctest::Approx(1.0));                 // max(1, 0.5)
  CHECK(e(1) == doctest::Approx(3.0));                 // max(-2, 3)
  CHECK(e(2) == doctest::Approx(1.0));                 // max(1*1, 0.5*4/3)
  CHECK(e(3) == doctest::Approx(4.0));                 // max(-2*1, 3*4/3)
  CHECK(e(4) == doctest::Approx(7.0));                 // width row for length 2
  CHECK(e(5) == doctest::Approx(8.0));
  CHECK(e(6) == doctest::Approx((1.0 + 0.5 - 1.0) / 3.0));   // cls mean dim 0
  CHECK(e(7) == doctest::Approx((-2.0 + 3.0 + 0.0) / 3.0));  // cls mean dim 1
}

TEST_CASE("classify_span with zero weights is uniform") {
  auto model = small_model();
  model.params.at("Ws").value.setZero();
  model.params.at("bs").value.setZero();
  const Vec e = span_embedding(model, {"x", "y"}, {0, 1});
  const Vec dist = classify_span(model, e);
  for (int c = 0; c < 3; ++c) CHECK(dist(c) == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(classify_span(model, Vec::Zero(3)), ValidationError);
}

TEST_CASE("classify_span outputs sum to one") {
  Rng rng(17);
  auto model = small_model();
  for (int trial = 0; trial < 20; ++trial) {
    const Vec e = Vec::NullaryExpr(model.span_embedding_dim(),
                                   [&](Eigen::Index) { return rng.uniform(-4, 4); });
    const Vec dist = classify_span(model, e);
    CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dist.minCoeff() > 0.0);
  }
}

TEST_CASE("pair embedding gap rules") {
  auto model = small_model();
  const std::vector<std::string> tokens{"t0", "t1", "t2", "t3", "t4", "t5"};
  const int d = model.config.dim;

  // adjacent spans: the between-block is the zero vector
  Vec p = pair_embedding(model, tokens, {0, 2}, {2, 4});
  CHECK(p.segment(2 * kSpanClasses, d).norm() == doctest::Approx(0));

  // one token between: that token's embedding (max over one row)
  p = pair_embedding(model, tokens, {0, 2}, {3, 5});
  const Vec emb =
      model.params.at("emb").value.row(nn::hash_bucket("t2", model.config.buckets)).transpose();
  CHECK((p.segment(2 * kSpanClasses, d) - emb).norm() == doctest::Approx(0));

  // the gap is order-independent…
  const Vec swapped = pair_embedding(model, tokens, {3, 5}, {0, 2});
  CHECK((swapped.segment(2 * kSpanClasses, d) - emb).norm() == doctest::Approx(0));
  // …but the span blocks swap, so direction matters to the classifier
  CHECK((p.segment(0, kSpanClasses) - swapped.segment(kSpanClasses, kSpanClasses)).norm() ==
        doctest::Approx(0));
  CHECK(std::abs(classify_relation(model, p) - classify_relation(model, swapped)) > 1e-12);

  // overlapping spans also have an empty gap
  p = pair_embedding(model, tokens, {0, 3}, {2, 5});
  CHECK(p.segment(2 * kSpanClasses, d).norm() == doctest::Approx(0));

  // first blocks are the pre-softmax span-head outputs
  const Mat& Ws = model.params.at("Ws").value;
  const Vec bs = model.params.at("bs").value.col(0);
  const Vec z1 = Ws * span_embedding(model, tokens, {0, 2}) + bs;
  p = pair_embedding(model, tokens, {0, 2}, {3, 5});
  CHECK((p.segment(0, kSpanClasses) - z1).norm() == doctest::Approx(0));
}

TEST_CASE("classify_relation with zero weights is 0.5") {
  auto model = small_model();
  model.params.at("Wr").value.setZero();
  model.params.at("br").value.setZero();
  const Vec p = pair_embedding(model, {"a", "b", "c"}, {0, 1}, {2, 3});
  CHECK(classify_relation(model, p) == doctest::Approx(0.5));
}

TEST_CASE("sample_training_items counts and determinism") {
  SpanModelConfig config;
  config.n_max = 4;
  config.neg_entities = 10;
  config.neg_relations = 5;

  SUBCASE("sunrise example: 2 positives plus 10 of the 28 non-gold candidates") {
    const Example example = test::sunrise_example();
    Rng rng(3);
    const auto items = sample_training_items(example, config, rng);
    int positives = 0, negatives = 0;
    std::set<TokenSpan> seen;
    for (const SpanItem& item : items.spans) {
      CHECK(seen.insert(item.span).second);  // without replacement
      if (item.label == SpanClass::None) {
        ++negatives;
        CHECK(item.span != TokenSpan{7, 9});
        CHECK(item.span != TokenSpan{0, 2});
      } else {
        ++positives;
      }
    }
    CHECK(positives == 2);
    CHECK(negatives == 10);

    int rel_pos = 0, rel_neg = 0;
    for (const RelationItem& item : items.relations) {
      if (item.causal) {
        ++rel_pos;
        CHECK(item.s1 == TokenSpan{7, 9});
        CHECK(item.s2 == TokenSpan{0, 2});
      } else {
        ++rel_neg;
        CHECK_FALSE((item.s1 == TokenSpan{7, 9} && item.s2 == TokenSpan{0, 2}));
      }
    }
    CHECK(rel_pos == 1);
    CHECK(rel_neg == 5);
  }

  SUBCASE("single-token sentence exhausts the candidate pool") {
    Example tiny;
    tiny.id = "tiny";
    tiny.tokens = {"only"};
    config.n_max = 1;
    Rng rng(3);
    const auto items = sample_training_items(tiny, config, rng);
    CHECK(items.spans.size() <= 1);
    for (const SpanItem& item : items.spans) CHECK(item.label == SpanClass::None);
    for (const RelationItem& item : items.relations) CHECK_FALSE(item.causal);
  }

  SUBCASE("fixed seed gives identical samples") {
    const Example example = test::sunrise_example();
    Rng rng_a(9), rng_b(9);
    const auto a = sample_training_items(example, config, rng_a);
    const auto b = sample_training_items(example, config, rng_b);
    REQUIRE(a.spans.size() == b.spans.size());
    for (size_t i = 0; i < a.spans.size(); ++i) {
      CHECK(a.spans[i].span == b.spans[i].span);
      CHECK(a.spans[i].label == b.spans[i].label);
    }
    REQUIRE(a.relations.size() == b.relations.size());
    for (size_t i = 0; i < a.relations.size(); ++i) {
      CHECK(a.relations[i].s1 == b.relations[i].s1);
      CHECK(a.relations[i].s2 == b.relations[i].s2);
    }
  }

  SUBCASE("gold spans longer than n_max are skipped and counted") {
    Example wide;
    wide.id = "wide";
    wide.tokens = std::vector<std::string>(10, "w");
    wide.relations = {{TokenSpan{0, 7}, TokenSpan{8, 10}}};  // cause too long for n_max=4
    Rng rng(3);
    const auto items = sample_training_items(wide, config, rng);
    CHECK(items.skipped_long_spans == 1);
    int positives = 0;
    for (const SpanItem& item : items.spans)
      if (item.label != SpanClass::None) ++positives;
    CHECK(positives == 1);  // only the effect fits
    for (const RelationItem& item : items.relations) CHECK_FALSE(item.causal);
  }
}

TEST_CASE("span model gradient matches finite differences") {
  auto model = small_model(3);
  const Example example = [] {
    Example e;
    e.id = "g";
    e.tokens = {"alpha", "bravo", "charlie", "delta", "echo"};
    e.relations = {{TokenSpan{3, 5}, TokenSpan{0, 2}}};
    return e;
  }();
  // distinct buckets keep max-pools tie-free
  std::set<int> buckets;
  for (const auto& token : example.tokens)
    buckets.insert(nn::hash_bucket(token, model.config.buckets));
  REQUIRE(buckets.size() == example.tokens.size());

  auto loss = [&](nn::ParamSet&) {
    Rng rng(1234);  // fresh generator: sampling identical on every call
    return span_loss_and_grad(model, example, rng);
  };
  nn::GradCheckConfig config;
  const auto ties = span_tie_coordinates(model, example, 1234, 1e-2);
  config.skip = [&ties](const std::string& name, nn::Index i, nn::Index j) {
    return name == "emb" && ties.count({i, j}) > 0;
  };
  CHECK(nn::grad_check(loss, model.params, config) < 1e-4);
}

TEST_CASE("tie coordinates are detected for colliding and near-tied rows") {
  // two tokens sharing one bucket give exactly tied raw rows inside a span
  SpanModelConfig config;
  config.n_max = 3;
  config.buckets = 1;  // everything collides
  config.dim = 4;
  config.width_dim = 2;
  Rng rng(3);
  auto model = make_span_model(config, rng);
  Example e;
  e.id = "tied";
  e.tokens = {"x", "y", "z"};
  e.relations = {{TokenSpan{0, 2}, TokenSpan{2, 3}}};
  const auto ties = span_tie_coordinates(model, e, 5, 1e-2);
  CHECK(!ties.empty());
  for (const auto& [row, col] : ties) {
    CHECK(row == 0);  // the only bucket
    CHECK(col < 4);
  }

  // distinct, well-separated rows give no ties
  SpanModelConfig clean_config;
  clean_config.n_max = 3;
  clean_config.buckets = 64;
  clean_config.dim = 2;
  clean_config.width_dim = 2;
  Rng clean_rng(3);
  auto clean = make_span_model(clean_config, clean_rng);
  nn::Mat& table = clean.params.at("emb").value;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < table.cols(); ++j)
      table(i, j) = static_cast<double>(i * table.cols() + j) + 1.0;
  Example spread;
  spread.id = "spread";
  spread.tokens = {"alpha", "bravo", "charlie"};
  spread.relations = {{TokenSpan{0, 2}, TokenSpan{2, 3}}};
  CHECK(span_tie_coordinates(clean, spread, 5, 1e-4).empty());
}

TEST_CASE("span training is deterministic and learns the fixture") {
  auto corpus = load_fixture();
  auto run = [&] {
    SpanModelConfig config;
    config.n_max = auto_max_span(corpus);
    config.dim = 8;
    config.width_dim = 4;
    config.buckets = 512;
    Rng rng(7);
    auto model = make_span_model(config, rng);
    std::vector<double> losses;
    for (int epoch = 0; epoch < 10; ++epoch)
      losses.push_back(span_train_epoch(model, corpus, rng, 0.01));
    return std::pair{losses, nn::serialize_model(model.params, R"({"kind":"span"})")};
  };
  auto [losses_a, bytes_a] = run();
  auto [losses_b, bytes_b] = run();
  CHECK(losses_a == losses_b);
  CHECK(bytes_a == bytes_b);  // identical model bytes
  CHECK(losses_a.back() < losses_a.front());
}

TEST_CASE("a corpus with no gold spans trains toward all-none") {
  std::vector<Example> corpus;
  for (int i = 0; i < 4; ++i) {
    Example e;
    e.id = "none" + std::to_string(i);
    e.tokens = {"w1", "w2", "w3", "w4"};
    corpus.push_back(std::move(e));
  }
  auto model = small_model(2);
  Rng rng(5);
  const double first = span_train_epoch(model, corpus, rng, 0.05);
  double last = first;
  for (int epoch = 0; epoch < 10; ++epoch) last = span_train_epoch(model, corpus, rng, 0.05);
  CHECK(last < first);
  const auto result = span_predict(model, corpus[0].tokens);
  CHECK_FALSE(result.cause.has_value());
  CHECK_FALSE(result.effect.has_value());
}

TEST_CASE("span_predict selection rules") {
  SUBCASE("none everywhere yields empty prediction") {
    auto model = small_model();
    model.params.at("Ws").value.setZero();
    model.params.at("bs").value.setZero();
    model.params.at("bs").value(static_cast<int>(SpanClass::None), 0) = 20.0;
    const auto result = span_predict(model, {"a", "b", "c"});
    CHECK_FALSE(result.cause.has_value());
    CHECK_FALSE(result.effect.has_value());
    CHECK_FALSE(result.relation_score.has_value());
  }

  SUBCASE("all-cause bias chooses the longest span with the smallest start") {
    auto model = small_model(3);
    model.params.at("Ws").value.setZero();
    model.params.at("bs").value.setZero();
    model.params.at("bs").value(static_cast<int>(SpanClass::Cause), 0) = 20.0;
    const auto result = span_predict(model, {"a", "b", "c", "d", "e"});
    REQUIRE(result.cause.has_value());
    CHECK(*result.cause == TokenSpan{0, 3});
    CHECK_FALSE(result.effect.has_value());
  }

  SUBCASE("select_longest_span applies the longest-then-smallest-start rule") {
    std::vector<SpanPrediction> preds{{TokenSpan{0, 2}, Role::Cause, 0.9},
                                      {TokenSpan{3, 7}, Role::Cause, 0.6}};
    CHECK(*select_longest_span(preds, Role::Cause) == TokenSpan{3, 7});

    std::vector<SpanPrediction> ties{{TokenSpan{5, 7}, Role::Effect, 0.99},
                                     {TokenSpan{0, 2}, Role::Effect, 0.5}};
    CHECK(*select_longest_span(ties, Role::Effect) == TokenSpan{0, 2});
    CHECK_FALSE(select_longest_span(ties, Role::Cause).has_value());
  }
}

TEST_CASE("predicted spans respect n_max") {
  Rng rng(31);
  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    auto model = small_model(3, seed);
    std::vector<std::string> tokens;
    const int length = 4 + static_cast<int>(rng.below(8));
    for (int i = 0; i < length; ++i) tokens.push_back("tok" + std::to_string(rng.below(50)));
    const auto result = span_predict(model, tokens);
    if (result.cause) CHECK(result.cause->length() <= 3);
    if (result.effect) CHECK(result.effect->length() <= 3);
    if (result.cause && result.effect) {
      REQUIRE(result.relation_score.has_value());
      CHECK(*result.relation_score > 0.0);
      CHECK(*result.relation_score < 1.0);
    }
  }
}

TEST_CASE("auto_max_span") {
  std::vector<Example> corpus;
  auto add = [&](const std::string& id, int cause_len, int effect_len) {
    Example e;
    e.id = id;
    e.tokens = std::vector<std::string>(static_cast<size_t>(cause_len + effect_len + 1), "w");
    e.relations = {{TokenSpan{0, cause_len},
                    TokenSpan{cause_len + 1, cause_len + 1 + effect_len}}};
    corpus.push_back(std::move(e));
  };

  SUBCASE("all spans of one length") {
    for (int i = 0; i < 5; ++i) add("c" + std::to_string(i), 3, 3);
    CHECK(auto_max_span(corpus) == 3);
  }

  SUBCASE("99 copies of 1 and a single 40: p99 over 100 lengths is 1") {
    // 49 examples with both spans of length 1, one with lengths (1, 40)
    for (int i = 0; i < 49; ++i) add("c" + std::to_string(i), 1, 1);
    add("big", 1, 40);
    std::vector<int> lengths(99, 1);
    lengths.push_back(40);
    CHECK(percentile_length(lengths, 99) == 1);  // sort-and-index oracle
    CHECK(auto_max_span(corpus) == 1);
  }

  SUBCASE("short-span distribution with a long tail lands at 6") {
    // 99% of spans at length <= 6, 1% above, like a mostly-short corpus
    int id = 0;
    for (int i = 0; i < 33; ++i) add("s" + std::to_string(id++), 2, 3);
    for (int i = 0; i < 16; ++i) add("m" + std::to_string(id++), 5, 6);
    add("tail", 6, 14);
    CHECK(auto_max_span(corpus) == 6);
  }

  SUBCASE("empty span set is an error") {
    Example e;
    e.id = "empty";
    e.tokens = {"x"};
    CHECK_THROWS_AS(auto_max_span({e}), ValidationError);
  }
}

TEST_CASE("span models round-trip through files") {
  test::TempDir dir;
  auto model = small_model();
  const std::string path = dir.file("span.json");
  save_span_model(model, path);
  auto loaded = load_span_model(path);
  CHECK(loaded.config.n_max == model.config.n_max);
  CHECK(loaded.config.buckets == model.config.buckets);
  CHECK((loaded.params.at("Ws").value - model.params.at("Ws").value).norm() == 0.0);

  const std::vector<std::string> tokens{"p", "q", "r"};
  const Vec a = span_embedding(model, tokens, {0, 2});
  const Vec b = span_embedding(loaded, tokens, {0, 2});
  CHECK((a - b).norm() == 0.0);
}
