#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "causalspan/eval.hpp"
#include "oracle_scorer.hpp"
#include "test_util.hpp"

using namespace causalspan;
using test::oracle_accumulate;
using test::oracle_prf;
using test::OracleCounts;
using test::random_spans;

TEST_CASE("exact counts on the sunrise example") {
  const Example sunrise = test::sunrise_example();
  const auto gold = sunrise.role_spans();

  SUBCASE("perfect prediction") {
    auto counts = match_counts(gold, gold);
    CHECK(counts.pooled.exact.correct == 2);
    CHECK(counts.pooled.exact.predicted == 2);
    CHECK(counts.pooled.exact.gold == 2);
  }
  SUBCASE("shifted cause keeps only the effect") {
    std::vector<RoleSpan> pred{{TokenSpan{6, 9}, Role::Cause}, {TokenSpan{0, 2}, Role::Effect}};
    auto counts = match_counts(gold, pred);
    CHECK(counts.pooled.exact.correct == 1);
    CHECK(counts.cause.exact.correct == 0);
    CHECK(counts.effect.exact.correct == 1);
  }
  SUBCASE("empty prediction") {
    auto counts = match_counts(gold, {});
    CHECK(counts.pooled.exact.correct == 0);
    CHECK(counts.pooled.exact.predicted == 0);
    CHECK(counts.pooled.exact.gold == 2);
  }
}

TEST_CASE("partial counts follow token sets") {
  // gold cause [7,9) + effect [0,2); pred cause [6,9) + effect [0,2)
  std::vector<RoleSpan> gold{{TokenSpan{7, 9}, Role::Cause}, {TokenSpan{0, 2}, Role::Effect}};
  std::vector<RoleSpan> pred{{TokenSpan{6, 9}, Role::Cause}, {TokenSpan{0, 2}, Role::Effect}};
  auto counts = match_counts(gold, pred);
  CHECK(counts.pooled.partial.overlap == 4);
  CHECK(counts.pooled.partial.predicted_tokens == 5);
  CHECK(counts.pooled.partial.gold_tokens == 4);

  SUBCASE("micro_prf over those counts") {
    auto prf = micro_prf(4, 5, 4);
    CHECK(prf.precision == doctest::Approx(0.8));
    CHECK(prf.recall == doctest::Approx(1.0));
    CHECK(prf.f1 == doctest::Approx(8.0 / 9.0).epsilon(1e-4));
  }

  SUBCASE("disjoint prediction overlaps nothing") {
    std::vector<RoleSpan> off{{TokenSpan{2, 5}, Role::Cause}};
    auto c = match_counts(gold, off);
    CHECK(c.pooled.partial.overlap == 0);
  }
  SUBCASE("perfect prediction overlaps everything") {
    auto c = match_counts(gold, gold);
    CHECK(c.pooled.partial.overlap == c.pooled.partial.gold_tokens);
  }
  SUBCASE("overlapping predicted spans never double-count tokens") {
    std::vector<RoleSpan> doubled{{TokenSpan{6, 9}, Role::Cause},
                                  {TokenSpan{7, 9}, Role::Cause}};
    auto c = partial_counts(gold, doubled, Role::Cause);
    CHECK(c.predicted_tokens == 3);  // {6,7,8} as a set
    CHECK(c.overlap == 2);
  }
}

TEST_CASE("micro_prf zero conventions") {
  auto prf = micro_prf(2, 2, 2);
  CHECK(prf.precision == 1.0);
  CHECK(prf.recall == 1.0);
  CHECK(prf.f1 == 1.0);

  prf = micro_prf(1, 2, 2);
  CHECK(prf.precision == doctest::Approx(0.5));
  CHECK(prf.recall == doctest::Approx(0.5));
  CHECK(prf.f1 == doctest::Approx(0.5));

  prf = micro_prf(0, 0, 5);
  CHECK(prf.precision == 0.0);
  CHECK(prf.recall == 0.0);
  CHECK(prf.f1 == 0.0);

  CHECK_THROWS_AS(micro_prf(-1, 0, 0), ValidationError);
}

TEST_CASE("evaluate_corpus aggregates micro counts") {
  std::vector<Example> gold;
  for (int i = 0; i < 3; ++i) {
    Example e;
    e.id = "e" + std::to_string(i);
    e.tokens = std::vector<std::string>(10, "w");
    e.relations = {{TokenSpan{0, 2 + i}, TokenSpan{5, 7}}};
    gold.push_back(std::move(e));
  }

  SUBCASE("perfect predictions give all ones") {
    PredictionMap preds;
    for (const Example& e : gold) preds[e.id] = e.role_spans();
    auto report = evaluate_corpus(gold, preds);
    for (const RoleMetrics* m : {&report.cause, &report.effect, &report.pooled}) {
      CHECK(m->exact.f1 == 1.0);
      CHECK(m->partial.f1 == 1.0);
    }
    CHECK(report.examples == 3);
  }

  SUBCASE("missing predictions count as empty") {
    PredictionMap preds;
    preds["e0"] = gold[0].role_spans();
    auto report = evaluate_corpus(gold, preds);
    CHECK(report.counts.pooled.exact.gold == 6);
    CHECK(report.counts.pooled.exact.predicted == 2);
    CHECK(report.counts.pooled.exact.correct == 2);
  }

  SUBCASE("all-empty predictions are all zeros with gold counts preserved") {
    auto report = evaluate_corpus(gold, {});
    CHECK(report.pooled.exact.f1 == 0.0);
    CHECK(report.pooled.partial.f1 == 0.0);
    CHECK(report.counts.pooled.exact.gold == 6);
  }

  SUBCASE("unknown prediction ids are rejected") {
    PredictionMap preds;
    preds["mystery"] = {};
    CHECK_THROWS_AS(evaluate_corpus(gold, preds), ValidationError);
  }

  SUBCASE("micro aggregation equals concatenation") {
    PredictionMap preds;
    preds["e0"] = {{TokenSpan{0, 2}, Role::Cause}};
    preds["e1"] = {{TokenSpan{5, 7}, Role::Effect}, {TokenSpan{0, 1}, Role::Cause}};
    auto report = evaluate_corpus(gold, preds);
    MatchCounts manual;
    manual.add(match_counts(gold[0].role_spans(), preds["e0"]));
    manual.add(match_counts(gold[1].role_spans(), preds["e1"]));
    manual.add(match_counts(gold[2].role_spans(), {}));
    auto manual_report = report_from_counts(manual, 3);
    CHECK(report.pooled.exact.f1 == manual_report.pooled.exact.f1);
    CHECK(report.pooled.partial.f1 == manual_report.pooled.partial.f1);
  }
}

TEST_CASE("scorer equals the brute-force oracle on random cases") {
  Rng rng(314);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_tokens = 1 + static_cast<int>(rng.below(20));
    const auto gold = random_spans(rng, n_tokens, 4);
    const auto pred = random_spans(rng, n_tokens, 4);

    OracleCounts oracle;
    oracle_accumulate(oracle, gold, pred);
    const auto counts = match_counts(gold, pred);

    const RoleCounts* by_role[2] = {&counts.cause, &counts.effect};
    for (int role = 0; role < 2; ++role) {
      CHECK(by_role[role]->exact.correct == oracle.exact_correct[role]);
      CHECK(by_role[role]->exact.predicted == oracle.exact_pred[role]);
      CHECK(by_role[role]->exact.gold == oracle.exact_gold[role]);
      CHECK(by_role[role]->partial.overlap == oracle.tok_overlap[role]);
      CHECK(by_role[role]->partial.predicted_tokens == oracle.tok_pred[role]);
      CHECK(by_role[role]->partial.gold_tokens == oracle.tok_gold[role]);
    }

    const auto report = report_from_counts(counts, 1);
    const auto pooled_exact =
        oracle_prf(oracle.exact_correct[0] + oracle.exact_correct[1],
                   oracle.exact_pred[0] + oracle.exact_pred[1],
                   oracle.exact_gold[0] + oracle.exact_gold[1]);
    CHECK(std::abs(report.pooled.exact.f1 - pooled_exact.f1) < 1e-12);
    const auto pooled_partial = oracle_prf(oracle.tok_overlap[0] + oracle.tok_overlap[1],
                                           oracle.tok_pred[0] + oracle.tok_pred[1],
                                           oracle.tok_gold[0] + oracle.tok_gold[1]);
    CHECK(std::abs(report.pooled.partial.f1 - pooled_partial.f1) < 1e-12);
    CHECK(std::abs(report.pooled.partial.precision - pooled_partial.p) < 1e-12);
    CHECK(std::abs(report.pooled.partial.recall - pooled_partial.r) < 1e-12);

    // bounds invariants
    for (const RoleMetrics* m : {&report.cause, &report.effect, &report.pooled}) {
      CHECK(m->exact.f1 >= 0.0);
      CHECK(m->exact.f1 <= 1.0);
      CHECK(m->partial.f1 >= 0.0);
      CHECK(m->partial.f1 <= 1.0);
    }
  }
}

TEST_CASE("report formats") {
  std::vector<RoleSpan> gold{{TokenSpan{7, 9}, Role::Cause}, {TokenSpan{0, 2}, Role::Effect}};
  std::vector<RoleSpan> pred{{TokenSpan{6, 9}, Role::Cause}, {TokenSpan{0, 2}, Role::Effect}};
  auto report = report_from_counts(match_counts(gold, pred), 1);

  SUBCASE("text prints exact with partial in brackets") {
    const std::string text = emit_report(report, ReportFormat::Text);
    // pooled partial (P, R, F1) = (0.8, 1.0, 0.8889)
    CHECK(text.find("(80.00)") != std::string::npos);
    CHECK(text.find("(88.89)") != std::string::npos);
    CHECK(text.find("overall") != std::string::npos);

    // cause exact: 0 correct of 1; effect exact: perfect
    auto perfect = report_from_counts(match_counts(gold, gold), 1);
    const std::string all_hundred = emit_report(perfect, ReportFormat::Text);
    CHECK(all_hundred.find("100.00 (100.00)") != std::string::npos);
  }

  SUBCASE("exact 50.00 next to partial 88.89 in the pooled row") {
    const std::string text = emit_report(report, ReportFormat::Text);
    const auto pos = text.find("overall");
    REQUIRE(pos != std::string::npos);
    const std::string row = text.substr(pos, text.find('\n', pos) - pos);
    CHECK(row.find("50.00 (88.89)") != std::string::npos);
  }

  SUBCASE("json round-trips to an equal report") {
    const std::string json_text = emit_report(report, ReportFormat::Json);
    const MetricsReport parsed = report_from_json(json_text);
    CHECK(parsed.examples == report.examples);
    CHECK(parsed.pooled.exact.f1 == report.pooled.exact.f1);
    CHECK(parsed.pooled.partial.f1 == report.pooled.partial.f1);
    CHECK(parsed.counts.pooled.partial.overlap == report.counts.pooled.partial.overlap);
    CHECK(parsed.counts.cause.exact.gold == report.counts.cause.exact.gold);
  }

  SUBCASE("csv has one row per role") {
    const std::string csv = emit_report(report, ReportFormat::Csv);
    CHECK(csv.find("role,exact_precision") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  }

  CHECK_THROWS_AS(report_format_from_string("yaml"), ValidationError);
}
