#include "causalspan/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace causalspan {

using nlohmann::json;
using nlohmann::ordered_json;

void ExactCounts::add(const ExactCounts& o) {
  correct += o.correct;
  predicted += o.predicted;
  gold += o.gold;
}

void PartialCounts::add(const PartialCounts& o) {
  overlap += o.overlap;
  predicted_tokens += o.predicted_tokens;
  gold_tokens += o.gold_tokens;
}

void RoleCounts::add(const RoleCounts& o) {
  exact.add(o.exact);
  partial.add(o.partial);
}

void MatchCounts::add(const MatchCounts& o) {
  cause.add(o.cause);
  effect.add(o.effect);
  pooled.add(o.pooled);
}

namespace {

std::vector<TokenSpan> spans_of_role(const std::vector<RoleSpan>& spans, Role role) {
  std::vector<TokenSpan> out;
  for (const RoleSpan& rs : spans)
    if (rs.role == role) out.push_back(rs.span);
  return out;
}

std::set<int> token_set(const std::vector<TokenSpan>& spans) {
  std::set<int> out;
  for (const TokenSpan& span : spans)
    for (int t = span.start; t < span.end; ++t) out.insert(t);
  return out;
}

}  // namespace

ExactCounts exact_counts(const std::vector<RoleSpan>& gold, const std::vector<RoleSpan>& pred,
                         Role role) {
  std::vector<TokenSpan> g = spans_of_role(gold, role);
  std::vector<TokenSpan> p = spans_of_role(pred, role);
  ExactCounts counts;
  counts.gold = static_cast<long>(g.size());
  counts.predicted = static_cast<long>(p.size());
  // Multiset intersection: each gold span is matchable at most once.
  std::sort(g.begin(), g.end());
  std::sort(p.begin(), p.end());
  size_t i = 0, j = 0;
  while (i < g.size() && j < p.size()) {
    if (g[i] == p[j]) {
      ++counts.correct;
      ++i;
      ++j;
    } else if (g[i] < p[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return counts;
}

PartialCounts partial_counts(const std::vector<RoleSpan>& gold,
                             const std::vector<RoleSpan>& pred, Role role) {
  const std::set<int> g = token_set(spans_of_role(gold, role));
  const std::set<int> p = token_set(spans_of_role(pred, role));
  PartialCounts counts;
  counts.gold_tokens = static_cast<long>(g.size());
  counts.predicted_tokens = static_cast<long>(p.size());
  for (int t : p)
    if (g.count(t)) ++counts.overlap;
  return counts;
}

MatchCounts match_counts(const std::vector<RoleSpan>& gold, const std::vector<RoleSpan>& pred) {
  MatchCounts counts;
  counts.cause = {exact_counts(gold, pred, Role::Cause),
                  partial_counts(gold, pred, Role::Cause)};
  counts.effect = {exact_counts(gold, pred, Role::Effect),
                   partial_counts(gold, pred, Role::Effect)};
  counts.pooled = counts.cause;
  counts.pooled.add(counts.effect);
  return counts;
}

Prf micro_prf(long correct, long n_pred, long n_gold) {
  if (correct < 0 || n_pred < 0 || n_gold < 0)
    throw ValidationError("match counts must be non-negative");
  Prf out;
  out.precision = n_pred == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n_pred);
  out.recall = n_gold == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n_gold);
  out.f1 = out.precision + out.recall == 0.0
               ? 0.0
               : 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

namespace {

RoleMetrics role_metrics(const RoleCounts& counts) {
  RoleMetrics out;
  out.exact = micro_prf(counts.exact.correct, counts.exact.predicted, counts.exact.gold);
  out.partial = micro_prf(counts.partial.overlap, counts.partial.predicted_tokens,
                          counts.partial.gold_tokens);
  return out;
}

}  // namespace

MetricsReport report_from_counts(const MatchCounts& counts, long examples) {
  MetricsReport report;
  report.counts = counts;
  report.examples = examples;
  report.cause = role_metrics(counts.cause);
  report.effect = role_metrics(counts.effect);
  report.pooled = role_metrics(counts.pooled);
  return report;
}

MetricsReport evaluate_corpus(const std::vector<Example>& gold,
                              const PredictionMap& predictions) {
  std::set<std::string> gold_ids;
  for (const Example& example : gold) gold_ids.insert(example.id);
  for (const auto& [id, spans] : predictions)
    if (!gold_ids.count(id))
      throw ValidationError("prediction for unknown example id '" + id + "'");

  MatchCounts totals;
  static const std::vector<RoleSpan> kEmpty;
  for (const Example& example : gold) {
    auto it = predictions.find(example.id);
    const std::vector<RoleSpan>& pred = it == predictions.end() ? kEmpty : it->second;
    totals.add(match_counts(example.role_spans(), pred));
  }
  return report_from_counts(totals, static_cast<long>(gold.size()));
}

ReportFormat report_format_from_string(std::string_view name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "text") return ReportFormat::Text;
  if (name == "csv") return ReportFormat::Csv;
  throw ValidationError("unknown report format '" + std::string(name) +
                        "' (expected json|text|csv)");
}

namespace {

std::string pct(double fraction) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << fraction * 100.0;
  return out.str();
}

void emit_text_row(std::ostringstream& out, const char* label, const RoleMetrics& m) {
  out << std::left << std::setw(8) << label << std::right;
  out << std::setw(6) << pct(m.exact.precision) << " (" << pct(m.partial.precision) << ")  ";
  out << std::setw(6) << pct(m.exact.recall) << " (" << pct(m.partial.recall) << ")  ";
  out << std::setw(6) << pct(m.exact.f1) << " (" << pct(m.partial.f1) << ")\n";
}

ordered_json prf_to_json(const Prf& prf) {
  return {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1}};
}

Prf prf_from_json(const json& j) {
  return Prf{j.at("precision").get<double>(), j.at("recall").get<double>(),
             j.at("f1").get<double>()};
}

ordered_json role_counts_to_json(const RoleCounts& counts) {
  return {{"exact",
           {{"correct", counts.exact.correct},
            {"predicted", counts.exact.predicted},
            {"gold", counts.exact.gold}}},
          {"partial",
           {{"overlap", counts.partial.overlap},
            {"predicted_tokens", counts.partial.predicted_tokens},
            {"gold_tokens", counts.partial.gold_tokens}}}};
}

RoleCounts role_counts_from_json(const json& j) {
  RoleCounts out;
  out.exact = {j.at("exact").at("correct").get<long>(),
               j.at("exact").at("predicted").get<long>(),
               j.at("exact").at("gold").get<long>()};
  out.partial = {j.at("partial").at("overlap").get<long>(),
                 j.at("partial").at("predicted_tokens").get<long>(),
                 j.at("partial").at("gold_tokens").get<long>()};
  return out;
}

ordered_json role_metrics_to_json(const RoleMetrics& m) {
  return {{"exact", prf_to_json(m.exact)}, {"partial", prf_to_json(m.partial)}};
}

RoleMetrics role_metrics_from_json(const json& j) {
  return RoleMetrics{prf_from_json(j.at("exact")), prf_from_json(j.at("partial"))};
}

}  // namespace

std::string emit_report(const MetricsReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Text: {
      std::ostringstream out;
      out << "role    P (partial)    R (partial)    F1 (partial)\n";
      emit_text_row(out, "cause", report.cause);
      emit_text_row(out, "effect", report.effect);
      emit_text_row(out, "overall", report.pooled);
      out << "examples: " << report.examples << "\n";
      return out.str();
    }
    case ReportFormat::Csv: {
      std::ostringstream out;
      out << "role,exact_precision,exact_recall,exact_f1,partial_precision,partial_recall,"
             "partial_f1\n";
      auto row = [&](const char* label, const RoleMetrics& m) {
        out << label << "," << pct(m.exact.precision) << "," << pct(m.exact.recall) << ","
            << pct(m.exact.f1) << "," << pct(m.partial.precision) << ","
            << pct(m.partial.recall) << "," << pct(m.partial.f1) << "\n";
      };
      row("cause", report.cause);
      row("effect", report.effect);
      row("overall", report.pooled);
      return out.str();
    }
    case ReportFormat::Json: {
      ordered_json out;
      out["version"] = 1;
      out["examples"] = report.examples;
      out["metrics"] = {{"cause", role_metrics_to_json(report.cause)},
                        {"effect", role_metrics_to_json(report.effect)},
                        {"overall", role_metrics_to_json(report.pooled)}};
      out["counts"] = {{"cause", role_counts_to_json(report.counts.cause)},
                       {"effect", role_counts_to_json(report.counts.effect)},
                       {"overall", role_counts_to_json(report.counts.pooled)}};
      return out.dump(2);
    }
  }
  throw ValidationError("unknown report format");
}

MetricsReport report_from_json(const std::string& text) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed report JSON: ") + e.what());
  }
  MetricsReport report;
  report.examples = parsed.at("examples").get<long>();
  report.cause = role_metrics_from_json(parsed.at("metrics").at("cause"));
  report.effect = role_metrics_from_json(parsed.at("metrics").at("effect"));
  report.pooled = role_metrics_from_json(parsed.at("metrics").at("overall"));
  report.counts.cause = role_counts_from_json(parsed.at("counts").at("cause"));
  report.counts.effect = role_counts_from_json(parsed.at("counts").at("effect"));
  report.counts.pooled = role_counts_from_json(parsed.at("counts").at("overall"));
  return report;
}

}  // namespace causalspan
