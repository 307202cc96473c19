#pragma once

#include <map>
#include <string>
#include <vector>

#include "causalspan/corpus.hpp"

namespace causalspan {

/// Exact matching: a predicted span is correct iff (start, end, role) equals
/// a gold span, each gold span matchable at most once.
struct ExactCounts {
  long correct = 0;
  long predicted = 0;
  long gold = 0;

  void add(const ExactCounts& o);
};

/// Partial matching at token level: overlap is the size of the intersection
/// of the predicted and gold token-index sets for a role.
struct PartialCounts {
  long overlap = 0;
  long predicted_tokens = 0;
  long gold_tokens = 0;

  void add(const PartialCounts& o);
};

struct RoleCounts {
  ExactCounts exact;
  PartialCounts partial;

  void add(const RoleCounts& o);
};

struct MatchCounts {
  RoleCounts cause;
  RoleCounts effect;
  RoleCounts pooled;  // cause + effect counts summed

  void add(const MatchCounts& o);
};

ExactCounts exact_counts(const std::vector<RoleSpan>& gold, const std::vector<RoleSpan>& pred,
                         Role role);
PartialCounts partial_counts(const std::vector<RoleSpan>& gold,
                             const std::vector<RoleSpan>& pred, Role role);

/// Both matching modes for both roles plus the pooled totals of one example.
MatchCounts match_counts(const std::vector<RoleSpan>& gold, const std::vector<RoleSpan>& pred);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// P = correct/n_pred (0 when n_pred = 0), R = correct/n_gold (0 when
/// n_gold = 0), F1 = 2PR/(P+R) (0 when P+R = 0).
Prf micro_prf(long correct, long n_pred, long n_gold);

struct RoleMetrics {
  Prf exact;
  Prf partial;
};

struct MetricsReport {
  RoleMetrics cause;
  RoleMetrics effect;
  RoleMetrics pooled;
  MatchCounts counts;
  long examples = 0;
};

/// id -> role-tagged predicted spans.
using PredictionMap = std::map<std::string, std::vector<RoleSpan>>;

/// Micro aggregation: counts are summed over all examples before the ratios
/// are taken. A gold id missing from the predictions counts as an empty
/// prediction; a prediction id absent from the gold corpus raises
/// ValidationError.
MetricsReport evaluate_corpus(const std::vector<Example>& gold,
                              const PredictionMap& predictions);

MetricsReport report_from_counts(const MatchCounts& counts, long examples);

enum class ReportFormat { Json, Text, Csv };
ReportFormat report_format_from_string(std::string_view name);

/// Text renders "P (Pp)  R (Rp)  F1 (F1p)" per role as percentages with two
/// decimals, exact first and partial in brackets.
std::string emit_report(const MetricsReport& report, ReportFormat format);

/// Inverse of emit_report(..., Json).
MetricsReport report_from_json(const std::string& text);

}  // namespace causalspan
