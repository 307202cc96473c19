#pragma once

#include <optional>
#include <string>
#include <vector>

#include "causalspan/corpus.hpp"
#include "causalspan/eval.hpp"

namespace causalspan {

/// One prediction record. The span extractor emits at most one span per role;
/// the sequence tagger may decode several, hence the vectors.
struct PredictionRecord {
  std::string id;
  std::vector<TokenSpan> cause;
  std::vector<TokenSpan> effect;
  std::optional<double> relation_score;
};

/// Prediction JSONL: {"id":..., "cause":[s,e]|null, "effect":[s,e]|null,
/// "relation_score": float|null}; a role with several spans is written as a
/// list of [s,e] pairs. The reader accepts all three shapes.
void write_predictions(const std::vector<PredictionRecord>& records, const std::string& path);
std::vector<PredictionRecord> read_predictions(const std::string& path);

PredictionMap predictions_to_role_spans(const std::vector<PredictionRecord>& records);

}  // namespace causalspan
