#include "causalspan/predictions.hpp"

#include <fstream>

#include <json.hpp>

namespace causalspan {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json role_field(const std::vector<TokenSpan>& spans) {
  if (spans.empty()) return nullptr;
  if (spans.size() == 1) return {spans[0].start, spans[0].end};
  ordered_json out = ordered_json::array();
  for (const TokenSpan& span : spans) out.push_back({span.start, span.end});
  return out;
}

std::vector<TokenSpan> parse_role_field(const json& value, const std::string& id) {
  std::vector<TokenSpan> out;
  if (value.is_null()) return out;
  if (!value.is_array())
    throw ValidationError("prediction '" + id + "': span field must be null or an array");
  if (value.size() == 2 && value[0].is_number_integer() && value[1].is_number_integer()) {
    out.push_back({value[0].get<int>(), value[1].get<int>()});
    return out;
  }
  for (const auto& entry : value) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() ||
        !entry[1].is_number_integer())
      throw ValidationError("prediction '" + id + "': expected [start, end] pairs");
    out.push_back({entry[0].get<int>(), entry[1].get<int>()});
  }
  return out;
}

}  // namespace

void write_predictions(const std::vector<PredictionRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write predictions file: " + path);
  for (const PredictionRecord& record : records) {
    ordered_json line;
    line["id"] = record.id;
    line["cause"] = role_field(record.cause);
    line["effect"] = role_field(record.effect);
    if (record.relation_score)
      line["relation_score"] = *record.relation_score;
    else
      line["relation_score"] = nullptr;
    out << line.dump() << "\n";
  }
  if (!out) throw IoError("failed while writing predictions file: " + path);
}

std::vector<PredictionRecord> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions file: " + path);
  std::vector<PredictionRecord> records;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json parsed;
    try {
      parsed = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": malformed JSON: " + e.what());
    }
    PredictionRecord record;
    if (!parsed.contains("id") || !parsed["id"].is_string())
      throw ValidationError(path + ":" + std::to_string(line_no) + ": missing string \"id\"");
    record.id = parsed["id"].get<std::string>();
    if (parsed.contains("cause")) record.cause = parse_role_field(parsed["cause"], record.id);
    if (parsed.contains("effect")) record.effect = parse_role_field(parsed["effect"], record.id);
    if (parsed.contains("relation_score") && parsed["relation_score"].is_number())
      record.relation_score = parsed["relation_score"].get<double>();
    records.push_back(std::move(record));
  }
  return records;
}

PredictionMap predictions_to_role_spans(const std::vector<PredictionRecord>& records) {
  PredictionMap map;
  for (const PredictionRecord& record : records) {
    std::vector<RoleSpan>& spans = map[record.id];
    for (const TokenSpan& span : record.cause) spans.push_back({span, Role::Cause});
    for (const TokenSpan& span : record.effect) spans.push_back({span, Role::Effect});
  }
  return map;
}

}  // namespace causalspan
