#include "causalspan/nn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace causalspan::nn {

using nlohmann::json;
using nlohmann::ordered_json;

namespace detail {
[[noreturn]] void shape_error(const std::string& what) { throw ValidationError(what); }
}  // namespace detail

Param& ParamSet::add(const std::string& name, Index rows, Index cols, int rank) {
  if (items_.count(name)) detail::shape_error("duplicate parameter name '" + name + "'");
  if (rows <= 0 || cols <= 0) detail::shape_error("parameter '" + name + "' has empty shape");
  Param param;
  param.value = Mat::Zero(rows, cols);
  param.grad = Mat::Zero(rows, cols);
  param.m = Mat::Zero(rows, cols);
  param.v = Mat::Zero(rows, cols);
  param.rank = rank;
  return items_.emplace(name, std::move(param)).first->second;
}

Param& ParamSet::at(const std::string& name) {
  auto it = items_.find(name);
  if (it == items_.end()) detail::shape_error("unknown parameter '" + name + "'");
  return it->second;
}

const Param& ParamSet::at(const std::string& name) const {
  auto it = items_.find(name);
  if (it == items_.end()) detail::shape_error("unknown parameter '" + name + "'");
  return it->second;
}

void ParamSet::zero_grads() {
  for (auto& [name, param] : items_) param.grad.setZero();
}

SoftmaxXent softmax_xent(const Vec& logits, int target) {
  if (logits.size() < 2) detail::shape_error("softmax_xent needs at least two classes");
  if (target < 0 || target >= logits.size())
    detail::shape_error("softmax_xent target " + std::to_string(target) + " out of range");
  const double top = logits.maxCoeff();
  Vec shifted = logits.array() - top;
  const double logsum = std::log(shifted.array().exp().sum());
  SoftmaxXent out;
  out.loss = logsum - shifted(target);
  out.dlogits = (shifted.array() - logsum).exp();
  out.dlogits(target) -= 1.0;
  return out;
}

Vec embed_lookup(const Mat& table, Index index) {
  if (index < 0 || index >= table.rows())
    detail::shape_error("embedding index " + std::to_string(index) + " out of range [0, " +
                        std::to_string(table.rows()) + ")");
  return table.row(index).transpose();
}

void embed_accumulate(Mat& grad_table, Index index, const Vec& g) {
  if (index < 0 || index >= grad_table.rows())
    detail::shape_error("embedding gradient index out of range");
  if (g.size() != grad_table.cols()) detail::shape_error("embedding gradient size mismatch");
  grad_table.row(index) += g.transpose();
}

void adam_step(ParamSet& params, const AdamConfig& config) {
  params.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(params.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(params.step));
  for (auto& [name, param] : params.items()) {
    param.m = config.beta1 * param.m + (1.0 - config.beta1) * param.grad;
    param.v = config.beta2 * param.v + (1.0 - config.beta2) * param.grad.cwiseProduct(param.grad);
    param.value.noalias() -=
        (config.lr * (param.m / bc1).array() / ((param.v / bc2).array().sqrt() + config.eps))
            .matrix();
    if (!param.value.allFinite())
      throw ValidationError("parameter '" + name + "' became non-finite during the Adam update");
    param.grad.setZero();
  }
}

void init_glorot(Param& param, Rng& rng) {
  const double fan = static_cast<double>(param.value.rows() + param.value.cols());
  const double s = std::sqrt(6.0 / fan);
  for (Index i = 0; i < param.value.rows(); ++i)
    for (Index j = 0; j < param.value.cols(); ++j) param.value(i, j) = rng.uniform(-s, s);
}

double grad_check(const std::function<double(ParamSet&)>& loss_with_grad, ParamSet& params,
                  const GradCheckConfig& config) {
  params.zero_grads();
  loss_with_grad(params);
  std::map<std::string, Mat> analytic;
  for (const auto& [name, param] : params.items()) analytic[name] = param.grad;

  Rng rng(config.seed);
  double max_rel_err = 0.0;
  for (auto& [name, param] : params.items()) {
    std::vector<size_t> coords;
    const auto total = static_cast<size_t>(param.size());
    if (config.max_coords_per_tensor > 0 &&
        total > static_cast<size_t>(config.max_coords_per_tensor)) {
      coords = rng.sample_indices(total, static_cast<size_t>(config.max_coords_per_tensor));
      std::sort(coords.begin(), coords.end());
    } else {
      coords.resize(total);
      for (size_t c = 0; c < total; ++c) coords[c] = c;
    }
    for (size_t flat : coords) {
      const Index i = static_cast<Index>(flat) % param.value.rows();
      const Index j = static_cast<Index>(flat) / param.value.rows();
      if (config.skip && config.skip(name, i, j)) continue;
      const double saved = param.value(i, j);
      param.value(i, j) = saved + config.eps;
      params.zero_grads();
      const double up = loss_with_grad(params);
      param.value(i, j) = saved - config.eps;
      params.zero_grads();
      const double down = loss_with_grad(params);
      param.value(i, j) = saved;
      const double numeric = (up - down) / (2.0 * config.eps);
      const double a = analytic[name](i, j);
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel_err = std::max(max_rel_err, rel);
    }
  }
  params.zero_grads();
  return max_rel_err;
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t hash = 14695981039346656037ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

int hash_bucket(std::string_view token, int buckets) {
  std::string lowered(token);
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return static_cast<int>(fnv1a64(lowered) % static_cast<uint64_t>(buckets));
}

std::string serialize_model(const ParamSet& params, const std::string& config_json) {
  ordered_json out;
  out["version"] = 1;
  json config = json::parse(config_json);
  if (!config.is_object()) throw ValidationError("model config must be a JSON object");
  out["config"] = std::move(config);
  ordered_json serialized = ordered_json::object();
  for (const auto& [name, param] : params.items()) {
    if (!param.value.allFinite())
      throw ValidationError("parameter '" + name + "' holds non-finite values");
    ordered_json entry;
    if (param.rank == 1)
      entry["shape"] = {param.value.rows()};
    else
      entry["shape"] = {param.value.rows(), param.value.cols()};
    std::vector<double> data;
    data.reserve(static_cast<size_t>(param.size()));
    for (Index i = 0; i < param.value.rows(); ++i)
      for (Index j = 0; j < param.value.cols(); ++j) data.push_back(param.value(i, j));
    entry["data"] = std::move(data);
    serialized[name] = std::move(entry);
  }
  out["params"] = std::move(serialized);
  return out.dump();
}

LoadedModel deserialize_model(const std::string& text) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
  if (!parsed.is_object() || !parsed.contains("version") || parsed["version"] != 1)
    throw ValidationError("model JSON must carry \"version\": 1");
  if (!parsed.contains("config") || !parsed["config"].is_object())
    throw ValidationError("model JSON is missing its \"config\" object");
  if (!parsed.contains("params") || !parsed["params"].is_object())
    throw ValidationError("model JSON is missing its \"params\" object");

  LoadedModel out;
  out.config_json = parsed["config"].dump();
  for (const auto& [name, entry] : parsed["params"].items()) {
    if (!entry.contains("shape") || !entry.contains("data"))
      throw ValidationError("parameter '" + name + "' needs \"shape\" and \"data\"");
    const auto& shape = entry["shape"];
    Index rows = 0, cols = 1;
    int rank = 2;
    if (shape.size() == 1) {
      rows = shape[0].get<Index>();
      rank = 1;
    } else if (shape.size() == 2) {
      rows = shape[0].get<Index>();
      cols = shape[1].get<Index>();
    } else {
      throw ValidationError("parameter '" + name + "' has unsupported rank");
    }
    const auto& data = entry["data"];
    if (!data.is_array() || static_cast<Index>(data.size()) != rows * cols)
      throw ValidationError("parameter '" + name + "' data length does not match its shape");
    Param& param = out.params.add(name, rows, cols, rank);
    size_t k = 0;
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) {
        if (!data[k].is_number())
          throw ValidationError("parameter '" + name + "' holds a non-numeric entry");
        param.value(i, j) = data[k++].get<double>();
      }
    if (!param.value.allFinite())
      throw ValidationError("parameter '" + name + "' holds non-finite values");
  }
  return out;
}

void save_model_file(const std::string& path, const ParamSet& params,
                     const std::string& config_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file: " + path);
  out << serialize_model(params, config_json) << "\n";
  if (!out) throw IoError("failed while writing model file: " + path);
}

LoadedModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

}  // namespace causalspan::nn
