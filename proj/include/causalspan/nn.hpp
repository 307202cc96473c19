#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "causalspan/errors.hpp"
#include "causalspan/rng.hpp"

namespace causalspan::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// A trainable tensor with its gradient accumulator and Adam state.
/// rank 1 parameters are vectors stored as n x 1.
struct Param {
  Mat value;
  Mat grad;
  Mat m;
  Mat v;
  int rank = 2;

  Index size() const { return value.size(); }
};

/// Named parameter collection. Iteration order is the sorted name order, so
/// updates and serialization are deterministic.
class ParamSet {
 public:
  Param& add(const std::string& name, Index rows, Index cols = 1, int rank = 2);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return items_.count(name) > 0; }

  void zero_grads();

  std::map<std::string, Param>& items() { return items_; }
  const std::map<std::string, Param>& items() const { return items_; }

  long step = 0;  // Adam timestep, bumped by adam_step

 private:
  std::map<std::string, Param> items_;
};

namespace detail {
[[noreturn]] void shape_error(const std::string& what);
}

/// y = W x + b.
template <typename WT, typename XT, typename BT>
Vec linear(const Eigen::MatrixBase<WT>& W, const Eigen::MatrixBase<XT>& x,
           const Eigen::MatrixBase<BT>& b) {
  if (W.cols() != x.size() || W.rows() != b.size())
    detail::shape_error("linear: W is " + std::to_string(W.rows()) + "x" +
                        std::to_string(W.cols()) + ", x has " + std::to_string(x.size()) +
                        ", b has " + std::to_string(b.size()));
  return W * x.derived().reshaped() + b.derived().reshaped();
}

/// Numerically stable softmax (max subtraction).
template <typename T>
Vec softmax(const Eigen::MatrixBase<T>& logits) {
  Vec z = logits.derived().reshaped();
  const double top = z.maxCoeff();
  z = (z.array() - top).exp();
  return z / z.sum();
}

struct SoftmaxXent {
  double loss = 0.0;
  Vec dlogits;
};

/// Cross-entropy of softmax(logits) against a class index, with the gradient
/// softmax(logits) - onehot(target). Requires at least two classes.
SoftmaxXent softmax_xent(const Vec& logits, int target);

struct MaxPool {
  Vec value;
  std::vector<Index> argmax;  // winning row per dimension, lowest index on ties
};

/// Elementwise max over the rows of a non-empty matrix. The argmax indices
/// route the gradient on the backward pass.
template <typename T>
MaxPool max_pool(const Eigen::MatrixBase<T>& rows) {
  if (rows.rows() == 0) detail::shape_error("max_pool: empty input");
  MaxPool out;
  out.value = rows.row(0);
  out.argmax.assign(static_cast<size_t>(rows.cols()), 0);
  for (Index i = 1; i < rows.rows(); ++i)
    for (Index j = 0; j < rows.cols(); ++j)
      if (rows(i, j) > out.value(j)) {
        out.value(j) = rows(i, j);
        out.argmax[static_cast<size_t>(j)] = i;
      }
  return out;
}

/// Arithmetic mean over the rows of a non-empty matrix.
template <typename T>
Vec mean_pool(const Eigen::MatrixBase<T>& rows) {
  if (rows.rows() == 0) detail::shape_error("mean_pool: empty input");
  return rows.colwise().mean().transpose();
}

/// Row `index` of an embedding table; bounds-checked.
Vec embed_lookup(const Mat& table, Index index);

/// Sparse gradient accumulation for an embedding row. Repeated calls for the
/// same index add up.
void embed_accumulate(Mat& grad_table, Index index, const Vec& g);

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Standard Adam with bias correction over every parameter, then zeroes the
/// gradients. Throws ValidationError if an update produces a non-finite value.
void adam_step(ParamSet& params, const AdamConfig& config = {});

/// uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)); fan sizes are the
/// parameter's rows and cols. Draws row-major from the generator.
void init_glorot(Param& param, Rng& rng);

struct GradCheckConfig {
  double eps = 1e-3;
  /// 0 checks every coordinate; otherwise at most this many coordinates are
  /// sampled per tensor (at least 64 per the contract).
  int max_coords_per_tensor = 0;
  uint64_t seed = 1;
  /// Optional exclusion, e.g. for coordinates sitting on a max-pool tie where
  /// the loss is not differentiable.
  std::function<bool(const std::string& name, Index i, Index j)> skip;
};

/// Compares the analytic gradient produced by `loss_with_grad` (which must
/// accumulate gradients into the ParamSet and be deterministic) against
/// central finite differences. Returns the max relative error
/// |a - n| / max(|a|, |n|, 1e-8). Parameters are restored and gradients
/// zeroed afterwards.
double grad_check(const std::function<double(ParamSet&)>& loss_with_grad, ParamSet& params,
                  const GradCheckConfig& config = {});

/// FNV-1a 64-bit hash.
uint64_t fnv1a64(std::string_view bytes);

/// Hashed word bucket: FNV-1a of the ASCII-lowercased token, mod bucket count.
int hash_bucket(std::string_view token, int buckets);

/// Versioned model JSON: {"version":1, "config":..., "params": {name:
/// {"shape":[...], "data":[...]}}}. Data is row-major. config_json must be a
/// valid JSON object; non-finite parameter values are rejected.
std::string serialize_model(const ParamSet& params, const std::string& config_json);

struct LoadedModel {
  std::string config_json;
  ParamSet params;
};

/// Parses model JSON, validating version, shape/data agreement, and
/// finiteness. Model-specific shape checks happen in the model loaders.
LoadedModel deserialize_model(const std::string& text);

void save_model_file(const std::string& path, const ParamSet& params,
                     const std::string& config_json);
LoadedModel load_model_file(const std::string& path);

}  // namespace causalspan::nn
